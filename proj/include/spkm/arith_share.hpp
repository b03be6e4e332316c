#pragma once

#include <utility>
#include <vector>

#include "spkm/prg.hpp"
#include "spkm/ring_matrix.hpp"
#include "spkm/session.hpp"
#include "spkm/transport.hpp"
#include "spkm/triples.hpp"

namespace spkm {

struct AShare {
  Role owner = Role::A;
  RingMatrix value;

  std::size_t rows() const { return value.rows(); }
  std::size_t cols() const { return value.cols(); }
};

std::pair<AShare, AShare> share(const RingMatrix& x, Prg& rng);
RingMatrix reconstruct(const AShare& a, const AShare& b);

// alpha*x + y + beta; only party A adds beta.
AShare linear(u64 alpha, const AShare& x, const AShare& y, u64 beta);
AShare add(const AShare& x, const AShare& y);
AShare sub(const AShare& x, const AShare& y);
AShare scale(const AShare& x, u64 s);
// Adds a public matrix (party A only).
AShare add_public(const AShare& x, const RingMatrix& pub);
AShare public_share(Role me, const RingMatrix& pub);
AShare zero_share(Role me, std::size_t rows, std::size_t cols, unsigned bits);

// Shares a matrix held by `owner`. The owner passes its input; the peer passes
// nullptr and the expected shape. One message from owner to peer.
AShare input_share(Session& s, Role owner, const RingMatrix* mine, std::size_t rows,
                   std::size_t cols);
// Both parties learn x.
RingMatrix open(Channel& ch, const AShare& x);

struct BeaverJob {
  const AShare* x;
  const AShare* y;
  MatrixTriple t;
};

// One round: open E = X - U and F = Y - V for every job, then combine locally.
std::vector<AShare> beaver_batch(Channel& ch, std::vector<BeaverJob> jobs);
AShare beaver_matmul(Channel& ch, const AShare& x, const AShare& y, MatrixTriple t);
AShare beaver_mul(Channel& ch, const AShare& x, const AShare& y, MatrixTriple t);

// Convenience wrappers drawing the triple from the session's store.
AShare beaver_matmul(Session& s, const AShare& x, const AShare& y);
AShare beaver_mul(Session& s, const AShare& x, const AShare& y);

AShare truncate(const AShare& x, unsigned f);

}  // namespace spkm
