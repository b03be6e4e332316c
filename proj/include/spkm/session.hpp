#pragma once

#include <memory>

#include "spkm/fixed_point.hpp"
#include "spkm/prg.hpp"
#include "spkm/transport.hpp"
#include "spkm/triples.hpp"

namespace spkm {

struct HeContext;

// Per-party protocol state: the channel, private randomness, the triple
// supply and (in sparse mode) HE keys.
class Session {
 public:
  Session(Channel& ch, TripleSource* triples, FixedPointConfig fp, const Seed& seed);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  Role role() const { return ch_.role(); }
  bool is_a() const { return role() == Role::A; }
  Channel& channel() { return ch_; }
  Prg& prg() { return prg_; }
  const FixedPointConfig& fp() const { return fp_; }
  unsigned l() const { return fp_.l; }

  TripleSource* triples() { return triples_; }
  void set_triples(TripleSource* t) { triples_ = t; }

  // Pull the next record and check it against the request and the current
  // step tag; a mismatch means the budget and the protocol disagree.
  MatrixTriple take_matrix(std::size_t m, std::size_t p, std::size_t q);
  MatrixTriple take_elementwise(std::size_t rows, std::size_t cols);
  BitTriple take_bits(std::size_t count);

  HeContext* he() { return he_.get(); }
  void set_he(std::unique_ptr<HeContext> he);

 private:
  TripleRecord take(const TripleShape& want);

  Channel& ch_;
  TripleSource* triples_;
  FixedPointConfig fp_;
  Prg prg_;
  std::unique_ptr<HeContext> he_;
};

}  // namespace spkm
