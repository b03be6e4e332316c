#include "spkm/arith_share.hpp"

#include <stdexcept>

#include "spkm/errors.hpp"

namespace spkm {
namespace {

void check_shape(const AShare& x, const AShare& y, const char* what) {
  if (x.rows() != y.rows() || x.cols() != y.cols() || x.value.bits() != y.value.bits()) {
    throw ShapeError(std::string(what) + ": share shape mismatch");
  }
}

std::vector<std::uint8_t> pack(const std::vector<const RingMatrix*>& ms) {
  ByteWriter w;
  for (const auto* m : ms) write_ring_matrix(w, *m);
  return w.take();
}

}  // namespace

std::pair<AShare, AShare> share(const RingMatrix& x, Prg& rng) {
  RingMatrix a = random_matrix(rng, x.rows(), x.cols(), x.bits());
  RingMatrix b = sub(x, a);
  return {AShare{Role::A, std::move(a)}, AShare{Role::B, std::move(b)}};
}

RingMatrix reconstruct(const AShare& a, const AShare& b) {
  check_shape(a, b, "reconstruct");
  return add(a.value, b.value);
}

AShare linear(u64 alpha, const AShare& x, const AShare& y, u64 beta) {
  check_shape(x, y, "linear");
  RingMatrix r = add(scale(x.value, alpha), y.value);
  if (x.owner == Role::A) r = add_scalar(r, beta);
  return AShare{x.owner, std::move(r)};
}

AShare add(const AShare& x, const AShare& y) {
  check_shape(x, y, "add");
  return AShare{x.owner, add(x.value, y.value)};
}

AShare sub(const AShare& x, const AShare& y) {
  check_shape(x, y, "sub");
  return AShare{x.owner, sub(x.value, y.value)};
}

AShare scale(const AShare& x, u64 s) { return AShare{x.owner, scale(x.value, s)}; }

AShare add_public(const AShare& x, const RingMatrix& pub) {
  if (x.owner != Role::A) return x;
  return AShare{x.owner, add(x.value, pub)};
}

AShare public_share(Role me, const RingMatrix& pub) {
  return me == Role::A ? AShare{me, pub} : AShare{me, RingMatrix(pub.rows(), pub.cols(), pub.bits())};
}

AShare zero_share(Role me, std::size_t rows, std::size_t cols, unsigned bits) {
  return AShare{me, RingMatrix(rows, cols, bits)};
}

AShare input_share(Session& s, Role owner, const RingMatrix* mine, std::size_t rows, std::size_t cols) {
  Channel& ch = s.channel();
  if (ch.role() == owner) {
    if (!mine || mine->rows() != rows || mine->cols() != cols) throw ShapeError("input_share: bad input");
    RingMatrix mask = random_matrix(s.prg(), rows, cols, s.l());
    ByteWriter w;
    write_ring_matrix(w, mask);
    ch.send_msg(MsgType::ShareOpen, w.take());
    return AShare{owner, sub(*mine, mask)};
  }
  auto payload = ch.recv_msg(MsgType::ShareOpen);
  ByteReader r(payload);
  RingMatrix m = read_ring_matrix(r, s.l());
  if (m.rows() != rows || m.cols() != cols) throw ShapeError("input_share: peer sent unexpected shape");
  return AShare{ch.role(), std::move(m)};
}

RingMatrix open(Channel& ch, const AShare& x) {
  ByteWriter w;
  write_ring_matrix(w, x.value);
  auto payload = ch.exchange(MsgType::ShareOpen, w.take());
  ByteReader r(payload);
  RingMatrix other = read_ring_matrix(r, x.value.bits());
  if (other.rows() != x.rows() || other.cols() != x.cols()) throw ShapeError("open: peer share shape differs");
  return add(x.value, other);
}

std::vector<AShare> beaver_batch(Channel& ch, std::vector<BeaverJob> jobs) {
  std::vector<RingMatrix> e_mine, f_mine;
  for (auto& j : jobs) {
    const auto& t = j.t;
    if (!t.live()) throw std::logic_error("triple already consumed");
    const bool elementwise = t.kind() == TripleKind::Elementwise;
    const bool shape_ok =
        elementwise ? (j.x->rows() == j.y->rows() && j.x->cols() == j.y->cols() &&
                       t.u().rows() == j.x->rows() && t.u().cols() == j.x->cols())
                    : (j.x->cols() == j.y->rows() && t.u().rows() == j.x->rows() &&
                       t.u().cols() == j.x->cols() && t.v().cols() == j.y->cols());
    if (!shape_ok) throw ShapeError("beaver: triple shape " + std::to_string(t.u().rows()) + "x" +
                                    std::to_string(t.u().cols()) + " does not match operands");
    j.t.take();
    e_mine.push_back(sub(j.x->value, t.u()));
    f_mine.push_back(sub(j.y->value, t.v()));
  }
  std::vector<const RingMatrix*> out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    out.push_back(&e_mine[i]);
    out.push_back(&f_mine[i]);
  }
  auto payload = ch.exchange(MsgType::ShareOpen, pack(out));
  ByteReader r(payload);
  const bool is_b = ch.role() == Role::B;
  std::vector<AShare> results;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& j = jobs[i];
    const unsigned bits = j.x->value.bits();
    RingMatrix e = add(e_mine[i], read_ring_matrix(r, bits));
    RingMatrix f = add(f_mine[i], read_ring_matrix(r, bits));
    if (e.rows() != e_mine[i].rows() || e.cols() != e_mine[i].cols()) throw ShapeError("beaver: peer shape differs");
    RingMatrix c;
    if (j.t.kind() == TripleKind::Elementwise) {
      c = add(hadamard(j.x->value, f), hadamard(e, j.y->value));
      add_inplace(c, j.t.z());
      if (is_b) sub_inplace(c, hadamard(e, f));
    } else {
      c = add(matmul(j.x->value, f), matmul(e, j.y->value));
      add_inplace(c, j.t.z());
      if (is_b) sub_inplace(c, matmul(e, f));
    }
    results.push_back(AShare{ch.role(), std::move(c)});
  }
  if (!r.done()) throw TransportError("beaver: trailing bytes in opening");
  return results;
}

AShare beaver_matmul(Channel& ch, const AShare& x, const AShare& y, MatrixTriple t) {
  if (t.kind() != TripleKind::Matrix) throw ShapeError("beaver_matmul needs a matrix triple");
  std::vector<BeaverJob> jobs;
  jobs.push_back(BeaverJob{&x, &y, std::move(t)});
  return std::move(beaver_batch(ch, std::move(jobs)).front());
}

AShare beaver_mul(Channel& ch, const AShare& x, const AShare& y, MatrixTriple t) {
  if (t.kind() != TripleKind::Elementwise) throw ShapeError("beaver_mul needs an elementwise triple");
  std::vector<BeaverJob> jobs;
  jobs.push_back(BeaverJob{&x, &y, std::move(t)});
  return std::move(beaver_batch(ch, std::move(jobs)).front());
}

AShare beaver_matmul(Session& s, const AShare& x, const AShare& y) {
  return beaver_matmul(s.channel(), x, y, s.take_matrix(x.rows(), x.cols(), y.cols()));
}

AShare beaver_mul(Session& s, const AShare& x, const AShare& y) {
  return beaver_mul(s.channel(), x, y, s.take_elementwise(x.rows(), x.cols()));
}

AShare truncate(const AShare& x, unsigned f) {
  const unsigned bits = x.value.bits();
  RingMatrix r = x.value;
  const u64 m = ring_mask(bits);
  for (auto& v : r.mutable_data()) {
    if (x.owner == Role::A) {
      v = from_signed(to_signed(v, bits) >> f, bits);
    } else {
      const i64 t = to_signed((u64{0} - v) & m, bits) >> f;
      v = (u64{0} - static_cast<u64>(t)) & m;
    }
  }
  return AShare{x.owner, std::move(r)};
}

}  // namespace spkm
