#include "spkm/bool_share.hpp"

#include "spkm/errors.hpp"

namespace spkm {
namespace {

// Bit `i` of every element of a ring matrix, same shape.
BitMatrix bit_plane(const RingMatrix& m, unsigned i) {
  BitMatrix b(m.rows(), m.cols());
  auto& words = b.words();
  auto d = m.data();
  for (std::size_t k = 0; k < d.size(); ++k) words[k >> 6] |= ((d[k] >> i) & 1) << (k & 63);
  return b;
}

struct CarryChain {
  BitMatrix carry;               // share of the carry into the current bit
  std::vector<BitMatrix> sums;   // sum-bit shares, filled only for a2b
};

// Runs the carry chain up to bit l-1 on the parties' own shares.
CarryChain ripple(Session& s, const AShare& x, bool keep_sums) {
  const unsigned l = x.value.bits();
  const std::size_t n = x.value.size();
  Channel& ch = s.channel();
  const bool is_a = ch.role() == Role::A;
  CarryChain out{BitMatrix(x.rows(), x.cols()), {}};
  for (unsigned i = 0; i + 1 < l; ++i) {
    const BitMatrix mine = bit_plane(x.value, i);
    if (keep_sums) out.sums.push_back(mine ^ out.carry);
    BShare xs{ch.role(), is_a ? (mine ^ out.carry) : out.carry};
    BShare ys{ch.role(), is_a ? out.carry : (mine ^ out.carry)};
    const BShare g = band(ch, xs, ys, s.take_bits(n));
    out.carry ^= g.bits;
  }
  return out;
}

}  // namespace

BShare bxor(const BShare& x, const BShare& y) { return BShare{x.owner, x.bits ^ y.bits}; }

BShare bnot(const BShare& x) {
  if (x.owner != Role::A) return x;
  BShare r = x;
  for (auto& w : r.bits.words()) w = ~w;
  r.bits.trim();
  return r;
}

BShare public_bits(Role me, const BitMatrix& b) {
  return me == Role::A ? BShare{me, b} : BShare{me, BitMatrix(b.rows(), b.cols())};
}

BShare band(Channel& ch, const BShare& x, const BShare& y, BitTriple t) {
  if (x.size() != y.size() || t.u().size() != x.size()) throw ShapeError("band: size mismatch");
  t.take();
  const BitMatrix d_mine = x.bits ^ t.u();
  const BitMatrix e_mine = y.bits ^ t.v();
  ByteWriter w;
  write_bits(w, d_mine);
  write_bits(w, e_mine);
  auto payload = ch.exchange(MsgType::ShareOpen, w.take());
  ByteReader r(payload);
  BitMatrix d(x.bits.rows(), x.bits.cols()), e(x.bits.rows(), x.bits.cols());
  read_bits_into(r, d);
  read_bits_into(r, e);
  d ^= d_mine;
  e ^= e_mine;
  BitMatrix z = t.w() ^ (d & t.v()) ^ (e & t.u());
  if (ch.role() == Role::A) z ^= (d & e);
  BitMatrix shaped(x.bits.rows(), x.bits.cols());
  shaped.words() = std::move(z.words());
  return BShare{ch.role(), std::move(shaped)};
}

BShare a2b(Session& s, const AShare& x) {
  const unsigned l = x.value.bits();
  CarryChain c = ripple(s, x, true);
  c.sums.push_back(bit_plane(x.value, l - 1) ^ c.carry);
  BitMatrix out(x.value.size(), l);
  for (unsigned i = 0; i < l; ++i)
    for (std::size_t k = 0; k < x.value.size(); ++k) out.set(k, i, c.sums[i].get(k));
  return BShare{s.role(), std::move(out)};
}

BShare msb(Session& s, const AShare& x) {
  CarryChain c = ripple(s, x, false);
  return BShare{s.role(), bit_plane(x.value, x.value.bits() - 1) ^ c.carry};
}

AShare b2a(Session& s, const BShare& b) {
  const std::size_t rows = b.bits.rows(), cols = b.bits.cols();
  RingMatrix mine(rows, cols, s.l());
  for (std::size_t k = 0; k < b.size(); ++k) mine.mutable_data()[k] = b.bits.get(k);
  const Role me = s.role();
  const AShare zero = zero_share(me, rows, cols, s.l());
  const AShare own{me, mine};
  const AShare prod = me == Role::A ? beaver_mul(s, own, zero) : beaver_mul(s, zero, own);
  return AShare{me, sub(mine, scale(prod.value, 2))};
}

AShare cmp(Session& s, const AShare& x, const AShare& y) { return b2a(s, msb(s, sub(x, y))); }

AShare mux(Session& s, const AShare& z, const AShare& x, const AShare& y) {
  return add(beaver_mul(s, z, sub(x, y)), y);
}

}  // namespace spkm
