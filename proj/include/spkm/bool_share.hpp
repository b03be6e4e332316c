#pragma once

#include "spkm/arith_share.hpp"
#include "spkm/bit_matrix.hpp"
#include "spkm/session.hpp"

namespace spkm {

// One party's XOR share of a bit matrix.
struct BShare {
  Role owner = Role::A;
  BitMatrix bits;

  std::size_t size() const { return bits.size(); }
};

BShare bxor(const BShare& x, const BShare& y);
// Complement; party A flips its share.
BShare bnot(const BShare& x);
BShare public_bits(Role me, const BitMatrix& b);

// Beaver AND over Z_2: one round for the whole batch.
BShare band(Channel& ch, const BShare& x, const BShare& y, BitTriple t);

// Ripple-carry bit decomposition; result has one row per element and l columns
// (column i is bit i). Costs l-1 AND layers.
BShare a2b(Session& s, const AShare& x);
// Sign bit via the carry chain only; result has the shape of x.
BShare msb(Session& s, const AShare& x);
// Single-bit conversion b_A + b_B - 2 b_A b_B; result has the shape of b.
AShare b2a(Session& s, const BShare& b);
// Arithmetic share of [x < y] (strict, two's complement).
AShare cmp(Session& s, const AShare& x, const AShare& y);
// z*(x - y) + y with z a shared 0/1 matrix.
AShare mux(Session& s, const AShare& z, const AShare& x, const AShare& y);

}  // namespace spkm
