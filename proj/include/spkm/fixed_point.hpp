#pragma once

#include <cstdint>

namespace spkm {

using u64 = std::uint64_t;
using i64 = std::int64_t;

struct FixedPointConfig {
  unsigned l = 64;
  unsigned f = 20;

  void validate() const;
  u64 mask() const;
};

u64 ring_mask(unsigned bits);

// Two's-complement view of an l-bit word.
i64 to_signed(u64 v, unsigned bits);
u64 from_signed(i64 v, unsigned bits);

// round(x * 2^f) mod 2^l; throws std::overflow_error if |x| >= 2^(l-f-1).
u64 encode_fixed(double x, const FixedPointConfig& cfg);
double decode_fixed(u64 e, const FixedPointConfig& cfg);
// Decode a product that still carries 2f fractional bits.
double decode_fixed_scaled(u64 e, const FixedPointConfig& cfg, unsigned frac_bits);

}  // namespace spkm
