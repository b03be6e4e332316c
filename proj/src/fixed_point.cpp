#include "spkm/fixed_point.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spkm {

void FixedPointConfig::validate() const {
  if (l != 8 && l != 16 && l != 32 && l != 64) {
    throw std::invalid_argument("ring width must be 8, 16, 32 or 64, got " + std::to_string(l));
  }
  if (f == 0 || f >= l) throw std::invalid_argument("fractional bits must satisfy 0 < f < l");
}

u64 FixedPointConfig::mask() const { return ring_mask(l); }

u64 ring_mask(unsigned bits) { return bits >= 64 ? ~u64{0} : ((u64{1} << bits) - 1); }

i64 to_signed(u64 v, unsigned bits) {
  if (bits >= 64) return static_cast<i64>(v);
  const u64 sign = u64{1} << (bits - 1);
  v &= ring_mask(bits);
  return (v & sign) ? static_cast<i64>(v) - static_cast<i64>(u64{1} << bits) : static_cast<i64>(v);
}

u64 from_signed(i64 v, unsigned bits) { return static_cast<u64>(v) & ring_mask(bits); }

u64 encode_fixed(double x, const FixedPointConfig& cfg) {
  const double limit = std::ldexp(1.0, static_cast<int>(cfg.l - cfg.f - 1));
  if (!(std::fabs(x) < limit)) {
    throw std::overflow_error("fixed-point overflow encoding " + std::to_string(x));
  }
  return from_signed(std::llround(std::ldexp(x, static_cast<int>(cfg.f))), cfg.l);
}

double decode_fixed(u64 e, const FixedPointConfig& cfg) {
  return decode_fixed_scaled(e, cfg, cfg.f);
}

double decode_fixed_scaled(u64 e, const FixedPointConfig& cfg, unsigned frac_bits) {
  return std::ldexp(static_cast<double>(to_signed(e, cfg.l)), -static_cast<int>(frac_bits));
}

}  // namespace spkm
