#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "spkm/ring_matrix.hpp"

namespace spkm {

using Seed = std::array<std::uint8_t, 16>;

Seed seed_from_hex(const std::string& hex);
std::string seed_to_hex(const Seed& s);
Seed seed_from_u64(u64 v);

// AES-128 in counter mode, keyed by the seed. The stream id selects the
// upper half of the initial counter block so independent streams never overlap.
class Prg {
 public:
  explicit Prg(const Seed& seed, u64 stream = 0);
  ~Prg();
  Prg(Prg&&) noexcept;
  Prg& operator=(Prg&&) noexcept;
  Prg(const Prg&) = delete;
  Prg& operator=(const Prg&) = delete;

  void fill(std::span<std::uint8_t> out);
  u64 next_u64();
  // Uniform in [0, bound) by rejection.
  u64 uniform(u64 bound);
  // Uniform double in [0, 1) with 53 random bits.
  double next_double();
  double gaussian();
  Seed derive_seed();

 private:
  void refill();

  struct Ctx;
  std::unique_ptr<Ctx> ctx_;
  std::array<std::uint8_t, 4096> buf_{};
  std::size_t pos_ = 4096;
};

RingMatrix prg_matrix(const Seed& seed, u64 counter, std::size_t rows, std::size_t cols,
                      unsigned bits = 64);
RingMatrix random_matrix(Prg& prg, std::size_t rows, std::size_t cols, unsigned bits = 64);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

}  // namespace spkm
