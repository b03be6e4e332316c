#include "spkm/prg.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace spkm {

struct Prg::Ctx {
  EVP_CIPHER_CTX* ctx = nullptr;
  ~Ctx() { EVP_CIPHER_CTX_free(ctx); }
};

Seed seed_from_hex(const std::string& hex) {
  if (hex.size() != 32) throw std::invalid_argument("seed must be 32 hex digits");
  Seed s{};
  for (std::size_t i = 0; i < 16; ++i) {
    s[i] = static_cast<std::uint8_t>(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
  }
  return s;
}

std::string seed_to_hex(const Seed& s) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (auto b : s) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

Seed seed_from_u64(u64 v) {
  Seed s{};
  for (int i = 0; i < 8; ++i) s[i] = static_cast<std::uint8_t>(v >> (8 * i));
  return s;
}

Prg::Prg(const Seed& seed, u64 stream) : ctx_(std::make_unique<Ctx>()) {
  ctx_->ctx = EVP_CIPHER_CTX_new();
  std::uint8_t iv[16] = {};
  for (int i = 0; i < 8; ++i) iv[i] = static_cast<std::uint8_t>(stream >> (56 - 8 * i));
  if (!ctx_->ctx || EVP_EncryptInit_ex(ctx_->ctx, EVP_aes_128_ctr(), nullptr, seed.data(), iv) != 1) {
    throw std::runtime_error("AES-CTR initialisation failed");
  }
}

Prg::~Prg() = default;
Prg::Prg(Prg&&) noexcept = default;
Prg& Prg::operator=(Prg&&) noexcept = default;

void Prg::refill() {
  static const std::array<std::uint8_t, 4096> zeros{};
  int len = 0;
  EVP_EncryptUpdate(ctx_->ctx, buf_.data(), &len, zeros.data(), static_cast<int>(zeros.size()));
  pos_ = 0;
}

void Prg::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buf_.size()) refill();
    const std::size_t n = std::min(out.size() - done, buf_.size() - pos_);
    std::memcpy(out.data() + done, buf_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

u64 Prg::next_u64() {
  std::uint8_t b[8];
  fill(b);
  u64 v = 0;
  for (int i = 0; i < 8; ++i) v |= u64{b[i]} << (8 * i);
  return v;
}

u64 Prg::uniform(u64 bound) {
  if (bound == 0) throw std::invalid_argument("uniform bound must be positive");
  const u64 limit = ~u64{0} - (~u64{0} % bound);
  u64 v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

double Prg::next_double() { return std::ldexp(static_cast<double>(next_u64() >> 11), -53); }

double Prg::gaussian() {
  double u1;
  do {
    u1 = next_double();
  } while (u1 == 0.0);
  const double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Seed Prg::derive_seed() {
  Seed s;
  fill(s);
  return s;
}

RingMatrix prg_matrix(const Seed& seed, u64 counter, std::size_t rows, std::size_t cols,
                      unsigned bits) {
  Prg prg(seed, counter);
  return random_matrix(prg, rows, cols, bits);
}

RingMatrix random_matrix(Prg& prg, std::size_t rows, std::size_t cols, unsigned bits) {
  std::vector<u64> data(rows * cols);
  prg.fill(std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(data.data()), data.size() * 8));
  return RingMatrix(rows, cols, bits, std::move(data));
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, 32> out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

}  // namespace spkm
