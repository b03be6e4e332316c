#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spkm/serialize.hpp"

namespace spkm {

// Packed bits, row-major; bit (r, c) lives at index r*cols + c, 64 per word,
// least significant bit first.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), words_((rows * cols + 63) / 64, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return rows_ * cols_; }

  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  bool get(std::size_t r, std::size_t c) const { return get(r * cols_ + c); }
  void set(std::size_t i, bool v) {
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    words_[i >> 6] = v ? (words_[i >> 6] | bit) : (words_[i >> 6] & ~bit);
  }
  void set(std::size_t r, std::size_t c, bool v) { set(r * cols_ + c, v); }

  std::vector<std::uint64_t>& words() { return words_; }
  const std::vector<std::uint64_t>& words() const { return words_; }
  // Clears padding bits beyond size() in the last word.
  void trim();

  BitMatrix& operator^=(const BitMatrix& o);
  BitMatrix& operator&=(const BitMatrix& o);
  bool operator==(const BitMatrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> words_;
};

BitMatrix operator^(BitMatrix a, const BitMatrix& b);
BitMatrix operator&(BitMatrix a, const BitMatrix& b);

// Wire form: ceil(size/8) bytes, 8 bits per byte, little-endian bit order.
void write_bits(ByteWriter& w, const BitMatrix& m);
void read_bits_into(ByteReader& r, BitMatrix& m);
std::size_t bits_wire_size(std::size_t nbits);

}  // namespace spkm
