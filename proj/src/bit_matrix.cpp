#include "spkm/bit_matrix.hpp"

#include "spkm/errors.hpp"

namespace spkm {

void BitMatrix::trim() {
  const std::size_t n = size();
  if (n % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (n % 64)) - 1;
}

BitMatrix& BitMatrix::operator^=(const BitMatrix& o) {
  if (o.size() != size()) throw ShapeError("bit xor: size mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= o.words_[i];
  return *this;
}

BitMatrix& BitMatrix::operator&=(const BitMatrix& o) {
  if (o.size() != size()) throw ShapeError("bit and: size mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
  return *this;
}

BitMatrix operator^(BitMatrix a, const BitMatrix& b) { return a ^= b; }
BitMatrix operator&(BitMatrix a, const BitMatrix& b) { return a &= b; }

std::size_t bits_wire_size(std::size_t nbits) { return (nbits + 7) / 8; }

void write_bits(ByteWriter& w, const BitMatrix& m) {
  const std::size_t nbytes = bits_wire_size(m.size());
  for (std::size_t i = 0; i < nbytes; ++i) {
    w.u8(static_cast<std::uint8_t>(m.words()[i / 8] >> (8 * (i % 8))));
  }
}

void read_bits_into(ByteReader& r, BitMatrix& m) {
  const std::size_t nbytes = bits_wire_size(m.size());
  auto bytes = r.bytes(nbytes);
  auto& words = m.words();
  std::fill(words.begin(), words.end(), 0);
  for (std::size_t i = 0; i < nbytes; ++i) words[i / 8] |= std::uint64_t{bytes[i]} << (8 * (i % 8));
  m.trim();
}

}  // namespace spkm
