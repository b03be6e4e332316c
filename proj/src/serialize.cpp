#include "spkm/serialize.hpp"

#include <stdexcept>

namespace spkm {

void ByteWriter::uint_le(std::uint64_t v, unsigned nbytes) {
  for (unsigned i = 0; i < nbytes; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) throw std::runtime_error("truncated input");
}

std::uint64_t ByteReader::uint_le(unsigned nbytes) {
  need(nbytes);
  std::uint64_t v = 0;
  for (unsigned i = 0; i < nbytes; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
  pos_ += nbytes;
  return v;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

}  // namespace spkm
