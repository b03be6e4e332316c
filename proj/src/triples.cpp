#include "spkm/triples.hpp"

#include <iostream>
#include <stdexcept>

#include "spkm/errors.hpp"

namespace spkm {

std::string TripleShape::describe() const {
  switch (kind) {
    case TripleKind::Matrix:
      return "matrix(" + std::to_string(d0) + "x" + std::to_string(d1) + " * " + std::to_string(d1) +
             "x" + std::to_string(d2) + ")";
    case TripleKind::Elementwise:
      return "elementwise(" + std::to_string(d0) + "x" + std::to_string(d1) + ")";
    case TripleKind::Bit:
      return "bits(" + std::to_string(d0) + ")";
  }
  return "unknown";
}

std::size_t TripleShape::record_bytes(unsigned l) const {
  const std::size_t header = 2 + 3 * 8;
  switch (kind) {
    case TripleKind::Matrix:
      return header + ring_matrix_wire_size(d0, d1, l) + ring_matrix_wire_size(d1, d2, l) +
             ring_matrix_wire_size(d0, d2, l);
    case TripleKind::Elementwise:
      return header + 3 * ring_matrix_wire_size(d0, d1, l);
    case TripleKind::Bit:
      return header + 3 * bits_wire_size(d0);
  }
  return header;
}

MatrixTriple::MatrixTriple(TripleKind kind, RingMatrix u, RingMatrix v, RingMatrix z)
    : kind_(kind), u_(std::move(u)), v_(std::move(v)), z_(std::move(z)), live_(true) {
  const bool ok = kind == TripleKind::Matrix
                      ? (u_.cols() == v_.rows() && z_.rows() == u_.rows() && z_.cols() == v_.cols())
                      : (u_.rows() == v_.rows() && u_.cols() == v_.cols() && z_.rows() == u_.rows() &&
                         z_.cols() == u_.cols());
  if (!ok || kind == TripleKind::Bit) throw ShapeError("inconsistent triple shapes");
}

MatrixTriple::MatrixTriple(MatrixTriple&& o) noexcept
    : kind_(o.kind_), u_(std::move(o.u_)), v_(std::move(o.v_)), z_(std::move(o.z_)), live_(o.live_) {
  o.live_ = false;
}

MatrixTriple& MatrixTriple::operator=(MatrixTriple&& o) noexcept {
  kind_ = o.kind_;
  u_ = std::move(o.u_);
  v_ = std::move(o.v_);
  z_ = std::move(o.z_);
  live_ = o.live_;
  o.live_ = false;
  return *this;
}

void MatrixTriple::take() {
  if (!live_) throw std::logic_error("triple already consumed");
  live_ = false;
}

BitTriple::BitTriple(BitMatrix u, BitMatrix v, BitMatrix w)
    : u_(std::move(u)), v_(std::move(v)), w_(std::move(w)), live_(true) {
  if (u_.size() != v_.size() || u_.size() != w_.size()) throw ShapeError("inconsistent bit triple");
}

BitTriple::BitTriple(BitTriple&& o) noexcept
    : u_(std::move(o.u_)), v_(std::move(o.v_)), w_(std::move(o.w_)), live_(o.live_) {
  o.live_ = false;
}

BitTriple& BitTriple::operator=(BitTriple&& o) noexcept {
  u_ = std::move(o.u_);
  v_ = std::move(o.v_);
  w_ = std::move(o.w_);
  live_ = o.live_;
  o.live_ = false;
  return *this;
}

void BitTriple::take() {
  if (!live_) throw std::logic_error("bit triple already consumed");
  live_ = false;
}

void write_triple_record(ByteWriter& w, const TripleRecord& r) {
  w.u8(static_cast<std::uint8_t>(r.shape.kind));
  w.u8(static_cast<std::uint8_t>(r.step));
  w.u64(r.shape.d0);
  w.u64(r.shape.d1);
  w.u64(r.shape.d2);
  if (r.shape.kind == TripleKind::Bit) {
    write_bits(w, r.bu);
    write_bits(w, r.bv);
    write_bits(w, r.bw);
  } else {
    write_ring_matrix(w, r.u);
    write_ring_matrix(w, r.v);
    write_ring_matrix(w, r.z);
  }
}

TripleRecord read_triple_record(ByteReader& in, unsigned l) {
  TripleRecord r;
  const auto kind = in.u8();
  const auto step = in.u8();
  if (kind < 1 || kind > 3 || step > 3) throw std::runtime_error("corrupt triple record header");
  r.shape.kind = static_cast<TripleKind>(kind);
  r.step = static_cast<Step>(step);
  r.shape.d0 = in.u64();
  r.shape.d1 = in.u64();
  r.shape.d2 = in.u64();
  if (r.shape.kind == TripleKind::Bit) {
    r.bu = BitMatrix(r.shape.d0, 1);
    r.bv = BitMatrix(r.shape.d0, 1);
    r.bw = BitMatrix(r.shape.d0, 1);
    read_bits_into(in, r.bu);
    read_bits_into(in, r.bv);
    read_bits_into(in, r.bw);
  } else {
    r.u = read_ring_matrix(in, l);
    r.v = read_ring_matrix(in, l);
    r.z = read_ring_matrix(in, l);
  }
  return r;
}

MemoryTripleSource::MemoryTripleSource(unsigned l, Seed session_id, std::vector<TripleRecord> records,
                                       bool from_dealer)
    : l_(l),
      session_id_(session_id),
      records_(std::make_move_iterator(records.begin()), std::make_move_iterator(records.end())),
      from_dealer_(from_dealer) {}

TripleRecord MemoryTripleSource::next() {
  if (records_.empty()) throw TripleShortfall("triple store exhausted");
  TripleRecord r = std::move(records_.front());
  records_.pop_front();
  return r;
}

void write_store_header(ByteWriter& w, const TripleStoreHeader& h) {
  for (char c : std::string("MKTS")) w.u8(static_cast<std::uint8_t>(c));
  w.u16(h.version);
  w.u8(static_cast<std::uint8_t>(h.l));
  w.u8(static_cast<std::uint8_t>(h.role));
  w.bytes(h.session_id);
  w.u64(h.count);
}

FileTripleSource::FileTripleSource(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw std::runtime_error("cannot open triple store " + path);
  std::vector<std::uint8_t> raw(4 + 2 + 1 + 1 + 16 + 8);
  in_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in_ || std::string(raw.begin(), raw.begin() + 4) != "MKTS") {
    throw std::runtime_error(path + " is not a triple store");
  }
  ByteReader r(std::span<const std::uint8_t>(raw).subspan(4));
  header_.version = r.u16();
  if (header_.version != kTripleStoreVersion) throw std::runtime_error("unsupported triple store version");
  header_.l = r.u8();
  header_.role = static_cast<Role>(r.u8());
  auto sid = r.bytes(16);
  std::copy(sid.begin(), sid.end(), header_.session_id.begin());
  header_.count = r.u64();
}

TripleRecord FileTripleSource::next() {
  if (consumed_ >= header_.count) throw TripleShortfall("triple store exhausted");
  std::vector<std::uint8_t> head(26);
  in_.read(reinterpret_cast<char*>(head.data()), 26);
  if (!in_) throw std::runtime_error("triple store truncated");
  ByteReader hr(head);
  TripleShape shape;
  const auto kind = hr.u8();
  hr.u8();
  if (kind < 1 || kind > 3) throw std::runtime_error("corrupt triple record header");
  shape.kind = static_cast<TripleKind>(kind);
  shape.d0 = hr.u64();
  shape.d1 = hr.u64();
  shape.d2 = hr.u64();
  const std::size_t total = shape.record_bytes(header_.l);
  head.resize(total);
  in_.read(reinterpret_cast<char*>(head.data() + 26), static_cast<std::streamsize>(total - 26));
  if (!in_) throw std::runtime_error("triple store truncated");
  ByteReader rr(head);
  ++consumed_;
  return read_triple_record(rr, header_.l);
}

TripleStoreWriter::TripleStoreWriter(const std::string& path, const TripleStoreHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), expected_(header.count) {
  if (!out_) throw std::runtime_error("cannot create triple store " + path);
  ByteWriter w;
  write_store_header(w, header);
  out_.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.size()));
}

void TripleStoreWriter::append(const TripleRecord& r) {
  ByteWriter w;
  write_triple_record(w, r);
  out_.write(reinterpret_cast<const char*>(w.buffer().data()), static_cast<std::streamsize>(w.size()));
  if (!out_) throw std::runtime_error("write failed for " + path_);
  ++written_;
}

void TripleStoreWriter::finish() {
  if (written_ != expected_) throw std::logic_error("triple store record count does not match header");
  out_.flush();
  if (!out_) throw std::runtime_error("write failed for " + path_);
  out_.close();
}

}  // namespace spkm
