#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "spkm/bit_matrix.hpp"
#include "spkm/prg.hpp"
#include "spkm/ring_matrix.hpp"
#include "spkm/transport.hpp"

namespace spkm {

enum class TripleKind : std::uint8_t { Matrix = 1, Elementwise = 2, Bit = 3 };

// Matrix: (m, p, q) with Z = U·V. Elementwise: (rows, cols, 0) with Z = U∘V,
// i.e. a batch of rows·cols 1x1 matrix triples. Bit: (count, 0, 0) AND triples.
struct TripleShape {
  TripleKind kind = TripleKind::Matrix;
  std::size_t d0 = 0, d1 = 0, d2 = 0;

  static TripleShape matrix(std::size_t m, std::size_t p, std::size_t q) { return {TripleKind::Matrix, m, p, q}; }
  static TripleShape elementwise(std::size_t r, std::size_t c) { return {TripleKind::Elementwise, r, c, 0}; }
  static TripleShape bits(std::size_t n) { return {TripleKind::Bit, n, 0, 0}; }

  bool operator==(const TripleShape&) const = default;
  std::string describe() const;
  // Serialized size of one party's record for this shape.
  std::size_t record_bytes(unsigned l) const;
};

// One party's share of an arithmetic triple. Move-only and single-use: the
// consuming primitive calls take(), and a moved-from or taken triple is spent.
class MatrixTriple {
 public:
  MatrixTriple() = default;
  MatrixTriple(TripleKind kind, RingMatrix u, RingMatrix v, RingMatrix z);
  MatrixTriple(MatrixTriple&& o) noexcept;
  MatrixTriple& operator=(MatrixTriple&& o) noexcept;
  MatrixTriple(const MatrixTriple&) = delete;
  MatrixTriple& operator=(const MatrixTriple&) = delete;

  bool live() const { return live_; }
  TripleKind kind() const { return kind_; }
  const RingMatrix& u() const { return u_; }
  const RingMatrix& v() const { return v_; }
  const RingMatrix& z() const { return z_; }
  // Marks the triple spent; throws if it was already used.
  void take();

 private:
  TripleKind kind_ = TripleKind::Matrix;
  RingMatrix u_, v_, z_;
  bool live_ = false;
};

class BitTriple {
 public:
  BitTriple() = default;
  BitTriple(BitMatrix u, BitMatrix v, BitMatrix w);
  BitTriple(BitTriple&& o) noexcept;
  BitTriple& operator=(BitTriple&& o) noexcept;
  BitTriple(const BitTriple&) = delete;
  BitTriple& operator=(const BitTriple&) = delete;

  bool live() const { return live_; }
  const BitMatrix& u() const { return u_; }
  const BitMatrix& v() const { return v_; }
  const BitMatrix& w() const { return w_; }
  void take();

 private:
  BitMatrix u_, v_, w_;
  bool live_ = false;
};

struct TripleRecord {
  TripleShape shape;
  Step step = Step::Other;
  RingMatrix u, v, z;
  BitMatrix bu, bv, bw;
};

void write_triple_record(ByteWriter& w, const TripleRecord& r);
TripleRecord read_triple_record(ByteReader& r, unsigned l);

// Sequential, consume-once supply of triple records.
class TripleSource {
 public:
  virtual ~TripleSource() = default;
  virtual TripleRecord next() = 0;
  virtual std::size_t remaining() const = 0;
  virtual unsigned ring_bits() const = 0;
  // True when records arrived from the dealer rather than over the peer channel.
  virtual bool dealer_delivered() const = 0;
  virtual const Seed& session_id() const = 0;
};

class MemoryTripleSource : public TripleSource {
 public:
  MemoryTripleSource(unsigned l, Seed session_id, std::vector<TripleRecord> records, bool from_dealer);

  TripleRecord next() override;
  std::size_t remaining() const override { return records_.size(); }
  unsigned ring_bits() const override { return l_; }
  bool dealer_delivered() const override { return from_dealer_; }
  const Seed& session_id() const override { return session_id_; }

 private:
  unsigned l_;
  Seed session_id_;
  std::deque<TripleRecord> records_;
  bool from_dealer_;
};

struct TripleStoreHeader {
  std::uint16_t version = 1;
  unsigned l = 64;
  Role role = Role::A;
  Seed session_id{};
  std::uint64_t count = 0;
};

inline constexpr std::uint16_t kTripleStoreVersion = 1;

// Streams records from a store file; records are read once, in order.
class FileTripleSource : public TripleSource {
 public:
  explicit FileTripleSource(const std::string& path);

  TripleRecord next() override;
  std::size_t remaining() const override { return header_.count - consumed_; }
  unsigned ring_bits() const override { return header_.l; }
  bool dealer_delivered() const override { return true; }
  const Seed& session_id() const override { return header_.session_id; }
  const TripleStoreHeader& header() const { return header_; }

 private:
  std::ifstream in_;
  TripleStoreHeader header_;
  std::uint64_t consumed_ = 0;
};

class TripleStoreWriter {
 public:
  TripleStoreWriter(const std::string& path, const TripleStoreHeader& header);
  void append(const TripleRecord& r);
  void finish();

 private:
  std::ofstream out_;
  std::string path_;
  std::uint64_t expected_;
  std::uint64_t written_ = 0;
};

void write_store_header(ByteWriter& w, const TripleStoreHeader& h);

}  // namespace spkm
