#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spkm/fixed_point.hpp"
#include "spkm/serialize.hpp"

namespace spkm {

// Dense row-major matrix over Z_{2^bits}. Every stored word is kept reduced.
class RingMatrix {
 public:
  RingMatrix() = default;
  RingMatrix(std::size_t rows, std::size_t cols, unsigned bits = 64);
  RingMatrix(std::size_t rows, std::size_t cols, unsigned bits, std::vector<u64> data);

  static RingMatrix identity(std::size_t n, unsigned bits = 64);
  static RingMatrix filled(std::size_t rows, std::size_t cols, unsigned bits, u64 value);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  unsigned bits() const { return bits_; }
  u64 mask() const { return ring_mask(bits_); }
  bool empty() const { return data_.empty(); }

  u64 operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  void set(std::size_t r, std::size_t c, u64 v) { data_[r * cols_ + c] = v & mask(); }
  u64 operator[](std::size_t i) const { return data_[i]; }

  std::span<const u64> data() const { return data_; }
  // Callers writing through this must keep words reduced (or call reduce()).
  std::span<u64> mutable_data() { return data_; }
  void reduce();

  RingMatrix transpose() const;
  RingMatrix block(std::size_t r0, std::size_t c0, std::size_t nrows, std::size_t ncols) const;
  void set_block(std::size_t r0, std::size_t c0, const RingMatrix& m);
  RingMatrix reshaped(std::size_t rows, std::size_t cols) const;

  bool operator==(const RingMatrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  unsigned bits_ = 64;
  std::vector<u64> data_;
};

enum class MatOp { Add, Sub, Mul };

RingMatrix mat_op(const RingMatrix& a, const RingMatrix& b, MatOp op);
RingMatrix add(const RingMatrix& a, const RingMatrix& b);
RingMatrix sub(const RingMatrix& a, const RingMatrix& b);
RingMatrix matmul(const RingMatrix& a, const RingMatrix& b);
RingMatrix hadamard(const RingMatrix& a, const RingMatrix& b);
RingMatrix scale(const RingMatrix& a, u64 s);
RingMatrix neg(const RingMatrix& a);
RingMatrix add_scalar(const RingMatrix& a, u64 s);
void add_inplace(RingMatrix& a, const RingMatrix& b);
void sub_inplace(RingMatrix& a, const RingMatrix& b);

RingMatrix row_sums(const RingMatrix& a);  // rows x 1
RingMatrix col_sums(const RingMatrix& a);  // 1 x cols
// Repeat a 1 x c row vector n times.
RingMatrix repeat_rows(const RingMatrix& row, std::size_t n);
// Repeat an r x 1 column vector c times.
RingMatrix repeat_cols(const RingMatrix& col, std::size_t c);
RingMatrix hconcat(const RingMatrix& a, const RingMatrix& b);
RingMatrix vconcat(const RingMatrix& a, const RingMatrix& b);

RingMatrix encode_matrix(const std::vector<double>& values, std::size_t rows, std::size_t cols,
                         const FixedPointConfig& cfg);
std::vector<double> decode_matrix(const RingMatrix& m, const FixedPointConfig& cfg);

void write_ring_matrix(ByteWriter& w, const RingMatrix& m);
RingMatrix read_ring_matrix(ByteReader& r, unsigned bits);
std::size_t ring_matrix_wire_size(std::size_t rows, std::size_t cols, unsigned bits);

}  // namespace spkm
