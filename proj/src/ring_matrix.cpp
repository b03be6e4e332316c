#include "spkm/ring_matrix.hpp"

#include <stdexcept>
#include <string>

#include "spkm/errors.hpp"

namespace spkm {
namespace {

void check_same_shape(const RingMatrix& a, const RingMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.bits() != b.bits()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

RingMatrix::RingMatrix(std::size_t rows, std::size_t cols, unsigned bits)
    : rows_(rows), cols_(cols), bits_(bits), data_(rows * cols, 0) {}

RingMatrix::RingMatrix(std::size_t rows, std::size_t cols, unsigned bits, std::vector<u64> data)
    : rows_(rows), cols_(cols), bits_(bits), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ShapeError("RingMatrix: data length != rows*cols");
  reduce();
}

RingMatrix RingMatrix::identity(std::size_t n, unsigned bits) {
  RingMatrix m(n, n, bits);
  for (std::size_t i = 0; i < n; ++i) m.data_[i * n + i] = 1;
  return m;
}

RingMatrix RingMatrix::filled(std::size_t rows, std::size_t cols, unsigned bits, u64 value) {
  return RingMatrix(rows, cols, bits, std::vector<u64>(rows * cols, value));
}

void RingMatrix::reduce() {
  if (bits_ >= 64) return;
  const u64 m = mask();
  for (auto& v : data_) v &= m;
}

RingMatrix RingMatrix::transpose() const {
  RingMatrix t(cols_, rows_, bits_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t.data_[c * rows_ + r] = data_[r * cols_ + c];
  return t;
}

RingMatrix RingMatrix::block(std::size_t r0, std::size_t c0, std::size_t nrows,
                             std::size_t ncols) const {
  if (r0 + nrows > rows_ || c0 + ncols > cols_) throw ShapeError("block out of range");
  RingMatrix b(nrows, ncols, bits_);
  for (std::size_t r = 0; r < nrows; ++r)
    for (std::size_t c = 0; c < ncols; ++c) b.data_[r * ncols + c] = data_[(r0 + r) * cols_ + c0 + c];
  return b;
}

void RingMatrix::set_block(std::size_t r0, std::size_t c0, const RingMatrix& m) {
  if (r0 + m.rows_ > rows_ || c0 + m.cols_ > cols_ || m.bits_ != bits_) {
    throw ShapeError("set_block out of range");
  }
  for (std::size_t r = 0; r < m.rows_; ++r)
    for (std::size_t c = 0; c < m.cols_; ++c) data_[(r0 + r) * cols_ + c0 + c] = m.data_[r * m.cols_ + c];
}

RingMatrix RingMatrix::reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) throw ShapeError("reshape changes element count");
  return RingMatrix(rows, cols, bits_, data_);
}

RingMatrix mat_op(const RingMatrix& a, const RingMatrix& b, MatOp op) {
  switch (op) {
    case MatOp::Add: return add(a, b);
    case MatOp::Sub: return sub(a, b);
    case MatOp::Mul: return matmul(a, b);
  }
  throw std::invalid_argument("unknown MatOp");
}

RingMatrix add(const RingMatrix& a, const RingMatrix& b) {
  RingMatrix r = a;
  add_inplace(r, b);
  return r;
}

RingMatrix sub(const RingMatrix& a, const RingMatrix& b) {
  RingMatrix r = a;
  sub_inplace(r, b);
  return r;
}

void add_inplace(RingMatrix& a, const RingMatrix& b) {
  check_same_shape(a, b, "add");
  auto d = a.mutable_data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  a.reduce();
}

void sub_inplace(RingMatrix& a, const RingMatrix& b) {
  check_same_shape(a, b, "sub");
  auto d = a.mutable_data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s[i];
  a.reduce();
}

RingMatrix matmul(const RingMatrix& a, const RingMatrix& b) {
  if (a.cols() != b.rows() || a.bits() != b.bits()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
  std::vector<u64> out(m * q, 0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    u64* row = out.data() + i * q;
    for (std::size_t k = 0; k < p; ++k) {
      const u64 x = ad[i * p + k];
      if (x == 0) continue;
      const u64* brow = bd.data() + k * q;
      for (std::size_t j = 0; j < q; ++j) row[j] += x * brow[j];
    }
  }
  return RingMatrix(m, q, a.bits(), std::move(out));
}

RingMatrix hadamard(const RingMatrix& a, const RingMatrix& b) {
  check_same_shape(a, b, "hadamard");
  RingMatrix r = a;
  auto d = r.mutable_data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= s[i];
  r.reduce();
  return r;
}

RingMatrix scale(const RingMatrix& a, u64 s) {
  RingMatrix r = a;
  for (auto& v : r.mutable_data()) v *= s;
  r.reduce();
  return r;
}

RingMatrix neg(const RingMatrix& a) {
  RingMatrix r = a;
  for (auto& v : r.mutable_data()) v = u64{0} - v;
  r.reduce();
  return r;
}

RingMatrix add_scalar(const RingMatrix& a, u64 s) {
  RingMatrix r = a;
  for (auto& v : r.mutable_data()) v += s;
  r.reduce();
  return r;
}

RingMatrix row_sums(const RingMatrix& a) {
  RingMatrix r(a.rows(), 1, a.bits());
  auto d = r.mutable_data();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d[i] += a(i, j);
  r.reduce();
  return r;
}

RingMatrix col_sums(const RingMatrix& a) {
  RingMatrix r(1, a.cols(), a.bits());
  auto d = r.mutable_data();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d[j] += a(i, j);
  r.reduce();
  return r;
}

RingMatrix repeat_rows(const RingMatrix& row, std::size_t n) {
  if (row.rows() != 1) throw ShapeError("repeat_rows expects a row vector");
  RingMatrix r(n, row.cols(), row.bits());
  for (std::size_t i = 0; i < n; ++i) r.set_block(i, 0, row);
  return r;
}

RingMatrix repeat_cols(const RingMatrix& col, std::size_t c) {
  if (col.cols() != 1) throw ShapeError("repeat_cols expects a column vector");
  RingMatrix r(col.rows(), c, col.bits());
  auto d = r.mutable_data();
  for (std::size_t i = 0; i < col.rows(); ++i)
    for (std::size_t j = 0; j < c; ++j) d[i * c + j] = col[i];
  return r;
}

RingMatrix hconcat(const RingMatrix& a, const RingMatrix& b) {
  if (a.rows() != b.rows() || a.bits() != b.bits()) throw ShapeError("hconcat row mismatch");
  RingMatrix r(a.rows(), a.cols() + b.cols(), a.bits());
  r.set_block(0, 0, a);
  r.set_block(0, a.cols(), b);
  return r;
}

RingMatrix vconcat(const RingMatrix& a, const RingMatrix& b) {
  if (a.cols() != b.cols() || a.bits() != b.bits()) throw ShapeError("vconcat column mismatch");
  RingMatrix r(a.rows() + b.rows(), a.cols(), a.bits());
  r.set_block(0, 0, a);
  r.set_block(a.rows(), 0, b);
  return r;
}

RingMatrix encode_matrix(const std::vector<double>& values, std::size_t rows, std::size_t cols,
                         const FixedPointConfig& cfg) {
  if (values.size() != rows * cols) throw ShapeError("encode_matrix: value count mismatch");
  std::vector<u64> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = encode_fixed(values[i], cfg);
  return RingMatrix(rows, cols, cfg.l, std::move(out));
}

std::vector<double> decode_matrix(const RingMatrix& m, const FixedPointConfig& cfg) {
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = decode_fixed(m[i], cfg);
  return out;
}

void write_ring_matrix(ByteWriter& w, const RingMatrix& m) {
  w.u64(m.rows());
  w.u64(m.cols());
  const unsigned nb = m.bits() / 8;
  w.buffer().reserve(w.size() + m.size() * nb);
  for (u64 v : m.data()) w.uint_le(v, nb);
}

RingMatrix read_ring_matrix(ByteReader& r, unsigned bits) {
  const u64 rows = r.u64();
  const u64 cols = r.u64();
  const unsigned nb = bits / 8;
  if (cols != 0 && rows > r.remaining() / nb / cols + 1) throw std::runtime_error("RingMatrix header exceeds payload");
  std::vector<u64> data(rows * cols);
  for (auto& v : data) v = r.uint_le(nb);
  return RingMatrix(rows, cols, bits, std::move(data));
}

std::size_t ring_matrix_wire_size(std::size_t rows, std::size_t cols, unsigned bits) {
  return 16 + rows * cols * (bits / 8);
}

}  // namespace spkm
