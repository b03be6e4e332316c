#include "spkm/sparse_matrix.hpp"

#include <stdexcept>

#include "spkm/errors.hpp"

namespace spkm {

SparsePlainMatrix::SparsePlainMatrix(std::size_t rows, std::size_t cols, unsigned bits,
                                     std::vector<std::size_t> row_offsets,
                                     std::vector<std::size_t> col_indices, std::vector<u64> values)
    : rows_(rows),
      cols_(cols),
      bits_(bits),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  validate();
}

void SparsePlainMatrix::validate() const {
  if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != values_.size() || col_indices_.size() != values_.size()) {
    throw std::invalid_argument("CSR arrays inconsistent");
  }
  const u64 m = ring_mask(bits_);
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1]) throw std::invalid_argument("CSR offsets decrease");
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (col_indices_[k] >= cols_) throw std::invalid_argument("CSR column out of range");
      if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
        throw std::invalid_argument("CSR columns not strictly increasing");
      }
      if ((values_[k] & m) == 0 || values_[k] > m) throw std::invalid_argument("CSR stores a zero or unreduced value");
    }
  }
}

SparsePlainMatrix SparsePlainMatrix::from_dense(const RingMatrix& m) {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  std::vector<u64> vals;
  offsets.reserve(m.rows() + 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0) {
        cols.push_back(c);
        vals.push_back(m(r, c));
      }
    }
    offsets.push_back(vals.size());
  }
  return SparsePlainMatrix(m.rows(), m.cols(), m.bits(), std::move(offsets), std::move(cols),
                           std::move(vals));
}

RingMatrix SparsePlainMatrix::densify() const {
  RingMatrix d(rows_, cols_, bits_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) d.set(r, col_indices_[k], values_[k]);
  return d;
}

SparsePlainMatrix SparsePlainMatrix::transpose() const {
  std::vector<std::size_t> counts(cols_ + 1, 0);
  for (std::size_t c : col_indices_) ++counts[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) counts[c + 1] += counts[c];
  std::vector<std::size_t> offsets = counts;
  std::vector<std::size_t> idx(values_.size());
  std::vector<u64> vals(values_.size());
  // Rows are visited in order, so each transposed row receives increasing indices.
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const std::size_t dst = counts[col_indices_[k]]++;
      idx[dst] = r;
      vals[dst] = values_[k];
    }
  }
  return SparsePlainMatrix(cols_, rows_, bits_, std::move(offsets), std::move(idx), std::move(vals));
}

RingMatrix sparse_dense_mul(const SparsePlainMatrix& s, const RingMatrix& d) {
  if (s.cols() != d.rows() || s.bits() != d.bits()) throw ShapeError("sparse_dense_mul shape mismatch");
  const std::size_t q = d.cols();
  std::vector<u64> out(s.rows() * q, 0);
  const auto& off = s.row_offsets();
  const auto& ci = s.col_indices();
  const auto& v = s.values();
  auto dd = d.data();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    u64* row = out.data() + r * q;
    for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
      const u64* drow = dd.data() + ci[k] * q;
      for (std::size_t j = 0; j < q; ++j) row[j] += v[k] * drow[j];
    }
  }
  return RingMatrix(s.rows(), q, s.bits(), std::move(out));
}

void write_sparse_matrix(ByteWriter& w, const SparsePlainMatrix& m) {
  w.u64(m.rows());
  w.u64(m.cols());
  w.u64(m.nnz());
  for (std::size_t o : m.row_offsets()) w.u64(o);
  for (std::size_t c : m.col_indices()) w.u64(c);
  const unsigned nb = m.bits() / 8;
  for (u64 v : m.values()) w.uint_le(v, nb);
}

SparsePlainMatrix read_sparse_matrix(ByteReader& r, unsigned bits) {
  const u64 rows = r.u64();
  const u64 cols = r.u64();
  const u64 nnz = r.u64();
  if (rows + 1 + nnz > r.remaining()) throw std::runtime_error("CSR header exceeds payload");
  std::vector<std::size_t> off(rows + 1);
  for (auto& o : off) o = r.u64();
  std::vector<std::size_t> ci(nnz);
  for (auto& c : ci) c = r.u64();
  std::vector<u64> vals(nnz);
  for (auto& v : vals) v = r.uint_le(bits / 8);
  return SparsePlainMatrix(rows, cols, bits, std::move(off), std::move(ci), std::move(vals));
}

}  // namespace spkm
