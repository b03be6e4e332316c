#pragma once

#include <cstddef>
#include <vector>

#include "spkm/ring_matrix.hpp"

namespace spkm {

// CSR matrix of ring elements. Column indices strictly increase within a row
// and no stored value is zero.
class SparsePlainMatrix {
 public:
  SparsePlainMatrix() = default;
  SparsePlainMatrix(std::size_t rows, std::size_t cols, unsigned bits,
                    std::vector<std::size_t> row_offsets, std::vector<std::size_t> col_indices,
                    std::vector<u64> values);

  static SparsePlainMatrix from_dense(const RingMatrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  unsigned bits() const { return bits_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return col_indices_; }
  const std::vector<u64>& values() const { return values_; }

  RingMatrix densify() const;
  SparsePlainMatrix transpose() const;

 private:
  void validate() const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  unsigned bits_ = 64;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<u64> values_;
};

RingMatrix sparse_dense_mul(const SparsePlainMatrix& s, const RingMatrix& d);

void write_sparse_matrix(ByteWriter& w, const SparsePlainMatrix& m);
SparsePlainMatrix read_sparse_matrix(ByteReader& r, unsigned bits);

}  // namespace spkm
