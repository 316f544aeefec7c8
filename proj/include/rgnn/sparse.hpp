#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "rgnn/errors.hpp"

namespace rgnn {

// Sparsity pattern of an m x n operator in CSR form, with the transpose
// precomputed for backward passes. t_perm[k] gives, for the k-th entry of the
// transpose, its index in the forward entry order, so per-entry values can be
// carried through a transposed traversal without a second sort.
struct CsrPattern {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets;    // rows + 1
  std::vector<std::size_t> col_indices;    // nnz, sorted within each row
  std::vector<std::size_t> t_row_offsets;  // cols + 1
  std::vector<std::size_t> t_col_indices;  // nnz (row ids of the original)
  std::vector<std::size_t> t_perm;         // nnz

  std::size_t nnz() const { return col_indices.size(); }

  static CsrPattern build(std::size_t rows, std::size_t cols,
                          std::vector<std::size_t> row_offsets,
                          std::vector<std::size_t> col_indices) {
    CsrPattern p;
    p.rows = rows;
    p.cols = cols;
    p.row_offsets = std::move(row_offsets);
    p.col_indices = std::move(col_indices);
    if (p.row_offsets.size() != rows + 1)
      throw ShapeError("CsrPattern: row_offsets length mismatch");
    if (p.row_offsets.back() != p.col_indices.size())
      throw ShapeError("CsrPattern: offsets do not cover entries");

    // Transpose by counting sort over columns.
    const std::size_t nnz = p.col_indices.size();
    p.t_row_offsets.assign(cols + 1, 0);
    for (std::size_t c : p.col_indices) {
      if (c >= cols) throw IndexError("CsrPattern: column index out of range");
      ++p.t_row_offsets[c + 1];
    }
    for (std::size_t c = 0; c < cols; ++c)
      p.t_row_offsets[c + 1] += p.t_row_offsets[c];
    p.t_col_indices.resize(nnz);
    p.t_perm.resize(nnz);
    std::vector<std::size_t> cursor(p.t_row_offsets.begin(),
                                    p.t_row_offsets.end() - 1);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = p.row_offsets[r]; k < p.row_offsets[r + 1]; ++k) {
        const std::size_t c = p.col_indices[k];
        const std::size_t slot = cursor[c]++;
        p.t_col_indices[slot] = r;
        p.t_perm[slot] = k;
      }
    }
    return p;
  }
};

using CsrPatternPtr = std::shared_ptr<const CsrPattern>;

// Sparse operator with fixed (non-differentiable) entry weights aligned with
// the pattern entries, e.g. the normalized adjacency.
struct SparseOp {
  CsrPatternPtr pattern;
  std::shared_ptr<const std::vector<double>> weights;

  bool defined() const { return pattern && weights; }
};

}  // namespace rgnn
