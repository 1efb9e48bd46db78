#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dgcf/common.hpp"

namespace dgcf {

/// Binary user-item interaction matrix in row-compressed form.
/// Row u lists the items user u interacted with, strictly increasing.
/// Stored entries are implicitly 1.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;

  // Pairs may arrive in any order; duplicates are rejected.
  InteractionMatrix(Index users, Index items, std::vector<std::pair<Index, Index>> pairs);

  Index users() const { return users_; }
  Index items() const { return items_; }
  Index nnz() const { return static_cast<Index>(cols_.size()); }

  std::span<const Index> row(Index u) const {
    return {cols_.data() + offsets_[u], cols_.data() + offsets_[u + 1]};
  }
  Index row_size(Index u) const { return offsets_[u + 1] - offsets_[u]; }
  bool contains(Index u, Index i) const;

  const std::vector<Index>& offsets() const { return offsets_; }
  const std::vector<Index>& columns() const { return cols_; }

  friend bool operator==(const InteractionMatrix&, const InteractionMatrix&) = default;

 private:
  Index users_ = 0;
  Index items_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> cols_;
};

/// CSR matrix of doubles.
class SparseMatrix {
 public:
  struct Triplet {
    Index row;
    Index col;
    double value;
  };

  SparseMatrix() = default;
  SparseMatrix(Index rows, Index cols, std::vector<Index> offsets, std::vector<Index> indices,
               std::vector<double> values, bool symmetric = false);

  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets,
                                    bool symmetric = false);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(indices_.size()); }
  bool symmetric() const { return symmetric_; }

  const std::vector<Index>& offsets() const { return offsets_; }
  const std::vector<Index>& indices() const { return indices_; }
  const std::vector<double>& values() const { return values_; }

  // Linear search in row i; zero when absent.
  double at(Index i, Index j) const;

  DenseMatrix to_dense() const;
  SparseMatrix transpose() const;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> indices_;
  std::vector<double> values_;
  bool symmetric_ = false;
};

/// Bipartite adjacency [[0, R], [R^T, 0]] over m + n nodes.
/// Users occupy node indices [0, m), items occupy [m, m + n).
SparseMatrix build_adjacency(const InteractionMatrix& r);

/// Row sums of a square matrix.
DenseVector degree_vector(const SparseMatrix& a);

/// D^{-1/2} A D^{-1/2}. Isolated nodes (degree 0) keep all-zero rows and columns.
SparseMatrix normalize_laplacian(const SparseMatrix& a, const DenseVector& degrees);

/// Convenience: normalize_laplacian(build_adjacency(r), degree_vector(...)).
SparseMatrix bipartite_laplacian(const InteractionMatrix& r);

/// out = S * E. Each output row is accumulated in stored column order, so the
/// result does not depend on how rows are scheduled.
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& e);

// out = scale * S * E, or out += scale * S * E when accumulate is set.
void spmm_into(const SparseMatrix& s, const DenseMatrix& e, DenseMatrix& out, double scale = 1.0,
               bool accumulate = false);

}  // namespace dgcf
