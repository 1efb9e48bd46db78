#include "dgcf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dgcf {

InteractionMatrix::InteractionMatrix(Index users, Index items,
                                     std::vector<std::pair<Index, Index>> pairs)
    : users_(users), items_(items) {
  require(users >= 0 && items >= 0, "InteractionMatrix: negative dimension");
  std::sort(pairs.begin(), pairs.end());
  offsets_.assign(static_cast<std::size_t>(users) + 1, 0);
  cols_.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [u, i] = pairs[k];
    require(u >= 0 && u < users && i >= 0 && i < items,
            "InteractionMatrix: pair (" + std::to_string(u) + ", " + std::to_string(i) +
                ") out of range");
    require(k == 0 || pairs[k - 1] != pairs[k], "InteractionMatrix: duplicate pair");
    ++offsets_[u + 1];
    cols_.push_back(i);
  }
  for (Index u = 0; u < users; ++u) offsets_[u + 1] += offsets_[u];
}

bool InteractionMatrix::contains(Index u, Index i) const {
  const auto r = row(u);
  return std::binary_search(r.begin(), r.end(), i);
}

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Index> offsets,
                           std::vector<Index> indices, std::vector<double> values, bool symmetric)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)),
      symmetric_(symmetric) {
  require(static_cast<Index>(offsets_.size()) == rows_ + 1 && offsets_.front() == 0,
          "SparseMatrix: bad offsets length");
  require(indices_.size() == values_.size(), "SparseMatrix: indices/values length mismatch");
  require(offsets_.back() == static_cast<Index>(indices_.size()), "SparseMatrix: bad nnz");
  for (Index i = 0; i < rows_; ++i) {
    require(offsets_[i] <= offsets_[i + 1], "SparseMatrix: offsets not monotone");
    for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      require(indices_[k] >= 0 && indices_[k] < cols_, "SparseMatrix: column out of range");
      require(k == offsets_[i] || indices_[k - 1] < indices_[k],
              "SparseMatrix: columns not strictly increasing");
    }
  }
  require(!symmetric_ || rows_ == cols_, "SparseMatrix: symmetric flag on non-square matrix");
}

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols, std::vector<Triplet> triplets,
                                         bool symmetric) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<Index> indices;
  std::vector<double> values;
  indices.reserve(triplets.size());
  values.reserve(triplets.size());
  for (const auto& t : triplets) {
    require(t.row >= 0 && t.row < rows, "from_triplets: row out of range");
    if (!indices.empty() && offsets[t.row + 1] > 0 && indices.back() == t.col) {
      values.back() += t.value;  // duplicate coordinate
      continue;
    }
    ++offsets[t.row + 1];
    indices.push_back(t.col);
    values.push_back(t.value);
  }
  for (Index i = 0; i < rows; ++i) offsets[i + 1] += offsets[i];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(indices), std::move(values),
                      symmetric);
}

double SparseMatrix::at(Index i, Index j) const {
  for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k)
    if (indices_[k] == j) return values_[k];
  return 0.0;
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(rows_, cols_);
  for (Index i = 0; i < rows_; ++i)
    for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k) d(i, indices_[k]) = values_[k];
  return d;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Index> offsets(static_cast<std::size_t>(cols_) + 1, 0);
  for (Index c : indices_) ++offsets[c + 1];
  for (Index j = 0; j < cols_; ++j) offsets[j + 1] += offsets[j];
  std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
  std::vector<Index> indices(indices_.size());
  std::vector<double> values(values_.size());
  for (Index i = 0; i < rows_; ++i) {
    for (Index k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      const Index dst = cursor[indices_[k]]++;
      indices[dst] = i;
      values[dst] = values_[k];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(offsets), std::move(indices), std::move(values),
                      symmetric_);
}

SparseMatrix build_adjacency(const InteractionMatrix& r) {
  const Index m = r.users();
  const Index n = r.items();
  const Index nodes = m + n;

  // User rows: item columns shifted by m, already sorted.
  // Item rows: user columns, produced in increasing user order by the scan below.
  std::vector<Index> offsets(static_cast<std::size_t>(nodes) + 1, 0);
  for (Index u = 0; u < m; ++u) offsets[u + 1] = r.row_size(u);
  for (Index c : r.columns()) ++offsets[m + c + 1];
  for (Index v = 0; v < nodes; ++v) offsets[v + 1] += offsets[v];

  std::vector<Index> indices(static_cast<std::size_t>(2 * r.nnz()));
  std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
  for (Index u = 0; u < m; ++u) {
    for (Index i : r.row(u)) {
      indices[cursor[u]++] = m + i;
      indices[cursor[m + i]++] = u;
    }
  }
  std::vector<double> values(indices.size(), 1.0);
  return SparseMatrix(nodes, nodes, std::move(offsets), std::move(indices), std::move(values),
                      true);
}

DenseVector degree_vector(const SparseMatrix& a) {
  require(a.rows() == a.cols(), "degree_vector: matrix not square");
  DenseVector d = DenseVector::Zero(a.rows());
  const auto& off = a.offsets();
  const auto& val = a.values();
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = off[i]; k < off[i + 1]; ++k) d[i] += val[k];
  return d;
}

SparseMatrix normalize_laplacian(const SparseMatrix& a, const DenseVector& degrees) {
  require(a.rows() == a.cols() && degrees.size() == a.rows(),
          "normalize_laplacian: degree vector length mismatch");
  DenseVector inv_sqrt(degrees.size());
  for (Index i = 0; i < degrees.size(); ++i)
    inv_sqrt[i] = degrees[i] > 0.0 ? 1.0 / std::sqrt(degrees[i]) : 0.0;

  std::vector<Index> offsets;
  std::vector<Index> indices;
  std::vector<double> values;
  offsets.reserve(a.offsets().size());
  offsets.push_back(0);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = a.offsets()[i]; k < a.offsets()[i + 1]; ++k) {
      const Index j = a.indices()[k];
      const double v = a.values()[k] * inv_sqrt[i] * inv_sqrt[j];
      if (v == 0.0) continue;
      indices.push_back(j);
      values.push_back(v);
    }
    offsets.push_back(static_cast<Index>(indices.size()));
  }
  return SparseMatrix(a.rows(), a.cols(), std::move(offsets), std::move(indices),
                      std::move(values), a.symmetric());
}

SparseMatrix bipartite_laplacian(const InteractionMatrix& r) {
  const SparseMatrix a = build_adjacency(r);
  return normalize_laplacian(a, degree_vector(a));
}

void spmm_into(const SparseMatrix& s, const DenseMatrix& e, DenseMatrix& out, double scale,
               bool accumulate) {
  require(s.cols() == e.rows(), "spmm: inner dimension mismatch (" + std::to_string(s.cols()) +
                                    " vs " + std::to_string(e.rows()) + ")");
  if (!accumulate) out.setZero(s.rows(), e.cols());
  require(out.rows() == s.rows() && out.cols() == e.cols(), "spmm: output shape mismatch");
  const auto& off = s.offsets();
  const auto& idx = s.indices();
  const auto& val = s.values();
  for (Index i = 0; i < s.rows(); ++i) {
    auto row = out.row(i);
    for (Index k = off[i]; k < off[i + 1]; ++k) row.noalias() += (scale * val[k]) * e.row(idx[k]);
  }
}

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& e) {
  DenseMatrix out;
  spmm_into(s, e, out);
  return out;
}

}  // namespace dgcf
