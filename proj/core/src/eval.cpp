#include "dgcf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dgcf/rng.hpp"

namespace dgcf {

namespace {

bool contains_sorted(std::span<const Index> sorted, Index x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

double recall_at_k(std::span<const Index> ranked, std::span<const Index> test_items, Index k) {
  require(!test_items.empty(), "recall_at_k: empty test set");
  Index hits = 0;
  const auto limit = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < limit; ++r)
    if (contains_sorted(test_items, ranked[r])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(test_items.size());
}

double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> test_items, Index k) {
  require(!test_items.empty(), "ndcg_at_k: empty test set");
  double dcg = 0.0;
  const auto limit = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < limit; ++r)
    if (contains_sorted(test_items, ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0.0;
  const auto ideal = std::min<std::size_t>(test_items.size(), static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

std::vector<Index> top_k_items(const DenseVector& scores, std::span<const Index> excluded,
                               Index k) {
  std::vector<Index> candidates;
  candidates.reserve(static_cast<std::size_t>(scores.size()));
  for (Index i = 0; i < scores.size(); ++i)
    if (!contains_sorted(excluded, i)) candidates.push_back(i);
  const auto take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(k));
  auto better = [&](Index a, Index b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);
  candidates.resize(take);
  return candidates;
}

std::vector<Index> recommend_for_user(const DenseMatrix& combined, const InteractionMatrix& train,
                                      Index u, Index k) {
  require(combined.rows() == train.users() + train.items(),
          "recommend_for_user: embedding rows do not match the dataset");
  return top_k_items(score_all_items(combined, train.users(), u), train.row(u), k);
}

RankingMetrics evaluate_model(const DenseMatrix& combined, const DatasetSplit& split, Index k) {
  require(k >= 1, "evaluate_model: k must be >= 1");
  require(combined.rows() == split.users() + split.items(),
          "evaluate_model: embedding has " + std::to_string(combined.rows()) +
              " rows, dataset has " + std::to_string(split.users() + split.items()) + " nodes");
  RankingMetrics metrics;
  metrics.k = k;
  double recall_sum = 0.0;
  double ndcg_sum = 0.0;
  for (Index u = 0; u < split.users(); ++u) {
    const auto& test = split.test[u];
    if (test.empty()) continue;
    const auto ranked = recommend_for_user(combined, split.train, u, k);
    recall_sum += recall_at_k(ranked, test, k);
    ndcg_sum += ndcg_at_k(ranked, test, k);
    ++metrics.users_evaluated;
  }
  if (metrics.users_evaluated > 0) {
    metrics.recall = recall_sum / static_cast<double>(metrics.users_evaluated);
    metrics.ndcg = ndcg_sum / static_cast<double>(metrics.users_evaluated);
  }
  return metrics;
}

double smoothness(const DenseMatrix& block, std::uint64_t seed) {
  std::vector<Index> rows;
  DenseVector norms(block.rows());
  for (Index r = 0; r < block.rows(); ++r) {
    norms[r] = block.row(r).norm();
    if (norms[r] > 0.0) rows.push_back(r);
  }
  require(rows.size() >= 2, "smoothness: fewer than two nonzero rows");

  auto cosine = [&](Index a, Index b) {
    const double c = block.row(a).dot(block.row(b)) / (norms[a] * norms[b]);
    return std::clamp(c, -1.0, 1.0);
  };

  const auto count = static_cast<Index>(rows.size());
  double total = 0.0;
  if (count <= kExactSmoothnessRows) {
    for (Index a = 0; a < count; ++a)
      for (Index b = a + 1; b < count; ++b) total += cosine(rows[a], rows[b]);
    return total / (0.5 * static_cast<double>(count) * static_cast<double>(count - 1));
  }
  Rng rng(seed);
  for (Index p = 0; p < kSampledPairs; ++p) {
    const auto a = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(count)));
    auto b = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(count - 1)));
    if (b >= a) ++b;
    total += cosine(rows[a], rows[b]);
  }
  return total / static_cast<double>(kSampledPairs);
}

std::vector<SmoothnessReport> oversmoothing_report(const DatasetSplit& split,
                                                   const std::vector<DiagnoseConfig>& grid,
                                                   std::uint64_t seed) {
  const SparseMatrix s = bipartite_laplacian(split.train);
  const Index m = split.users();
  const Index n = split.items();
  std::vector<SmoothnessReport> reports;
  for (const auto& cfg : grid) {
    cfg.hyper.validate();
    Rng rng(seed);
    const ModelParams params = init_params(m, n, cfg.hyper, rng);
    const ForwardTrace trace = forward(params, s, cfg.hyper, m, n);
    for (std::size_t l = 0; l < trace.layers.size(); ++l) {
      const DenseMatrix& e = trace.layers[l];
      reports.push_back({cfg.model, static_cast<Index>(l), smoothness(e.topRows(m), seed),
                         smoothness(e.bottomRows(n), seed)});
    }
  }
  return reports;
}

std::string format_smoothness_tsv(const std::vector<SmoothnessReport>& reports) {
  std::string out = "model\tlayer\tuser_sim\titem_sim\n";
  for (const auto& r : reports) {
    out += r.model + "\t" + std::to_string(r.layer) + "\t" + format_double(r.user_similarity) +
           "\t" + format_double(r.item_similarity) + "\n";
  }
  return out;
}

}  // namespace dgcf
