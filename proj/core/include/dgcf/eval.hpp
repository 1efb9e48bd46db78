#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgcf/common.hpp"
#include "dgcf/dataset.hpp"
#include "dgcf/model.hpp"

namespace dgcf {

struct RankingMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  Index k = 20;
  Index users_evaluated = 0;
};

// test_items must be sorted ascending and non-empty.
double recall_at_k(std::span<const Index> ranked, std::span<const Index> test_items, Index k);
double ndcg_at_k(std::span<const Index> ranked, std::span<const Index> test_items, Index k);

/// Top-k items by descending score, ties by ascending index, skipping the
/// excluded (sorted) items.
std::vector<Index> top_k_items(const DenseVector& scores, std::span<const Index> excluded, Index k);

/// Ranks every item for user u from E*, excluding the user's training items.
std::vector<Index> recommend_for_user(const DenseMatrix& combined, const InteractionMatrix& train,
                                      Index u, Index k);

/// Full-ranking evaluation with train exclusion over users with a non-empty
/// test list.
RankingMetrics evaluate_model(const DenseMatrix& combined, const DatasetSplit& split, Index k = 20);

/// Mean cosine similarity over unordered pairs of nonzero rows. Exact up to
/// kExactSmoothnessRows rows; above that, kSampledPairs pairs drawn from
/// Rng(seed). Throws std::invalid_argument with fewer than two nonzero rows.
double smoothness(const DenseMatrix& block, std::uint64_t seed = 0);

inline constexpr Index kExactSmoothnessRows = 2000;
inline constexpr Index kSampledPairs = 200000;

struct SmoothnessReport {
  std::string model;
  Index layer = 0;
  double user_similarity = 0.0;
  double item_similarity = 0.0;
};

struct DiagnoseConfig {
  std::string model;  // tag written to the report
  Hyperparams hyper;  // alpha, beta, activation, mode and depth of this run
};

/// Runs forward from one shared initialization for every configuration and
/// records per-layer smoothness of the user and item blocks.
std::vector<SmoothnessReport> oversmoothing_report(const DatasetSplit& split,
                                                   const std::vector<DiagnoseConfig>& grid,
                                                   std::uint64_t seed);

// "model\tlayer\tuser_sim\titem_sim" header plus one row per report.
std::string format_smoothness_tsv(const std::vector<SmoothnessReport>& reports);

}  // namespace dgcf
