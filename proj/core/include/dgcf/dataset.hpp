#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dgcf/common.hpp"
#include "dgcf/graph.hpp"
#include "dgcf/rng.hpp"

namespace dgcf {

enum class InputFormat { EdgePairs, AdjacencyList };

InputFormat parse_input_format(const std::string& name);

/// User-item pairs keyed by the original identifiers, in first-seen order.
struct RawInteractions {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string source_path;
};

/// Reads an interaction corpus.
///   edge-pairs:     "user<TAB>item" per line
///   adjacency-list: "user item item ..." per line, space separated
/// Blank lines are skipped and repeated pairs are dropped. Throws UserError
/// naming the line number on malformed input, or when no pair is found.
RawInteractions parse_interactions(const std::filesystem::path& path, InputFormat format);
RawInteractions parse_interactions_text(const std::string& text, InputFormat format,
                                        const std::string& source = "<memory>");

/// Maximal sub-corpus in which every user and every item has at least k
/// interactions. Each round deletes every under-degree node at once; rounds
/// repeat until nothing changes. Input order of surviving pairs is kept.
RawInteractions k_core_filter(const RawInteractions& raw, std::int64_t k);

struct DatasetSplit {
  InteractionMatrix train;
  // test[u] is sorted ascending and disjoint from train.row(u).
  std::vector<std::vector<Index>> test;
  // Internal index -> original token.
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
  std::uint64_t seed = 0;
  std::int64_t k_core = 0;
  double test_ratio = 0.0;

  Index users() const { return train.users(); }
  Index items() const { return train.items(); }
  Index test_nnz() const;

  std::unordered_map<std::string, Index> user_index() const;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Remaps tokens to contiguous indices (first-seen order) and holds out
/// ceil(test_ratio * c_u) of each user's c_u items, keeping at least one in train.
/// The held-out subset is the prefix of a Fisher-Yates shuffle of the user's
/// sorted item list driven by Rng(seed).
DatasetSplit split_train_test(const RawInteractions& raw, double test_ratio, std::uint64_t seed);

struct BprTriple {
  Index user;
  Index positive;
  Index negative;

  friend bool operator==(const BprTriple&, const BprTriple&) = default;
};

/// Uniform BPR triple sampler over a training matrix. Users with no
/// interactions, or with every item, are never drawn.
class BprSampler {
 public:
  explicit BprSampler(const InteractionMatrix& train);

  std::vector<BprTriple> sample(std::size_t batch_size, Rng& rng) const;
  const std::vector<Index>& sampleable_users() const { return users_; }

 private:
  const InteractionMatrix* train_;
  std::vector<Index> users_;
};

std::vector<BprTriple> sample_bpr_triples(const DatasetSplit& split, std::size_t batch_size,
                                          Rng& rng);

// Dataset directory: train.txt, test.txt, user_map.tsv, item_map.tsv, stats.json.
void write_dataset_dir(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit read_dataset_dir(const std::filesystem::path& dir);

/// Seeded synthetic corpus with planted topic structure and popularity skew.
struct SyntheticSpec {
  Index users = 943;
  Index items = 1682;
  Index topics = 19;
  // Per-user activity is min_per_user + floor(exp(N(log_mean, log_sd))).
  Index min_per_user = 20;
  double log_mean = 3.9;
  double log_sd = 1.0;
  // Probability that an interaction is drawn from the user's own topics.
  double topic_affinity = 0.8;
  // Item popularity weight is (rank + 1)^(-popularity_exponent).
  double popularity_exponent = 0.8;
};

RawInteractions generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace dgcf
