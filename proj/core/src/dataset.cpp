#include "dgcf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "dgcf/io.hpp"

namespace dgcf {

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::string, std::string>& p) const {
    const std::size_t h = std::hash<std::string>{}(p.first);
    return h ^ (std::hash<std::string>{}(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    const std::size_t end = line.find(sep, start);
    const std::size_t stop = end == std::string_view::npos ? line.size() : end;
    out.push_back(line.substr(start, stop - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

Index parse_index(std::string_view tok, const std::string& where) {
  Index v = 0;
  if (tok.empty()) throw UserError(where + ": empty field");
  for (char c : tok) {
    if (c < '0' || c > '9') throw UserError(where + ": expected an integer, got '" +
                                            std::string(tok) + "'");
    v = v * 10 + (c - '0');
  }
  return v;
}

// Internal adjacency lists "u i i ..." with integer ids.
std::vector<std::vector<Index>> read_index_lists(const std::filesystem::path& path, Index users,
                                                 Index items) {
  const std::string text = read_file(path);
  std::vector<std::vector<Index>> rows(static_cast<std::size_t>(users));
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto toks = split_on(line, ' ');
    const Index u = parse_index(toks[0], where);
    if (u >= users) throw UserError(where + ": user index out of range");
    for (std::size_t t = 1; t < toks.size(); ++t) {
      const Index i = parse_index(toks[t], where);
      if (i >= items) throw UserError(where + ": item index out of range");
      rows[u].push_back(i);
    }
  }
  return rows;
}

std::vector<std::string> read_token_map(const std::filesystem::path& path, Index expected) {
  const std::string text = read_file(path);
  std::vector<std::string> tokens(static_cast<std::size_t>(expected));
  std::vector<bool> seen(static_cast<std::size_t>(expected), false);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto fields = split_on(line, '\t');
    if (fields.size() != 2) throw UserError(where + ": expected original<TAB>internal");
    const Index idx = parse_index(fields[1], where);
    if (idx >= expected || seen[idx]) throw UserError(where + ": bad internal index");
    seen[idx] = true;
    tokens[idx] = std::string(fields[0]);
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw UserError(path.string() + ": map does not cover every internal index");
  return tokens;
}

std::string format_lists(const std::vector<std::vector<Index>>& rows, bool skip_empty) {
  std::string out;
  for (std::size_t u = 0; u < rows.size(); ++u) {
    if (skip_empty && rows[u].empty()) continue;
    out += std::to_string(u);
    for (Index i : rows[u]) {
      out += ' ';
      out += std::to_string(i);
    }
    out += '\n';
  }
  return out;
}

std::string format_map(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    out += tokens[k];
    out += '\t';
    out += std::to_string(k);
    out += '\n';
  }
  return out;
}

}  // namespace

InputFormat parse_input_format(const std::string& name) {
  if (name == "edge-pairs") return InputFormat::EdgePairs;
  if (name == "adjacency-list") return InputFormat::AdjacencyList;
  throw UserError("unknown input format '" + name + "' (expected edge-pairs or adjacency-list)");
}

RawInteractions parse_interactions_text(const std::string& text, InputFormat format,
                                        const std::string& source) {
  RawInteractions raw;
  raw.source_path = source;
  std::unordered_set<std::pair<std::string, std::string>, PairHash> seen;
  auto add = [&](std::string_view u, std::string_view i) {
    std::pair<std::string, std::string> p{std::string(u), std::string(i)};
    if (seen.insert(p).second) raw.pairs.push_back(std::move(p));
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (format == InputFormat::EdgePairs) {
      const auto fields = split_on(line, '\t');
      if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
        throw UserError(where + ": malformed line, expected user<TAB>item");
      add(fields[0], fields[1]);
    } else {
      const auto fields = split_on(line, ' ');
      if (fields.size() < 2) throw UserError(where + ": malformed line, expected user item ...");
      for (const auto& f : fields)
        if (f.empty()) throw UserError(where + ": malformed line, empty field");
      for (std::size_t t = 1; t < fields.size(); ++t) add(fields[0], fields[t]);
    }
  }
  if (raw.pairs.empty()) throw UserError(source + ": no interactions found");
  return raw;
}

RawInteractions parse_interactions(const std::filesystem::path& path, InputFormat format) {
  return parse_interactions_text(read_file(path), format, path.string());
}

RawInteractions k_core_filter(const RawInteractions& raw, std::int64_t k) {
  require(k >= 1, "k_core_filter: k must be >= 1");
  std::unordered_map<std::string, Index> user_ids;
  std::unordered_map<std::string, Index> item_ids;
  std::vector<std::pair<Index, Index>> edges;
  std::vector<std::size_t> source;
  std::unordered_set<std::uint64_t> seen_edges;
  edges.reserve(raw.pairs.size());
  for (std::size_t e = 0; e < raw.pairs.size(); ++e) {
    const auto& [u, i] = raw.pairs[e];
    const Index uid = user_ids.try_emplace(u, static_cast<Index>(user_ids.size())).first->second;
    const Index iid = item_ids.try_emplace(i, static_cast<Index>(item_ids.size())).first->second;
    if (!seen_edges.insert((static_cast<std::uint64_t>(uid) << 32) ^ static_cast<std::uint64_t>(iid))
             .second)
      continue;
    edges.emplace_back(uid, iid);
    source.push_back(e);
  }

  std::vector<char> user_alive(user_ids.size(), 1);
  std::vector<char> item_alive(item_ids.size(), 1);
  for (bool changed = true; changed;) {
    std::vector<std::int64_t> user_deg(user_ids.size(), 0);
    std::vector<std::int64_t> item_deg(item_ids.size(), 0);
    for (const auto& [u, i] : edges) {
      if (user_alive[u] && item_alive[i]) {
        ++user_deg[u];
        ++item_deg[i];
      }
    }
    changed = false;
    for (std::size_t u = 0; u < user_deg.size(); ++u) {
      if (user_alive[u] && user_deg[u] < k) {
        user_alive[u] = 0;
        changed = true;
      }
    }
    for (std::size_t i = 0; i < item_deg.size(); ++i) {
      if (item_alive[i] && item_deg[i] < k) {
        item_alive[i] = 0;
        changed = true;
      }
    }
  }

  RawInteractions out;
  out.source_path = raw.source_path;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (user_alive[edges[e].first] && item_alive[edges[e].second])
      out.pairs.push_back(raw.pairs[source[e]]);
  return out;
}

Index DatasetSplit::test_nnz() const {
  Index total = 0;
  for (const auto& t : test) total += static_cast<Index>(t.size());
  return total;
}

std::unordered_map<std::string, Index> DatasetSplit::user_index() const {
  std::unordered_map<std::string, Index> map;
  for (std::size_t u = 0; u < user_tokens.size(); ++u) map.emplace(user_tokens[u], u);
  return map;
}

DatasetSplit split_train_test(const RawInteractions& raw, double test_ratio, std::uint64_t seed) {
  if (raw.pairs.empty()) throw UserError("split_train_test: no interactions to split");
  require(test_ratio > 0.0 && test_ratio < 1.0, "split_train_test: test_ratio must be in (0, 1)");

  DatasetSplit split;
  split.seed = seed;
  split.test_ratio = test_ratio;
  std::unordered_map<std::string, Index> user_ids;
  std::unordered_map<std::string, Index> item_ids;
  std::vector<std::vector<Index>> items_of;
  for (const auto& [u, i] : raw.pairs) {
    auto [uit, u_new] = user_ids.try_emplace(u, static_cast<Index>(user_ids.size()));
    if (u_new) {
      split.user_tokens.push_back(u);
      items_of.emplace_back();
    }
    auto [iit, i_new] = item_ids.try_emplace(i, static_cast<Index>(item_ids.size()));
    if (i_new) split.item_tokens.push_back(i);
    items_of[uit->second].push_back(iit->second);
  }

  const Index m = static_cast<Index>(split.user_tokens.size());
  const Index n = static_cast<Index>(split.item_tokens.size());
  Rng rng(seed);
  std::vector<std::pair<Index, Index>> train_pairs;
  train_pairs.reserve(raw.pairs.size());
  split.test.resize(static_cast<std::size_t>(m));
  for (Index u = 0; u < m; ++u) {
    auto& items = items_of[u];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    const auto count = static_cast<Index>(items.size());
    Index held = static_cast<Index>(std::ceil(test_ratio * static_cast<double>(count) - 1e-9));
    held = std::min(held, count - 1);
    // Partial Fisher-Yates: positions [0, held) become the test sample.
    for (Index p = 0; p < held; ++p) {
      const Index q = p + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(count - p)));
      std::swap(items[p], items[q]);
    }
    split.test[u].assign(items.begin(), items.begin() + held);
    std::sort(split.test[u].begin(), split.test[u].end());
    for (Index p = held; p < count; ++p) train_pairs.emplace_back(u, items[p]);
  }
  split.train = InteractionMatrix(m, n, std::move(train_pairs));
  return split;
}

BprSampler::BprSampler(const InteractionMatrix& train) : train_(&train) {
  for (Index u = 0; u < train.users(); ++u) {
    const Index c = train.row_size(u);
    if (c >= 1 && c < train.items()) users_.push_back(u);
  }
  if (users_.empty())
    throw UserError("BPR sampling: no user has both a positive and a negative item");
}

std::vector<BprTriple> BprSampler::sample(std::size_t batch_size, Rng& rng) const {
  std::vector<BprTriple> batch;
  batch.reserve(batch_size);
  const auto n = static_cast<std::uint64_t>(train_->items());
  for (std::size_t b = 0; b < batch_size; ++b) {
    const Index u = users_[rng.uniform_index(users_.size())];
    const auto row = train_->row(u);
    const Index pos = row[rng.uniform_index(row.size())];
    Index neg = static_cast<Index>(rng.uniform_index(n));
    while (std::binary_search(row.begin(), row.end(), neg))
      neg = static_cast<Index>(rng.uniform_index(n));
    batch.push_back({u, pos, neg});
  }
  return batch;
}

std::vector<BprTriple> sample_bpr_triples(const DatasetSplit& split, std::size_t batch_size,
                                          Rng& rng) {
  return BprSampler(split.train).sample(batch_size, rng);
}

void write_dataset_dir(const DatasetSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::vector<Index>> train_rows(static_cast<std::size_t>(split.users()));
  for (Index u = 0; u < split.users(); ++u) {
    const auto r = split.train.row(u);
    train_rows[u].assign(r.begin(), r.end());
  }
  write_file_atomic(dir / "train.txt", format_lists(train_rows, false));
  write_file_atomic(dir / "test.txt", format_lists(split.test, true));
  write_file_atomic(dir / "user_map.tsv", format_map(split.user_tokens));
  write_file_atomic(dir / "item_map.tsv", format_map(split.item_tokens));

  nlohmann::ordered_json stats;
  stats["m"] = split.users();
  stats["n"] = split.items();
  stats["nnz"] = split.train.nnz();
  stats["test_nnz"] = split.test_nnz();
  stats["seed"] = split.seed;
  stats["k"] = split.k_core;
  stats["test_ratio"] = split.test_ratio;
  write_file_atomic(dir / "stats.json", stats.dump(2) + "\n");
}

DatasetSplit read_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw UserError("dataset directory not found: " + dir.string());
  nlohmann::json stats;
  try {
    stats = nlohmann::json::parse(read_file(dir / "stats.json"));
  } catch (const nlohmann::json::exception& e) {
    throw UserError((dir / "stats.json").string() + ": " + e.what());
  }
  DatasetSplit split;
  Index m = 0;
  Index n = 0;
  try {
    m = stats.at("m").get<Index>();
    n = stats.at("n").get<Index>();
    split.seed = stats.at("seed").get<std::uint64_t>();
    split.k_core = stats.at("k").get<std::int64_t>();
    split.test_ratio = stats.value("test_ratio", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw UserError((dir / "stats.json").string() + ": " + e.what());
  }

  const auto train_rows = read_index_lists(dir / "train.txt", m, n);
  std::vector<std::pair<Index, Index>> pairs;
  for (Index u = 0; u < m; ++u)
    for (Index i : train_rows[u]) pairs.emplace_back(u, i);
  try {
    split.train = InteractionMatrix(m, n, std::move(pairs));
  } catch (const std::invalid_argument& e) {
    throw UserError((dir / "train.txt").string() + ": " + e.what());
  }
  split.test = read_index_lists(dir / "test.txt", m, n);
  for (Index u = 0; u < m; ++u) {
    auto& t = split.test[u];
    std::sort(t.begin(), t.end());
    for (Index i : t)
      if (split.train.contains(u, i))
        throw UserError((dir / "test.txt").string() + ": test item overlaps train for user " +
                        std::to_string(u));
  }
  split.user_tokens = read_token_map(dir / "user_map.tsv", m);
  split.item_tokens = read_token_map(dir / "item_map.tsv", n);
  return split;
}

RawInteractions generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  require(spec.users > 0 && spec.items > 0 && spec.topics > 0, "generate_synthetic: bad sizes");
  Rng rng(seed);
  const Index n = spec.items;

  // Popularity rank and topic for each item come from one shuffle.
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[i] = i;
  for (Index p = n - 1; p > 0; --p)
    std::swap(order[p], order[rng.uniform_index(static_cast<std::uint64_t>(p + 1))]);
  std::vector<double> weight(static_cast<std::size_t>(n));
  std::vector<Index> topic(static_cast<std::size_t>(n));
  for (Index rank = 0; rank < n; ++rank) {
    weight[order[rank]] = std::pow(static_cast<double>(rank + 1), -spec.popularity_exponent);
    topic[order[rank]] = static_cast<Index>(rng.uniform_index(spec.topics));
  }

  // Cumulative weights, globally and per topic, for inverse-CDF draws.
  struct Pool {
    std::vector<Index> items;
    std::vector<double> cumulative;
  };
  auto add_to = [&](Pool& pool, Index i) {
    pool.items.push_back(i);
    pool.cumulative.push_back((pool.cumulative.empty() ? 0.0 : pool.cumulative.back()) + weight[i]);
  };
  Pool global;
  std::vector<Pool> by_topic(static_cast<std::size_t>(spec.topics));
  for (Index i = 0; i < n; ++i) {
    add_to(global, i);
    add_to(by_topic[topic[i]], i);
  }
  auto draw = [&](const Pool& pool) {
    const double x = rng.uniform01() * pool.cumulative.back();
    auto it = std::upper_bound(pool.cumulative.begin(), pool.cumulative.end(), x);
    if (it == pool.cumulative.end()) --it;
    return pool.items[static_cast<std::size_t>(it - pool.cumulative.begin())];
  };

  RawInteractions raw;
  raw.source_path = "<synthetic seed=" + std::to_string(seed) + ">";
  for (Index u = 0; u < spec.users; ++u) {
    const Index primary = static_cast<Index>(rng.uniform_index(spec.topics));
    const Index secondary = static_cast<Index>(rng.uniform_index(spec.topics));
    const auto extra = static_cast<Index>(std::floor(std::exp(rng.normal(spec.log_mean, spec.log_sd))));
    const Index want = std::min(spec.min_per_user + extra, n / 2);
    std::unordered_set<Index> chosen;
    std::vector<Index> picked;
    for (Index attempts = 0; static_cast<Index>(picked.size()) < want && attempts < 50 * want;
         ++attempts) {
      Index i;
      if (rng.uniform01() < spec.topic_affinity) {
        const Pool& pool = by_topic[rng.uniform01() < 0.7 ? primary : secondary];
        if (pool.items.empty()) continue;
        i = draw(pool);
      } else {
        i = draw(global);
      }
      if (chosen.insert(i).second) picked.push_back(i);
    }
    for (Index i : picked) raw.pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
  }
  return raw;
}

}  // namespace dgcf
