#include "cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

#include "dgcf/io.hpp"

namespace dgcf::cli {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"model", "ours"},
      {"dim", "64"},
      {"layers", "4"},
      {"alpha", "0.1"},
      {"beta", "0.1"},
      {"layer_weights", ""},
      {"activation", "relu"},
      {"embedding_mode", "propagated"},
      {"reg_lambda", "1e-4"},
      {"lr", "1e-3"},
      {"epochs", "200"},
      {"batch_size", "1024"},
      {"batches_per_epoch", "0"},
      {"seed", "2024"},
      {"optimizer", "adam"},
      {"adam_beta1", "0.9"},
      {"adam_beta2", "0.999"},
      {"adam_epsilon", "1e-8"},
      {"eval_every", "0"},
      {"patience", "10"},
      {"k", "20"},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UserError("invalid value for " + key + ": '" + text + "' (expected a number)");
  }
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw UserError("invalid value for " + key + ": '" + text + "' (expected an integer)");
  return v;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& kv : defaults()) out.push_back(kv.first);
    return out;
  }();
  return names;
}

std::string RunConfig::default_value(const std::string& key) {
  for (const auto& [k, v] : defaults())
    if (k == key) return v;
  throw UserError("unknown config key '" + key + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  std::string norm = key;
  std::replace(norm.begin(), norm.end(), '-', '_');
  if (!values_.contains(norm)) throw UserError("unknown config key '" + key + "'");
  values_[norm] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UserError("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UserError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

RunConfig::Resolved RunConfig::resolve() const {
  Resolved r;
  r.model = get("model");
  if (r.model == "ours" || r.model == "plain")
    r.kind = ModelKind::Ours;
  else if (r.model == "lightgcn")
    r.kind = ModelKind::LightGcn;
  else if (r.model == "bprmf")
    r.kind = ModelKind::Bprmf;
  else
    throw UserError("unknown model '" + r.model + "' (expected ours, plain, lightgcn, or bprmf)");

  Hyperparams& h = r.hyper;
  h.dim = parse_integer("dim", get("dim"));
  h.layers = parse_integer("layers", get("layers"));
  h.alpha = parse_double("alpha", get("alpha"));
  h.beta = parse_double("beta", get("beta"));
  if (!get("layer_weights").empty()) h.layer_weights = parse_double_list("layer_weights", get("layer_weights"));
  h.activation = parse_activation(get("activation"));
  h.embedding_mode = parse_embedding_mode(get("embedding_mode"));
  h.reg_lambda = parse_double("reg_lambda", get("reg_lambda"));
  h.lr = parse_double("lr", get("lr"));

  // Plain deep propagation: no residual, no transform, linear, last-layer readout.
  if (r.model == "plain") {
    h.alpha = 0.0;
    h.beta = 0.0;
    h.activation = Activation::Identity;
    if (h.layer_weights.empty()) {
      h.layer_weights.assign(static_cast<std::size_t>(std::max<Index>(h.layers, 0) + 1), 0.0);
      h.layer_weights.back() = 1.0;
    }
  } else if (r.kind == ModelKind::LightGcn) {
    h.alpha = 0.0;
    h.beta = 0.0;
    h.activation = Activation::Identity;
    h.embedding_mode = EmbeddingMode::Free;
    h.layer_weights.clear();
  } else if (r.kind == ModelKind::Bprmf) {
    h.layers = 0;
    h.alpha = 0.0;
    h.beta = 0.0;
    h.activation = Activation::Identity;
    h.embedding_mode = EmbeddingMode::Free;
    h.layer_weights = {1.0};
  }

  TrainConfig& t = r.train;
  t.epochs = parse_integer("epochs", get("epochs"));
  t.batch_size = parse_integer("batch_size", get("batch_size"));
  t.batches_per_epoch = parse_integer("batches_per_epoch", get("batches_per_epoch"));
  const long long seed = parse_integer("seed", get("seed"));
  if (seed < 0) throw UserError("seed must be >= 0");
  t.seed = static_cast<std::uint64_t>(seed);
  t.optimizer = parse_optimizer(get("optimizer"));
  t.adam_beta1 = parse_double("adam_beta1", get("adam_beta1"));
  t.adam_beta2 = parse_double("adam_beta2", get("adam_beta2"));
  t.adam_epsilon = parse_double("adam_epsilon", get("adam_epsilon"));
  t.eval_every = parse_integer("eval_every", get("eval_every"));
  t.early_stop_patience = parse_integer("patience", get("patience"));
  t.eval_k = parse_integer("k", get("k"));

  try {
    h.validate();
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(std::string("invalid configuration: ") + e.what());
  }
  return r;
}

std::string RunConfig::echo() const {
  const Resolved r = resolve();
  std::map<std::string, std::string> out = values_;
  auto fmt = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  out["alpha"] = fmt(r.hyper.alpha);
  out["beta"] = fmt(r.hyper.beta);
  out["layers"] = std::to_string(r.hyper.layers);
  out["activation"] = to_string(r.hyper.activation);
  out["embedding_mode"] = to_string(r.hyper.embedding_mode);
  std::string weights;
  for (double w : r.hyper.resolved_layer_weights()) weights += (weights.empty() ? "" : ",") + fmt(w);
  out["layer_weights"] = weights;
  std::string text;
  for (const auto& [k, v] : out) text += k + "=" + v + "\n";
  return text;
}

}  // namespace dgcf::cli
