#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli/run_config.hpp"
#include "dgcf/baselines.hpp"
#include "dgcf/dataset.hpp"
#include "dgcf/eval.hpp"
#include "dgcf/io.hpp"
#include "dgcf/model_io.hpp"
#include "dgcf/training.hpp"

namespace fs = std::filesystem;

namespace dgcf::cli {

namespace {

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

void check_compatible(const ModelFile& model, const DatasetSplit& split,
                      const fs::path& model_path, const fs::path& data_dir) {
  if (model.users != split.users() || model.items != split.items())
    throw UserError("model " + model_path.string() + " has " + std::to_string(model.users) +
                    " users x " + std::to_string(model.items) + " items but dataset " +
                    data_dir.string() + " has " + std::to_string(split.users()) + " x " +
                    std::to_string(split.items()));
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string input;
  std::string format = "edge-pairs";
  long long k_core = 10;
  double test_ratio = 0.2;
  long long seed = 2024;
  std::string out;
};

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  if (a.k_core < 1) throw UserError("--k-core must be >= 1");
  if (!(a.test_ratio > 0.0 && a.test_ratio < 1.0)) throw UserError("--test-ratio must be in (0, 1)");
  if (a.seed < 0) throw UserError("--seed must be >= 0");
  const RawInteractions raw = parse_interactions(a.input, parse_input_format(a.format));
  const RawInteractions filtered = k_core_filter(raw, a.k_core);
  if (filtered.pairs.empty())
    throw UserError("no interactions survive " + std::to_string(a.k_core) + "-core filtering of " +
                    a.input);
  DatasetSplit split = split_train_test(filtered, a.test_ratio, static_cast<std::uint64_t>(a.seed));
  split.k_core = a.k_core;

  const fs::path target(a.out);
  fs::path staging = target;
  staging += ".tmp";
  fs::remove_all(staging);
  write_dataset_dir(split, staging);
  fs::remove_all(target);
  fs::rename(staging, target);
  out << "m=" << split.users() << " n=" << split.items() << " nnz=" << split.train.nnz()
      << " test_nnz=" << split.test_nnz() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  long long seed = 7;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.seed < 0) throw UserError("--seed must be >= 0");
  const RawInteractions raw = generate_synthetic(a.spec, static_cast<std::uint64_t>(a.seed));
  std::string text;
  for (const auto& [u, i] : raw.pairs) text += u + "\t" + i + "\n";
  write_file_atomic(a.out, text);
  out << "wrote " << raw.pairs.size() << " interactions to " << a.out << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config;
  std::string log;
  std::map<std::string, std::string> overrides;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig config;
  if (!a.config.empty()) config.merge_file(a.config);
  for (const auto& [k, v] : a.overrides) config.set(k, v);
  const RunConfig::Resolved r = config.resolve();
  const DatasetSplit split = read_dataset_dir(a.data);

  const fs::path model_path(a.out);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  fs::path log_tmp = log_path;
  log_tmp += ".tmp";
  std::ofstream log(log_tmp, std::ios::trunc);
  if (!log) throw UserError("cannot open " + log_tmp.string() + " for writing");
  const Index k = r.train.eval_k;
  auto on_epoch = [&](const EpochRecord& rec) {
    log << rec.to_json(k) << "\n";
    log.flush();
  };

  ModelFile model;
  model.kind = r.kind;
  model.users = split.users();
  model.items = split.items();
  model.hyper = r.hyper;
  model.hyper.layer_weights = r.hyper.resolved_layer_weights();
  TrainingRun run;
  try {
    switch (r.kind) {
      case ModelKind::Ours: {
        FitResult fr = fit(split, r.hyper, r.train, on_epoch);
        model.params = std::move(fr.params);
        run = std::move(fr.run);
        break;
      }
      case ModelKind::LightGcn: {
        LightGcnFitResult fr = lightgcn_fit(split, r.hyper.dim, r.hyper.layers, r.hyper.lr,
                                            r.hyper.reg_lambda, r.train, on_epoch);
        model.params.base = std::move(fr.embedding);
        run = std::move(fr.run);
        break;
      }
      case ModelKind::Bprmf: {
        MfFitResult fr = bprmf_fit(split, r.hyper.dim, r.hyper.lr, r.hyper.reg_lambda, r.train,
                                   on_epoch);
        model.params.base = fr.params.stacked();
        run = std::move(fr.run);
        break;
      }
    }
  } catch (...) {
    log.close();
    fs::remove(log_tmp);
    throw;
  }
  log.close();

  save_model(model, model_path);
  fs::rename(log_tmp, log_path);
  fs::path echo_path = model_path;
  echo_path += ".config";
  write_file_atomic(echo_path, "data=" + a.data + "\n" + config.echo());

  nlohmann::ordered_json summary;
  summary["model"] = r.model;
  summary["epochs_run"] = static_cast<Index>(run.log.size());
  summary["best_epoch"] = run.best_epoch;
  summary["stopped_early"] = run.stopped_early;
  summary["final_loss"] = run.log.empty() ? 0.0 : run.log.back().loss;
  out << summary.dump() << "\n";
  if (run.stopped_early) err << "early stopping after epoch " << run.log.size() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string data;
  long long k = 20;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (a.k < 1) throw UserError("--k must be >= 1");
  const ModelFile model = load_model(a.model);
  const DatasetSplit split = read_dataset_dir(a.data);
  check_compatible(model, split, a.model, a.data);
  const SparseMatrix s = bipartite_laplacian(split.train);
  const RankingMetrics m = evaluate_model(model.combined(s), split, a.k);
  nlohmann::ordered_json j;
  j["model"] = to_string(model.kind);
  j["k"] = m.k;
  j["recall"] = m.recall;
  j["ndcg"] = m.ndcg;
  j["users_evaluated"] = m.users_evaluated;
  out << j.dump() << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct RecommendArgs {
  std::string model;
  std::string data;
  std::string user;
  long long top = 20;
};

int cmd_recommend(const RecommendArgs& a, std::ostream& out, std::ostream& err) {
  if (a.top < 1) throw UserError("--top must be >= 1");
  const ModelFile model = load_model(a.model);
  const DatasetSplit split = read_dataset_dir(a.data);
  check_compatible(model, split, a.model, a.data);
  const auto users = split.user_index();
  const auto it = users.find(a.user);
  if (it == users.end())
    throw UserError("unknown user '" + a.user + "' (not in " +
                    (fs::path(a.data) / "user_map.tsv").string() + ")");
  const SparseMatrix s = bipartite_laplacian(split.train);
  const auto ranked = recommend_for_user(model.combined(s), split.train, it->second, a.top);
  if (ranked.empty()) err << "warning: user '" << a.user << "' has every item in train\n";
  for (Index i : ranked) out << split.item_tokens[i] << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string data;
  std::string layers = "1..8";
  std::string models = "ours,plain";
  long long seed = 2024;
  long long dim = 64;
  double alpha = 0.1;
  double beta = 0.1;
  std::string activation = "relu";
  std::string embedding_mode = "propagated";
  std::string out;
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
  if (a.seed < 0) throw UserError("--seed must be >= 0");
  const long long depth = parse_depth_spec(a.layers);
  std::vector<DiagnoseConfig> grid;
  std::stringstream ss(a.models);
  std::string name;
  while (std::getline(ss, name, ',')) {
    DiagnoseConfig cfg;
    cfg.model = name;
    cfg.hyper.dim = a.dim;
    cfg.hyper.layers = depth;
    cfg.hyper.embedding_mode = parse_embedding_mode(a.embedding_mode);
    if (name == "ours") {
      cfg.hyper.alpha = a.alpha;
      cfg.hyper.beta = a.beta;
      cfg.hyper.activation = parse_activation(a.activation);
    } else if (name == "plain") {
      cfg.hyper.alpha = 0.0;
      cfg.hyper.beta = 0.0;
      cfg.hyper.activation = Activation::Identity;
    } else {
      throw UserError("malformed grid spec: unknown model '" + name + "' (expected ours or plain)");
    }
    try {
      cfg.hyper.validate();
    } catch (const std::invalid_argument& e) {
      throw UserError(std::string("invalid configuration: ") + e.what());
    }
    grid.push_back(cfg);
  }
  if (grid.empty()) throw UserError("malformed grid spec: no models given");
  const DatasetSplit split = read_dataset_dir(a.data);
  const std::string tsv =
      format_smoothness_tsv(oversmoothing_report(split, grid, static_cast<std::uint64_t>(a.seed)));
  if (a.out.empty())
    out << tsv;
  else
    write_file_atomic(a.out, tsv);
  return kSuccess;
}

}  // namespace

long long parse_depth_spec(const std::string& spec) {
  const auto dots = spec.find("..");
  std::string hi = spec;
  if (dots != std::string::npos) {
    const long long lo = parse_integer("layers", spec.substr(0, dots));
    hi = spec.substr(dots + 2);
    if (lo < 0) throw UserError("malformed grid spec '" + spec + "'");
    if (parse_integer("layers", hi) < lo) throw UserError("malformed grid spec '" + spec + "'");
  }
  long long depth = 0;
  try {
    depth = parse_integer("layers", hi);
  } catch (const UserError&) {
    throw UserError("malformed grid spec '" + spec + "' (expected L or a..b)");
  }
  if (depth < 0) throw UserError("malformed grid spec '" + spec + "'");
  return depth;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep graph collaborative filtering: preprocess, train, evaluate, recommend, diagnose",
                "dgcf"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* preprocess = app.add_subcommand("preprocess", "Filter, remap, and split an interaction file");
  preprocess->add_option("--input", pre.input, "Interaction file")->required();
  preprocess->add_option("--format", pre.format, "edge-pairs or adjacency-list")->capture_default_str();
  preprocess->add_option("--k-core", pre.k_core, "Minimum interactions per user and item")->capture_default_str();
  preprocess->add_option("--test-ratio", pre.test_ratio, "Per-user held-out fraction")->capture_default_str();
  preprocess->add_option("--seed", pre.seed, "Split seed")->capture_default_str();
  preprocess->add_option("--out", pre.out, "Output dataset directory")->required();

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic edge-pairs corpus");
  synth->add_option("--out", syn.out, "Output file")->required();
  synth->add_option("--seed", syn.seed, "Generator seed")->capture_default_str();
  synth->add_option("--users", syn.spec.users)->capture_default_str();
  synth->add_option("--items", syn.spec.items)->capture_default_str();
  synth->add_option("--topics", syn.spec.topics)->capture_default_str();
  synth->add_option("--min-per-user", syn.spec.min_per_user)->capture_default_str();
  synth->add_option("--log-mean", syn.spec.log_mean)->capture_default_str();
  synth->add_option("--log-sd", syn.spec.log_sd)->capture_default_str();
  synth->add_option("--topic-affinity", syn.spec.topic_affinity)->capture_default_str();
  synth->add_option("--popularity-exponent", syn.spec.popularity_exponent)->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model on a preprocessed dataset");
  train->add_option("--data", tr.data, "Dataset directory")->required();
  train->add_option("--out", tr.out, "Model file to write")->required();
  train->add_option("--config", tr.config, "key=value config file (flags override it)");
  train->add_option("--log", tr.log, "JSONL training log (default: <out>.log.jsonl)");
  for (const auto& key : RunConfig::keys()) {
    train->add_option_function<std::string>(
        "--" + dashed(key), [&tr, key](const std::string& v) { tr.overrides[key] = v; },
        "default: " + RunConfig::default_value(key));
  }

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Full-ranking Recall@K and NDCG@K as JSON");
  evaluate->add_option("--model", ev.model, "Model file")->required();
  evaluate->add_option("--data", ev.data, "Dataset directory")->required();
  evaluate->add_option("--k", ev.k, "Cutoff")->capture_default_str();

  RecommendArgs rc;
  auto* recommend = app.add_subcommand("recommend", "Top-N items for one user");
  recommend->add_option("--model", rc.model, "Model file")->required();
  recommend->add_option("--data", rc.data, "Dataset directory")->required();
  recommend->add_option("--user", rc.user, "Original user identifier")->required();
  recommend->add_option("--top", rc.top, "Number of items")->capture_default_str();

  DiagnoseArgs dg;
  auto* diagnose = app.add_subcommand("diagnose", "Per-layer embedding smoothness as TSV");
  diagnose->add_option("--data", dg.data, "Dataset directory")->required();
  diagnose->add_option("--layers", dg.layers, "Depth as L or a..b")->capture_default_str();
  diagnose->add_option("--models", dg.models, "Comma list of ours,plain")->capture_default_str();
  diagnose->add_option("--seed", dg.seed)->capture_default_str();
  diagnose->add_option("--dim", dg.dim)->capture_default_str();
  diagnose->add_option("--alpha", dg.alpha)->capture_default_str();
  diagnose->add_option("--beta", dg.beta)->capture_default_str();
  diagnose->add_option("--activation", dg.activation)->capture_default_str();
  diagnose->add_option("--embedding-mode", dg.embedding_mode)->capture_default_str();
  diagnose->add_option("--out", dg.out, "TSV file (default: standard output)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  }

  try {
    if (*preprocess) return cmd_preprocess(pre, out);
    if (*synth) return cmd_synth(syn, out);
    if (*train) return cmd_train(tr, out, err);
    if (*evaluate) return cmd_evaluate(ev, out);
    if (*recommend) return cmd_recommend(rc, out, err);
    if (*diagnose) return cmd_diagnose(dg, out);
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace dgcf::cli
