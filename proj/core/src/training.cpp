#include "dgcf/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "dgcf/eval.hpp"

namespace dgcf {

GradientSet GradientSet::zeros_like(const ModelParams& params) {
  GradientSet g;
  g.base = DenseMatrix::Zero(params.base.rows(), params.base.cols());
  for (const auto& t : params.transforms) g.transforms.push_back(DenseMatrix::Zero(t.rows(), t.cols()));
  return g;
}

double GradientSet::max_abs() const {
  double v = base.size() ? base.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& t : transforms)
    if (t.size()) v = std::max(v, t.cwiseAbs().maxCoeff());
  return v;
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw UserError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  require(epochs >= 0, "epochs must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(batches_per_epoch >= 0, "batches_per_epoch must be >= 0");
  require(eval_every >= 0, "eval_every must be >= 0");
  require(early_stop_patience >= 1, "early_stop_patience must be >= 1");
  require(eval_k >= 1, "eval_k must be >= 1");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must lie in [0, 1)");
  require(adam_epsilon > 0.0, "adam epsilon must be > 0");
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

double squared_norms(const ModelParams& params) {
  double total = params.base.squaredNorm();
  for (const auto& t : params.transforms) total += t.squaredNorm();
  return total;
}

const SparseMatrix& transpose_of(const SparseMatrix& s, std::optional<SparseMatrix>& storage) {
  if (s.symmetric()) return s;
  storage = s.transpose();
  return *storage;
}

}  // namespace

DenseMatrix ranking_loss_gradient(const DenseMatrix& combined, Index users,
                                  const std::vector<BprTriple>& batch, double* loss) {
  require(!batch.empty(), "BPR loss: empty batch");
  DenseMatrix grad = DenseMatrix::Zero(combined.rows(), combined.cols());
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& t : batch) {
    const Index ui = t.user;
    const Index pi = users + t.positive;
    const Index ni = users + t.negative;
    const double margin =
        predict(combined, users, t.user, t.positive) - predict(combined, users, t.user, t.negative);
    total += softplus(-margin);
    // d softplus(-x) / dx = -sigmoid(-x)
    const double c = -sigmoid(-margin) * inv;
    grad.row(ui) += c * (combined.row(pi) - combined.row(ni));
    grad.row(pi) += c * combined.row(ui);
    grad.row(ni) -= c * combined.row(ui);
  }
  if (loss) *loss = total * inv;
  return grad;
}

double bpr_loss(const ForwardTrace& trace, const std::vector<BprTriple>& batch,
                double reg_lambda, const ModelParams& params) {
  require(!batch.empty(), "bpr_loss: empty batch");
  double total = 0.0;
  for (const auto& t : batch) {
    const double margin = predict(trace.combined, trace.users, t.user, t.positive) -
                          predict(trace.combined, trace.users, t.user, t.negative);
    total += softplus(-margin);
  }
  return total / static_cast<double>(batch.size()) + reg_lambda * squared_norms(params);
}

GradientSet backward(const ForwardTrace& trace, const std::vector<BprTriple>& batch,
                     const ModelParams& params, const SparseMatrix& s, const Hyperparams& hyper) {
  const auto L = static_cast<std::size_t>(hyper.layers);
  require(trace.layers.size() == L + 1 && trace.preact.size() == L && trace.mixed.size() == L,
          "backward: trace depth does not match hyperparameters");
  require(params.transforms.size() == L && params.base.rows() == trace.combined.rows(),
          "backward: parameters do not match trace");

  std::optional<SparseMatrix> st_storage;
  const SparseMatrix& st = transpose_of(s, st_storage);
  const auto weights = hyper.resolved_layer_weights();
  const DenseMatrix d_combined = ranking_loss_gradient(trace.combined, trace.users, batch);

  GradientSet grads = GradientSet::zeros_like(params);
  // Adjoint of E^(l); starts with the readout contribution.
  std::vector<DenseMatrix> adj(L + 1);
  for (std::size_t k = 0; k <= L; ++k) adj[k] = weights[k] * d_combined;

  for (std::size_t l = L; l >= 1; --l) {
    DenseMatrix d_preact = adj[l];
    if (hyper.activation == Activation::Relu)
      d_preact = (trace.preact[l - 1].array() > 0.0).select(d_preact, 0.0);

    DenseMatrix d_mixed;
    if (hyper.beta == 0.0) {
      d_mixed = d_preact;
    } else {
      grads.transforms[l - 1].noalias() = hyper.beta * (trace.mixed[l - 1].transpose() * d_preact);
      DenseMatrix mapping = hyper.beta * params.transforms[l - 1];
      mapping.diagonal().array() += 1.0 - hyper.beta;
      d_mixed.noalias() = d_preact * mapping.transpose();
    }
    if (hyper.alpha != 1.0) spmm_into(st, d_mixed, adj[l - 1], 1.0 - hyper.alpha, true);
    if (hyper.alpha != 0.0) adj[0] += hyper.alpha * d_mixed;
  }

  if (hyper.embedding_mode == EmbeddingMode::Propagated)
    spmm_into(st, adj[0], grads.base);
  else
    grads.base = std::move(adj[0]);

  if (hyper.reg_lambda != 0.0) {
    grads.base += 2.0 * hyper.reg_lambda * params.base;
    for (std::size_t l = 0; l < L; ++l)
      grads.transforms[l] += 2.0 * hyper.reg_lambda * params.transforms[l];
  }
  return grads;
}

GradientSet finite_diff_grad(const ModelParams& params,
                             const std::function<double(const ModelParams&)>& loss, double step) {
  GradientSet grads = GradientSet::zeros_like(params);
  ModelParams probe = params;
  auto sweep = [&](DenseMatrix& target, DenseMatrix& out) {
    for (Index r = 0; r < target.rows(); ++r) {
      for (Index c = 0; c < target.cols(); ++c) {
        const double saved = target(r, c);
        target(r, c) = saved + step;
        const double up = loss(probe);
        target(r, c) = saved - step;
        const double down = loss(probe);
        target(r, c) = saved;
        out(r, c) = (up - down) / (2.0 * step);
      }
    }
  };
  sweep(probe.base, grads.base);
  for (std::size_t l = 0; l < probe.transforms.size(); ++l)
    sweep(probe.transforms[l], grads.transforms[l]);
  return grads;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double beta1, double beta2, double epsilon)
    : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Optimizer::step(const std::vector<DenseMatrix*>& params,
                     const std::vector<const DenseMatrix*>& grads) {
  require(params.size() == grads.size(), "optimizer: parameter/gradient count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k)
    require(params[k]->rows() == grads[k]->rows() && params[k]->cols() == grads[k]->cols(),
            "optimizer: shape mismatch for tensor " + std::to_string(k));
  ++t_;
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t k = 0; k < params.size(); ++k) *params[k] -= lr_ * *grads[k];
    return;
  }
  if (first_.empty()) {
    for (const auto* p : params) {
      first_.push_back(DenseMatrix::Zero(p->rows(), p->cols()));
      second_.push_back(DenseMatrix::Zero(p->rows(), p->cols()));
    }
  }
  require(first_.size() == params.size(), "optimizer: tensor list changed between steps");
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const DenseMatrix& g = *grads[k];
    first_[k] = beta1_ * first_[k] + (1.0 - beta1_) * g;
    second_[k] = beta2_ * second_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[k]->array() -= lr_ * (first_[k].array() / correction1) /
                          ((second_[k].array() / correction2).sqrt() + epsilon_);
  }
}

void optimizer_step(ModelParams& params, const GradientSet& grads, Optimizer& optimizer) {
  std::vector<DenseMatrix*> p{&params.base};
  std::vector<const DenseMatrix*> g{&grads.base};
  require(params.transforms.size() == grads.transforms.size(),
          "optimizer_step: transform count mismatch");
  for (std::size_t l = 0; l < params.transforms.size(); ++l) {
    p.push_back(&params.transforms[l]);
    g.push_back(&grads.transforms[l]);
  }
  optimizer.step(p, g);
}

std::string EpochRecord::to_json(Index k) const {
  char buf[96];
  std::string out = "{\"epoch\":" + std::to_string(epoch);
  std::snprintf(buf, sizeof(buf), ",\"loss\":%.10g", loss);
  out += buf;
  if (recall) {
    std::snprintf(buf, sizeof(buf), ",\"recall@%lld\":%.10g", static_cast<long long>(k), *recall);
    out += buf;
  }
  if (ndcg) {
    std::snprintf(buf, sizeof(buf), ",\"ndcg@%lld\":%.10g", static_cast<long long>(k), *ndcg);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), ",\"wall_ms\":%.3f}", wall_ms);
  out += buf;
  return out;
}

TrainingRun run_bpr_training(const DatasetSplit& split, BprObjective& objective,
                             const TrainConfig& config, double lr, const EpochCallback& on_epoch) {
  config.validate();
  TrainingRun run;
  const std::vector<DenseMatrix*> tensors = objective.tensors();
  std::vector<DenseMatrix> grads;
  for (const auto* t : tensors) grads.push_back(DenseMatrix::Zero(t->rows(), t->cols()));
  std::vector<const DenseMatrix*> grad_ptrs;
  for (const auto& g : grads) grad_ptrs.push_back(&g);

  Optimizer optimizer(config.optimizer, lr, config.adam_beta1, config.adam_beta2,
                      config.adam_epsilon);
  if (config.epochs == 0) return run;
  const BprSampler sampler(split.train);
  Rng rng(config.seed ^ kSamplerStream);
  const Index batches = config.batches_per_epoch > 0
                            ? config.batches_per_epoch
                            : (split.train.nnz() + config.batch_size - 1) / config.batch_size;

  double best_recall = -1.0;
  Index evals_since_best = 0;
  std::vector<DenseMatrix> best;
  const auto start = std::chrono::steady_clock::now();

  for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (Index b = 0; b < batches; ++b) {
      const auto batch = sampler.sample(static_cast<std::size_t>(config.batch_size), rng);
      const double loss = objective.loss_and_gradient(batch, grads);
      if (!std::isfinite(loss))
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(b));
      loss_sum += loss;
      optimizer.step(tensors, grad_ptrs);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(batches);
    const bool validate_now = config.eval_every > 0 && epoch % config.eval_every == 0;
    if (validate_now) {
      const RankingMetrics m = evaluate_model(objective.embeddings(), split, config.eval_k);
      record.recall = m.recall;
      record.ndcg = m.ndcg;
    }
    record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               start)
                         .count();
    run.log.push_back(record);
    if (on_epoch) on_epoch(record);

    if (validate_now) {
      if (*record.recall > best_recall) {
        best_recall = *record.recall;
        run.best_epoch = epoch;
        evals_since_best = 0;
        best.clear();
        for (const auto* t : tensors) best.push_back(*t);
      } else if (++evals_since_best >= config.early_stop_patience) {
        run.stopped_early = true;
        break;
      }
    }
  }
  if (!best.empty()) {
    for (std::size_t k = 0; k < tensors.size(); ++k) *tensors[k] = best[k];
  } else {
    run.best_epoch = static_cast<Index>(run.log.size());
  }
  return run;
}

namespace {

class AggregationObjective final : public BprObjective {
 public:
  AggregationObjective(ModelParams& params, const SparseMatrix& s, const Hyperparams& hyper,
                       Index users, Index items)
      : params_(params), s_(s), hyper_(hyper), users_(users), items_(items) {}

  std::vector<DenseMatrix*> tensors() override {
    std::vector<DenseMatrix*> out{&params_.base};
    for (auto& t : params_.transforms) out.push_back(&t);
    return out;
  }

  double loss_and_gradient(const std::vector<BprTriple>& batch,
                           std::vector<DenseMatrix>& grads) override {
    const ForwardTrace trace = forward(params_, s_, hyper_, users_, items_);
    const double loss = bpr_loss(trace, batch, hyper_.reg_lambda, params_);
    GradientSet g = backward(trace, batch, params_, s_, hyper_);
    grads[0] = std::move(g.base);
    for (std::size_t l = 0; l < g.transforms.size(); ++l) grads[l + 1] = std::move(g.transforms[l]);
    return loss;
  }

  DenseMatrix embeddings() const override {
    return forward(params_, s_, hyper_, users_, items_).combined;
  }

 private:
  ModelParams& params_;
  const SparseMatrix& s_;
  const Hyperparams& hyper_;
  Index users_;
  Index items_;
};

}  // namespace

FitResult fit(const DatasetSplit& split, const Hyperparams& hyper, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  hyper.validate();
  const SparseMatrix s = bipartite_laplacian(split.train);
  Rng rng(config.seed);
  FitResult result;
  result.params = init_params(split.users(), split.items(), hyper, rng);
  AggregationObjective objective(result.params, s, hyper, split.users(), split.items());
  result.run = run_bpr_training(split, objective, config, hyper.lr, on_epoch);
  return result;
}

}  // namespace dgcf
