#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dgcf/common.hpp"
#include "dgcf/dataset.hpp"
#include "dgcf/model.hpp"

namespace dgcf {

struct GradientSet {
  DenseMatrix base;
  std::vector<DenseMatrix> transforms;

  static GradientSet zeros_like(const ModelParams& params);
  double max_abs() const;
};

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  Index epochs = 200;
  Index batch_size = 1024;
  // 0 means ceil(train nnz / batch_size).
  Index batches_per_epoch = 0;
  std::uint64_t seed = 2024;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Epochs between validation passes; 0 disables validation and early stopping.
  Index eval_every = 0;
  Index early_stop_patience = 10;
  Index eval_k = 20;

  void validate() const;
};

/// Mean BPR loss of the batch plus reg_lambda * (|W|_F^2 + sum_l |W^(l)|_F^2).
/// -ln sigmoid(x) is evaluated as softplus(-x).
double bpr_loss(const ForwardTrace& trace, const std::vector<BprTriple>& batch,
                double reg_lambda, const ModelParams& params);

/// Softplus-stable pieces shared with the baselines.
double softplus(double x);
double sigmoid(double x);

/// Gradient of E*-based BPR ranking loss (without regularization) with respect
/// to E*. Only rows touched by the batch are nonzero.
DenseMatrix ranking_loss_gradient(const DenseMatrix& combined, Index users,
                                  const std::vector<BprTriple>& batch, double* loss = nullptr);

/// Exact reverse-mode gradient of bpr_loss through readout, every
/// aggregation layer, and the initial embedding.
GradientSet backward(const ForwardTrace& trace, const std::vector<BprTriple>& batch,
                     const ModelParams& params, const SparseMatrix& s, const Hyperparams& hyper);

/// Central differences (f(p + h e) - f(p - h e)) / 2h for every parameter entry.
GradientSet finite_diff_grad(const ModelParams& params,
                             const std::function<double(const ModelParams&)>& loss, double step);

/// SGD or Adam over a fixed list of parameter tensors.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999,
            double epsilon = 1e-8);

  void step(const std::vector<DenseMatrix*>& params, const std::vector<const DenseMatrix*>& grads);

  std::int64_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::int64_t t_ = 0;
  std::vector<DenseMatrix> first_;
  std::vector<DenseMatrix> second_;
};

void optimizer_step(ModelParams& params, const GradientSet& grads, Optimizer& optimizer);

struct EpochRecord {
  Index epoch = 0;
  double loss = 0.0;
  std::optional<double> recall;
  std::optional<double> ndcg;
  double wall_ms = 0.0;

  // {"epoch":..,"loss":..,"recall@K":..,"ndcg@K":..,"wall_ms":..}
  std::string to_json(Index k) const;
};

/// A BPR-trainable model: a set of tensors plus a loss/gradient over a batch
/// and the E* used for ranking.
class BprObjective {
 public:
  virtual ~BprObjective() = default;
  virtual std::vector<DenseMatrix*> tensors() = 0;
  // Fills grads (same order and shapes as tensors()) and returns the batch loss.
  virtual double loss_and_gradient(const std::vector<BprTriple>& batch,
                                   std::vector<DenseMatrix>& grads) = 0;
  virtual DenseMatrix embeddings() const = 0;
};

struct TrainingRun {
  std::vector<EpochRecord> log;
  Index best_epoch = 0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shared loop: sample triples, loss and gradient, optimizer step. When
/// validation is enabled the tensors holding the best Recall@K are restored
/// at the end. Sampling draws from Rng(seed ^ kSamplerStream).
TrainingRun run_bpr_training(const DatasetSplit& split, BprObjective& objective,
                             const TrainConfig& config, double lr,
                             const EpochCallback& on_epoch = {});

inline constexpr std::uint64_t kSamplerStream = 0x5bd1e9955bd1e995ULL;

struct FitResult {
  ModelParams params;
  TrainingRun run;
};

/// Trains the aggregation model. Initial W is drawn from Rng(config.seed).
FitResult fit(const DatasetSplit& split, const Hyperparams& hyper, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

}  // namespace dgcf
