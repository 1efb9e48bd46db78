#include "dgcf/baselines.hpp"

#include <string>

namespace dgcf {

DenseMatrix MfParams::stacked() const {
  DenseMatrix out(users.rows() + items.rows(), users.cols());
  out.topRows(users.rows()) = users;
  out.bottomRows(items.rows()) = items;
  return out;
}

MfParams init_mf_params(Index users, Index items, Index dim, Rng& rng, double init_std) {
  // Same draw order as init_params: one (m+n) x d table, row-major.
  MfParams mf;
  mf.users.resize(users, dim);
  mf.items.resize(items, dim);
  for (Index r = 0; r < users + items; ++r) {
    for (Index c = 0; c < dim; ++c) {
      const double v = rng.normal(0.0, init_std);
      if (r < users)
        mf.users(r, c) = v;
      else
        mf.items(r - users, c) = v;
    }
  }
  return mf;
}

double bprmf_predict(const MfParams& mf, Index u, Index i) {
  require(u >= 0 && u < mf.users.rows(), "bprmf_predict: user index " + std::to_string(u) +
                                             " out of range");
  require(i >= 0 && i < mf.items.rows(), "bprmf_predict: item index " + std::to_string(i) +
                                             " out of range");
  return mf.users.row(u).dot(mf.items.row(i));
}

double bprmf_loss(const MfParams& mf, const std::vector<BprTriple>& batch, double reg_lambda) {
  require(!batch.empty(), "bprmf_loss: empty batch");
  double total = 0.0;
  for (const auto& t : batch)
    total += softplus(-(bprmf_predict(mf, t.user, t.positive) - bprmf_predict(mf, t.user, t.negative)));
  return total / static_cast<double>(batch.size()) +
         reg_lambda * (mf.users.squaredNorm() + mf.items.squaredNorm());
}

void bprmf_gradient(const MfParams& mf, const std::vector<BprTriple>& batch, double reg_lambda,
                    DenseMatrix& grad_p, DenseMatrix& grad_q) {
  require(!batch.empty(), "bprmf_gradient: empty batch");
  grad_p = 2.0 * reg_lambda * mf.users;
  grad_q = 2.0 * reg_lambda * mf.items;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& t : batch) {
    const auto p = mf.users.row(t.user);
    const auto qi = mf.items.row(t.positive);
    const auto qj = mf.items.row(t.negative);
    const double x = p.dot(qi) - p.dot(qj);
    const double c = -sigmoid(-x) * inv;
    grad_p.row(t.user) += c * (qi - qj);
    grad_q.row(t.positive) += c * p;
    grad_q.row(t.negative) -= c * p;
  }
}

namespace {

class MfObjective final : public BprObjective {
 public:
  MfObjective(MfParams& mf, double reg_lambda) : mf_(mf), reg_lambda_(reg_lambda) {}

  std::vector<DenseMatrix*> tensors() override { return {&mf_.users, &mf_.items}; }

  double loss_and_gradient(const std::vector<BprTriple>& batch,
                           std::vector<DenseMatrix>& grads) override {
    bprmf_gradient(mf_, batch, reg_lambda_, grads[0], grads[1]);
    return bprmf_loss(mf_, batch, reg_lambda_);
  }

  DenseMatrix embeddings() const override { return mf_.stacked(); }

 private:
  MfParams& mf_;
  double reg_lambda_;
};

class LightGcnObjective final : public BprObjective {
 public:
  LightGcnObjective(DenseMatrix& table, const SparseMatrix& s, Index layers, Index users,
                    double reg_lambda)
      : table_(table), s_(s), layers_(layers), users_(users), reg_lambda_(reg_lambda) {}

  std::vector<DenseMatrix*> tensors() override { return {&table_}; }

  double loss_and_gradient(const std::vector<BprTriple>& batch,
                           std::vector<DenseMatrix>& grads) override {
    const DenseMatrix combined = lightgcn_forward(table_, s_, layers_);
    double loss = 0.0;
    const DenseMatrix d_combined = ranking_loss_gradient(combined, users_, batch, &loss);
    // d/dE0 of mean_k S^k E0 is mean_k S^k d (S symmetric).
    grads[0] = lightgcn_forward(d_combined, s_, layers_);
    grads[0] += 2.0 * reg_lambda_ * table_;
    return loss + reg_lambda_ * table_.squaredNorm();
  }

  DenseMatrix embeddings() const override { return lightgcn_forward(table_, s_, layers_); }

 private:
  DenseMatrix& table_;
  const SparseMatrix& s_;
  Index layers_;
  Index users_;
  double reg_lambda_;
};

}  // namespace

MfFitResult bprmf_fit(const DatasetSplit& split, Index dim, double lr, double reg_lambda,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  require(dim >= 1, "bprmf_fit: dim must be >= 1");
  Rng rng(config.seed);
  MfFitResult result;
  result.params = init_mf_params(split.users(), split.items(), dim, rng);
  MfObjective objective(result.params, reg_lambda);
  result.run = run_bpr_training(split, objective, config, lr, on_epoch);
  return result;
}

DenseMatrix lightgcn_forward(const DenseMatrix& initial, const SparseMatrix& s, Index layers) {
  require(layers >= 0, "lightgcn_forward: negative layer count");
  require(s.rows() == s.cols() && s.cols() == initial.rows(),
          "lightgcn_forward: S does not match the embedding table " + shape_str(initial));
  // Plain CSR loop kept separate from spmm so the aggregation model's
  // reduction can be checked against an independent code path.
  const auto& off = s.offsets();
  const auto& idx = s.indices();
  const auto& val = s.values();
  DenseMatrix sum = initial;
  DenseMatrix current = initial;
  DenseMatrix next(initial.rows(), initial.cols());
  for (Index l = 0; l < layers; ++l) {
    next.setZero();
    for (Index i = 0; i < s.rows(); ++i)
      for (Index k = off[i]; k < off[i + 1]; ++k)
        for (Index c = 0; c < initial.cols(); ++c) next(i, c) += val[k] * current(idx[k], c);
    sum += next;
    current.swap(next);
  }
  return sum / static_cast<double>(layers + 1);
}

LightGcnFitResult lightgcn_fit(const DatasetSplit& split, Index dim, Index layers, double lr,
                               double reg_lambda, const TrainConfig& config,
                               const EpochCallback& on_epoch) {
  require(dim >= 1 && layers >= 0, "lightgcn_fit: bad dimensions");
  const SparseMatrix s = bipartite_laplacian(split.train);
  Rng rng(config.seed);
  Hyperparams shape;
  shape.dim = dim;
  shape.layers = 0;
  LightGcnFitResult result;
  result.embedding = init_params(split.users(), split.items(), shape, rng).base;
  LightGcnObjective objective(result.embedding, s, layers, split.users(), reg_lambda);
  result.run = run_bpr_training(split, objective, config, lr, on_epoch);
  return result;
}

}  // namespace dgcf
