#include "dgcf/model.hpp"

#include <cmath>

namespace dgcf {

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "identity"; }

std::string to_string(EmbeddingMode m) {
  return m == EmbeddingMode::Propagated ? "propagated" : "free";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw UserError("unknown activation '" + name + "' (expected relu or identity)");
}

EmbeddingMode parse_embedding_mode(const std::string& name) {
  if (name == "propagated") return EmbeddingMode::Propagated;
  if (name == "free") return EmbeddingMode::Free;
  throw UserError("unknown embedding mode '" + name + "' (expected propagated or free)");
}

std::vector<double> Hyperparams::resolved_layer_weights() const {
  if (!layer_weights.empty()) return layer_weights;
  return std::vector<double>(static_cast<std::size_t>(layers + 1),
                             1.0 / static_cast<double>(layers + 1));
}

void Hyperparams::validate() const {
  require(dim >= 1, "dim must be >= 1");
  require(layers >= 0, "layers must be >= 0");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(layer_weights.empty() || static_cast<Index>(layer_weights.size()) == layers + 1,
          "layer_weights must have layers + 1 entries");
  require(reg_lambda >= 0.0, "reg_lambda must be >= 0");
  require(lr >= 0.0, "lr must be >= 0");
}

ModelParams init_params(Index users, Index items, const Hyperparams& hyper, Rng& rng,
                        double init_std) {
  ModelParams p;
  p.base.resize(users + items, hyper.dim);
  for (Index r = 0; r < p.base.rows(); ++r)
    for (Index c = 0; c < p.base.cols(); ++c) p.base(r, c) = rng.normal(0.0, init_std);
  p.transforms.assign(static_cast<std::size_t>(hyper.layers),
                      DenseMatrix::Zero(hyper.dim, hyper.dim));
  return p;
}

DenseMatrix initial_embedding(const SparseMatrix& s, const DenseMatrix& base) {
  require(s.rows() == s.cols() && s.cols() == base.rows(),
          "initial_embedding: S is " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
              " but W is " + shape_str(base));
  return spmm(s, base);
}

void apply_activation(DenseMatrix& z, Activation activation) {
  if (activation == Activation::Relu) z = z.cwiseMax(0.0);
}

LayerOutput propagate_layer(const DenseMatrix& prev, const DenseMatrix& initial,
                            const SparseMatrix& s, double alpha, double beta,
                            const DenseMatrix& transform, Activation activation) {
  require(prev.rows() == s.rows() && initial.rows() == s.rows() && prev.cols() == initial.cols(),
          "propagate_layer: embedding shapes disagree with S");
  require(transform.rows() == prev.cols() && transform.cols() == prev.cols(),
          "propagate_layer: transform must be d x d");

  LayerOutput out;
  spmm_into(s, prev, out.mixed, 1.0 - alpha);
  if (alpha != 0.0) out.mixed += alpha * initial;

  if (beta == 0.0) {
    out.preact = out.mixed;
  } else {
    DenseMatrix mapping = beta * transform;
    mapping.diagonal().array() += 1.0 - beta;
    out.preact.noalias() = out.mixed * mapping;
  }
  out.output = out.preact;
  apply_activation(out.output, activation);
  if (!out.output.allFinite()) throw DivergenceError("propagate_layer: non-finite embedding");
  return out;
}

DenseMatrix combine_layers(const std::vector<DenseMatrix>& layers,
                           const std::vector<double>& weights) {
  require(!layers.empty() && layers.size() == weights.size(),
          "combine_layers: " + std::to_string(layers.size()) + " layers but " +
              std::to_string(weights.size()) + " weights");
  DenseMatrix out = weights[0] * layers[0];
  for (std::size_t k = 1; k < layers.size(); ++k) out += weights[k] * layers[k];
  return out;
}

ForwardTrace forward(const ModelParams& params, const SparseMatrix& s, const Hyperparams& hyper,
                     Index users, Index items) {
  require(s.rows() == users + items, "forward: S does not match user/item counts");
  require(params.base.rows() == users + items && params.base.cols() == hyper.dim,
          "forward: W has shape " + shape_str(params.base));
  require(static_cast<Index>(params.transforms.size()) == hyper.layers,
          "forward: transform count does not match layer count");

  ForwardTrace trace;
  trace.users = users;
  trace.items = items;
  trace.layers.reserve(static_cast<std::size_t>(hyper.layers + 1));
  trace.layers.push_back(hyper.embedding_mode == EmbeddingMode::Propagated
                             ? initial_embedding(s, params.base)
                             : params.base);
  for (Index l = 0; l < hyper.layers; ++l) {
    LayerOutput step = propagate_layer(trace.layers.back(), trace.layers.front(), s, hyper.alpha,
                                       hyper.beta, params.transforms[l], hyper.activation);
    trace.mixed.push_back(std::move(step.mixed));
    trace.preact.push_back(std::move(step.preact));
    trace.layers.push_back(std::move(step.output));
  }
  trace.combined = combine_layers(trace.layers, hyper.resolved_layer_weights());
  return trace;
}

double predict(const DenseMatrix& combined, Index users, Index u, Index i) {
  const Index items = combined.rows() - users;
  require(u >= 0 && u < users, "predict: user index " + std::to_string(u) + " out of range");
  require(i >= 0 && i < items, "predict: item index " + std::to_string(i) + " out of range");
  return combined.row(u).dot(combined.row(users + i));
}

DenseVector score_all_items(const DenseMatrix& combined, Index users, Index u) {
  require(u >= 0 && u < users, "score_all_items: user index " + std::to_string(u) +
                                   " out of range");
  const Index items = combined.rows() - users;
  DenseVector scores(items);
  const auto user_row = combined.row(u);
  for (Index i = 0; i < items; ++i) scores[i] = user_row.dot(combined.row(users + i));
  return scores;
}

}  // namespace dgcf
