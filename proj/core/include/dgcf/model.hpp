#pragma once

#include <string>
#include <vector>

#include "dgcf/common.hpp"
#include "dgcf/graph.hpp"
#include "dgcf/rng.hpp"

namespace dgcf {

enum class Activation { Identity, Relu };

// How E^(0) is obtained from the base weights W.
enum class EmbeddingMode {
  Propagated,  // E^(0) = S W
  Free,        // E^(0) = W
};

std::string to_string(Activation a);
std::string to_string(EmbeddingMode m);
Activation parse_activation(const std::string& name);
EmbeddingMode parse_embedding_mode(const std::string& name);

struct Hyperparams {
  Index dim = 64;
  Index layers = 4;
  // Initial-residual weight on E^(0).
  double alpha = 0.1;
  // Weight of the trainable transform against the identity.
  double beta = 0.1;
  // Readout weights a_0..a_L; empty means uniform 1/(L+1).
  std::vector<double> layer_weights;
  Activation activation = Activation::Relu;
  EmbeddingMode embedding_mode = EmbeddingMode::Propagated;
  double reg_lambda = 1e-4;
  double lr = 1e-3;

  std::vector<double> resolved_layer_weights() const;

  // Throws std::invalid_argument on out-of-range values. alpha and beta
  // must lie in [0, 1]; the open interval is the model's intended regime and
  // the endpoints are reductions used for diagnostics.
  void validate() const;
};

struct ModelParams {
  DenseMatrix base;                      // W, (m+n) x d
  std::vector<DenseMatrix> transforms;   // W^(0)..W^(L-1), each d x d
};

/// W ~ N(0, init_std^2) drawn row-major from rng; every W^(l) starts at zero.
ModelParams init_params(Index users, Index items, const Hyperparams& hyper, Rng& rng,
                        double init_std = 0.1);

struct ForwardTrace {
  std::vector<DenseMatrix> layers;    // E^(0)..E^(L)
  std::vector<DenseMatrix> mixed;     // H^(l) = (1-a) S E^(l-1) + a E^(0), l = 1..L
  std::vector<DenseMatrix> preact;    // Z^(l) = H^(l) ((1-b) I + b W^(l-1)), l = 1..L
  DenseMatrix combined;               // E*
  Index users = 0;
  Index items = 0;
};

DenseMatrix initial_embedding(const SparseMatrix& s, const DenseMatrix& base);

struct LayerOutput {
  DenseMatrix mixed;
  DenseMatrix preact;
  DenseMatrix output;
};

/// One aggregation layer:
///   E^(l) = act(((1-alpha) S E^(l-1) + alpha E^(0)) ((1-beta) I + beta W^(l-1)))
/// Throws DivergenceError if the output is not finite.
LayerOutput propagate_layer(const DenseMatrix& prev, const DenseMatrix& initial,
                            const SparseMatrix& s, double alpha, double beta,
                            const DenseMatrix& transform, Activation activation);

DenseMatrix combine_layers(const std::vector<DenseMatrix>& layers,
                           const std::vector<double>& weights);

ForwardTrace forward(const ModelParams& params, const SparseMatrix& s, const Hyperparams& hyper,
                     Index users, Index items);

/// Inner product of user row u and item row (users + i) of E*.
double predict(const DenseMatrix& combined, Index users, Index u, Index i);

/// All n item scores for user u; entry i equals predict(combined, users, u, i).
DenseVector score_all_items(const DenseMatrix& combined, Index users, Index u);

void apply_activation(DenseMatrix& z, Activation activation);

}  // namespace dgcf
