#pragma once

#include "dgcf/common.hpp"
#include "dgcf/dataset.hpp"
#include "dgcf/graph.hpp"
#include "dgcf/training.hpp"

namespace dgcf {

// BPR matrix factorization.
struct MfParams {
  DenseMatrix users;  // P, m x d
  DenseMatrix items;  // Q, n x d

  // [P; Q], the layout every ranking routine expects.
  DenseMatrix stacked() const;
};

MfParams init_mf_params(Index users, Index items, Index dim, Rng& rng, double init_std = 0.1);

double bprmf_predict(const MfParams& mf, Index u, Index i);

/// Mean batch BPR loss plus reg_lambda * (|P|_F^2 + |Q|_F^2).
double bprmf_loss(const MfParams& mf, const std::vector<BprTriple>& batch, double reg_lambda);

/// Closed-form gradient of bprmf_loss, written into grad_p and grad_q.
void bprmf_gradient(const MfParams& mf, const std::vector<BprTriple>& batch, double reg_lambda,
                    DenseMatrix& grad_p, DenseMatrix& grad_q);

struct MfFitResult {
  MfParams params;
  TrainingRun run;
};

/// Same sampler, optimizer, and seeding as fit().
MfFitResult bprmf_fit(const DatasetSplit& split, Index dim, double lr, double reg_lambda,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Linear propagation E^(l) = S E^(l-1) over a free embedding table, read out
/// as the uniform mean of E^(0)..E^(L).
DenseMatrix lightgcn_forward(const DenseMatrix& initial, const SparseMatrix& s, Index layers);

struct LightGcnFitResult {
  DenseMatrix embedding;  // E^(0), (m+n) x d
  TrainingRun run;
};

/// Trains the free embedding table under lightgcn_forward with the BPR loss
/// and reg_lambda * |E^(0)|_F^2.
LightGcnFitResult lightgcn_fit(const DatasetSplit& split, Index dim, Index layers, double lr,
                               double reg_lambda, const TrainConfig& config,
                               const EpochCallback& on_epoch = {});

}  // namespace dgcf
