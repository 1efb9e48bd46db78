#include <benchmark/benchmark.h>

#include "dgcf/dataset.hpp"
#include "dgcf/model.hpp"
#include "dgcf/training.hpp"

namespace {

// A MovieLens-100K-sized synthetic split, built once.
const dgcf::DatasetSplit& corpus() {
  static const dgcf::DatasetSplit split = [] {
    dgcf::SyntheticSpec spec;
    return dgcf::split_train_test(dgcf::k_core_filter(dgcf::generate_synthetic(spec, 7), 10), 0.2, 1);
  }();
  return split;
}

dgcf::Hyperparams hyper_for(benchmark::State& state) {
  dgcf::Hyperparams h;
  h.dim = 64;
  h.layers = state.range(0);
  return h;
}

void BM_Spmm(benchmark::State& state) {
  const auto& split = corpus();
  const dgcf::SparseMatrix s = dgcf::bipartite_laplacian(split.train);
  dgcf::Rng rng(1);
  dgcf::DenseMatrix e(s.rows(), state.range(0));
  for (dgcf::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
  dgcf::DenseMatrix out(s.rows(), e.cols());
  for (auto _ : state) {
    dgcf::spmm_into(s, e, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * s.nnz() * e.cols());
}
BENCHMARK(BM_Spmm)->Arg(16)->Arg(64);

void BM_Forward(benchmark::State& state) {
  const auto& split = corpus();
  const dgcf::SparseMatrix s = dgcf::bipartite_laplacian(split.train);
  const dgcf::Hyperparams h = hyper_for(state);
  dgcf::Rng rng(2);
  const dgcf::ModelParams p = dgcf::init_params(split.users(), split.items(), h, rng);
  for (auto _ : state) {
    auto trace = dgcf::forward(p, s, h, split.users(), split.items());
    benchmark::DoNotOptimize(trace.combined.data());
  }
}
BENCHMARK(BM_Forward)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
  const auto& split = corpus();
  const dgcf::SparseMatrix s = dgcf::bipartite_laplacian(split.train);
  const dgcf::Hyperparams h = hyper_for(state);
  dgcf::Rng rng(3);
  const dgcf::ModelParams p = dgcf::init_params(split.users(), split.items(), h, rng);
  const auto trace = dgcf::forward(p, s, h, split.users(), split.items());
  const auto batch = dgcf::sample_bpr_triples(split, 4096, rng);
  for (auto _ : state) {
    auto g = dgcf::backward(trace, batch, p, s, h);
    benchmark::DoNotOptimize(g.base.data());
  }
}
BENCHMARK(BM_Backward)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
