#include <doctest.h>

#include <cmath>

#include "dgcf/training.hpp"
#include "oracles.hpp"

using namespace dgcf;

namespace {

struct Problem {
  InteractionMatrix r;
  SparseMatrix s;
  Hyperparams hyper;
  ModelParams params;
  std::vector<BprTriple> batch;

  double loss(const ModelParams& p) const {
    return bpr_loss(forward(p, s, hyper, r.users(), r.items()), batch, hyper.reg_lambda, p);
  }
  GradientSet analytic() const {
    return backward(forward(params, s, hyper, r.users(), r.items()), batch, params, s, hyper);
  }
};

double min_abs_preact(const Problem& p) {
  const auto trace = forward(p.params, p.s, p.hyper, p.r.users(), p.r.items());
  double v = std::numeric_limits<double>::infinity();
  for (const auto& z : trace.preact) v = std::min(v, z.cwiseAbs().minCoeff());
  return v;
}

Problem make_problem(std::uint64_t seed, Index m, Index n, Index d, Index layers, Activation act,
                     EmbeddingMode mode) {
  Rng rng(seed);
  Problem p;
  p.r = oracle::random_interactions(m, n, 0.45, rng);
  p.s = bipartite_laplacian(p.r);
  p.hyper.dim = d;
  p.hyper.layers = layers;
  p.hyper.alpha = 0.1 + 0.3 * rng.uniform01();
  p.hyper.beta = 0.1 + 0.3 * rng.uniform01();
  p.hyper.activation = act;
  p.hyper.embedding_mode = mode;
  p.hyper.reg_lambda = 0.01;
  p.hyper.layer_weights.clear();
  for (Index k = 0; k <= layers; ++k) p.hyper.layer_weights.push_back(0.2 + rng.uniform01());
  p.params.base = oracle::random_dense(m + n, d, rng);
  for (Index l = 0; l < layers; ++l) p.params.transforms.push_back(oracle::random_dense(d, d, rng, 0.7));
  p.batch = oracle::random_batch(p.r, 6, rng);
  return p;
}

}  // namespace

TEST_CASE("softplus and sigmoid are stable") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(softplus(-800.0)));
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("bpr_loss") {
  // One user and two items with controllable scores; d = 1, free E0, L = 0.
  auto setup = [](double pos_score, double neg_score) {
    Problem p;
    p.r = InteractionMatrix(1, 2, {{0, 0}});
    p.s = bipartite_laplacian(p.r);
    p.hyper.dim = 1;
    p.hyper.layers = 0;
    p.hyper.embedding_mode = EmbeddingMode::Free;
    p.hyper.reg_lambda = 0.0;
    p.params.base = DenseMatrix(3, 1);
    p.params.base << 1.0, pos_score, neg_score;
    p.batch = {{0, 0, 1}};
    return p;
  };
  SUBCASE("equal scores give ln 2") {
    const Problem p = setup(0.4, 0.4);
    CHECK(p.loss(p.params) == doctest::Approx(0.693147180559945).epsilon(1e-12));
  }
  SUBCASE("margin ln 3 gives -ln 0.75") {
    const Problem p = setup(std::log(3.0), 0.0);
    CHECK(p.loss(p.params) == doctest::Approx(0.287682072451781).epsilon(1e-12));
  }
  SUBCASE("large margins leave only the regularizer") {
    Problem p = setup(1e6, 0.0);
    CHECK(p.loss(p.params) == doctest::Approx(0.0));
    double prev = 1e9;
    for (double margin : {-5.0, -1.0, 0.0, 1.0, 5.0, 20.0}) {
      const Problem q = setup(margin, 0.0);
      const double l = q.loss(q.params);
      CHECK(l < prev);
      prev = l;
    }
    p.hyper.reg_lambda = 0.5;
    CHECK(p.loss(p.params) == doctest::Approx(0.5 * (1.0 + 1e12)));
  }
  SUBCASE("empty batch") {
    Problem p = setup(0.0, 0.0);
    p.batch.clear();
    CHECK_THROWS_AS(p.loss(p.params), std::invalid_argument);
  }
}

TEST_CASE("backward edge cases") {
  SUBCASE("identical positive and negative embeddings cancel") {
    Problem p = make_problem(3, 3, 4, 2, 2, Activation::Identity, EmbeddingMode::Free);
    p.hyper.reg_lambda = 0.0;
    p.batch = {{0, 1, 1}, {2, 3, 3}};  // i == j: the margin is identically zero
    const GradientSet g = p.analytic();
    CHECK(g.max_abs() == 0.0);
  }
  SUBCASE("pure L2 when the ranking term is flat") {
    Problem p = make_problem(4, 3, 4, 2, 2, Activation::Relu, EmbeddingMode::Propagated);
    p.hyper.reg_lambda = 0.3;
    p.batch = {{1, 0, 0}};
    const GradientSet g = p.analytic();
    CHECK(g.base == 2.0 * 0.3 * p.params.base);
    for (std::size_t l = 0; l < g.transforms.size(); ++l)
      CHECK(g.transforms[l] == 2.0 * 0.3 * p.params.transforms[l]);
  }
}

TEST_CASE("finite_diff_grad on known functions") {
  ModelParams p;
  p.base = DenseMatrix(1, 2);
  p.base << 1.0, 2.0;
  const GradientSet q = finite_diff_grad(p, [](const ModelParams& x) { return x.base.squaredNorm(); }, 1e-6);
  CHECK(std::abs(q.base(0, 0) - 2.0) <= 1e-8);
  CHECK(std::abs(q.base(0, 1) - 4.0) <= 1e-8);
  const GradientSet c = finite_diff_grad(p, [](const ModelParams&) { return 3.5; }, 1e-6);
  CHECK(c.max_abs() <= 1e-10);
}

TEST_CASE("backward matches central finite differences") {
  struct Shape {
    Index m, n, d, layers;
  };
  for (const Shape shape : {Shape{3, 4, 2, 2}, Shape{5, 5, 3, 3}}) {
    for (Activation act : {Activation::Identity, Activation::Relu}) {
      for (EmbeddingMode mode : {EmbeddingMode::Propagated, EmbeddingMode::Free}) {
        int accepted = 0;
        for (std::uint64_t seed = 1; accepted < 5; ++seed) {
          const Problem p = make_problem(seed, shape.m, shape.n, shape.d, shape.layers, act, mode);
          if (act == Activation::Relu && min_abs_preact(p) < 1e-3) continue;  // stay off the kink
          ++accepted;
          const GradientSet analytic = p.analytic();
          const GradientSet numeric =
              finite_diff_grad(p.params, [&](const ModelParams& x) { return p.loss(x); }, 1e-6);
          CAPTURE(seed);
          CAPTURE(to_string(act));
          CAPTURE(to_string(mode));
          CHECK(oracle::max_relative_error(analytic, numeric, 1e-4) <= 1e-4);
        }
      }
    }
  }
}

TEST_CASE("loss is invariant under consistent relabeling") {
  Problem p = make_problem(9, 4, 5, 2, 2, Activation::Relu, EmbeddingMode::Propagated);
  const Index m = 4;
  const Index n = 5;
  const std::vector<Index> user_perm{2, 0, 3, 1};
  const std::vector<Index> item_perm{4, 2, 0, 1, 3};
  std::vector<std::pair<Index, Index>> pairs;
  for (Index u = 0; u < m; ++u)
    for (Index i : p.r.row(u)) pairs.emplace_back(user_perm[u], item_perm[i]);
  Problem q = p;
  q.r = InteractionMatrix(m, n, pairs);
  q.s = bipartite_laplacian(q.r);
  for (Index u = 0; u < m; ++u) q.params.base.row(user_perm[u]) = p.params.base.row(u);
  for (Index i = 0; i < n; ++i) q.params.base.row(m + item_perm[i]) = p.params.base.row(m + i);
  for (auto& t : q.batch) t = {user_perm[t.user], item_perm[t.positive], item_perm[t.negative]};
  CHECK(q.loss(q.params) == doctest::Approx(p.loss(p.params)).epsilon(1e-13));
}

TEST_CASE("optimizer steps") {
  SUBCASE("sgd") {
    DenseMatrix theta = DenseMatrix::Constant(1, 1, 1.0);
    const DenseMatrix g = DenseMatrix::Constant(1, 1, 2.0);
    Optimizer opt(OptimizerKind::Sgd, 0.1);
    opt.step({&theta}, {&g});
    CHECK(theta(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("zero gradient leaves parameters") {
    for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
      DenseMatrix theta = DenseMatrix::Constant(2, 2, 1.5);
      const DenseMatrix g = DenseMatrix::Zero(2, 2);
      Optimizer opt(kind, 0.1);
      opt.step({&theta}, {&g});
      CHECK(theta == DenseMatrix::Constant(2, 2, 1.5));
    }
  }
  SUBCASE("adam first step is lr * g / (|g| + eps)") {
    DenseMatrix theta = DenseMatrix::Zero(2, 3);
    const DenseMatrix g = DenseMatrix::Ones(2, 3);
    Optimizer opt(OptimizerKind::Adam, 0.01, 0.9, 0.999, 1e-8);
    opt.step({&theta}, {&g});
    // m_hat = 1, v_hat = 1, update = 0.01 / (1 + 1e-8)
    const double expected = -0.01 / (1.0 + 1e-8);
    CHECK((theta.array() - expected).abs().maxCoeff() <= 1e-15);
  }
  SUBCASE("adam second step matches the recurrence") {
    DenseMatrix theta = DenseMatrix::Zero(1, 1);
    const DenseMatrix g1 = DenseMatrix::Constant(1, 1, 1.0);
    const DenseMatrix g2 = DenseMatrix::Constant(1, 1, -2.0);
    Optimizer opt(OptimizerKind::Adam, 0.1, 0.9, 0.999, 1e-8);
    opt.step({&theta}, {&g1});
    opt.step({&theta}, {&g2});
    const double m2 = 0.9 * 0.1 + 0.1 * -2.0;
    const double v2 = 0.999 * 0.001 + 0.001 * 4.0;
    const double mh = m2 / (1 - 0.81);
    const double vh = v2 / (1 - 0.999 * 0.999);
    const double expected = -0.1 / (1 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(theta(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("shape mismatch") {
    DenseMatrix theta = DenseMatrix::Zero(1, 2);
    const DenseMatrix g = DenseMatrix::Zero(2, 1);
    Optimizer opt(OptimizerKind::Sgd, 0.1);
    CHECK_THROWS_AS(opt.step({&theta}, {&g}), std::invalid_argument);
  }
}

TEST_CASE("one small sgd step lowers a single triple's loss") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Problem p = make_problem(seed, 4, 5, 3, 2, Activation::Identity, EmbeddingMode::Propagated);
    p.hyper.reg_lambda = 0.0;
    p.batch.resize(1);
    const double before = p.loss(p.params);
    const GradientSet g = p.analytic();
    Optimizer opt(OptimizerKind::Sgd, 1e-4);
    optimizer_step(p.params, g, opt);
    CAPTURE(seed);
    CHECK(p.loss(p.params) < before);
  }
}

namespace {

DatasetSplit planted_blocks() {
  // Two communities of 10 users x 10 items, dense inside, nothing across.
  RawInteractions raw;
  for (int u = 0; u < 20; ++u)
    for (int i = 0; i < 20; ++i)
      if ((u < 10) == (i < 10)) raw.pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
  return split_train_test(k_core_filter(raw, 10), 0.2, 1);
}

}  // namespace

TEST_CASE("fit") {
  const DatasetSplit split = planted_blocks();
  Hyperparams hyper;
  hyper.dim = 8;
  hyper.layers = 2;
  TrainConfig config;
  config.batch_size = 64;
  config.seed = 5;

  SUBCASE("lr = 0 keeps the initialization") {
    hyper.lr = 0.0;
    config.epochs = 1;
    Rng rng(config.seed);
    const ModelParams init = init_params(split.users(), split.items(), hyper, rng);
    const FitResult r = fit(split, hyper, config);
    CHECK(r.params.base == init.base);
    CHECK(r.run.log.size() == 1);
  }
  SUBCASE("deterministic for a seed") {
    config.epochs = 3;
    const FitResult a = fit(split, hyper, config);
    const FitResult b = fit(split, hyper, config);
    CHECK(a.params.base == b.params.base);
    CHECK(a.params.transforms == b.params.transforms);
    CHECK(a.run.log.back().loss == b.run.log.back().loss);
  }
  SUBCASE("loss falls over 50 epochs on planted blocks") {
    config.epochs = 50;
    hyper.lr = 0.01;
    const FitResult r = fit(split, hyper, config);
    CHECK(r.run.log.back().loss < r.run.log.front().loss);
  }
  SUBCASE("validation and early stopping restore the best epoch") {
    config.epochs = 40;
    config.eval_every = 1;
    config.early_stop_patience = 2;
    hyper.lr = 0.05;
    const FitResult r = fit(split, hyper, config);
    CHECK(r.run.best_epoch >= 1);
    for (const auto& rec : r.run.log) CHECK(rec.recall.has_value());
    const std::string json = r.run.log.front().to_json(20);
    CHECK(json.find("\"recall@20\"") != std::string::npos);
    CHECK(json.find("\"wall_ms\"") != std::string::npos);
  }
}
