#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <limits>
#include <set>
#include <sstream>

#include "ipfnet/experiments.hpp"
#include "ipfnet/parallel.hpp"
#include "ipfnet/rng.hpp"
#include "ipfnet/summary.hpp"
#include "ipfnet/synth.hpp"
#include "oracles.hpp"

namespace ipfnet {
namespace {

TEST(Rng, StreamsAreDistinctAndReproducible) {
  auto a = make_rng(1, Stream::Truth, 0);
  auto b = make_rng(1, Stream::Truth, 0);
  auto c = make_rng(1, Stream::Noise, 0);
  auto d = make_rng(1, Stream::Truth, 1);
  auto e = make_rng(2, Stream::Truth, 0);
  std::uint64_t x = a();
  EXPECT_EQ(x, b());
  std::set<std::uint64_t> firsts{x, c(), d(), e()};
  EXPECT_EQ(firsts.size(), 4u);
}

TEST(Synth, SameSeedSameInstance) {
  SynthConfig cfg;
  cfg.m = 30;
  cfg.n = 20;
  cfg.sparsity = 0.3;
  cfg.seed = 42;
  auto a = generate_instance(cfg, NegBinomModel{0.5}, 3);
  auto b = generate_instance(cfg, NegBinomModel{0.5}, 3);
  EXPECT_EQ(a.xbar, b.xbar);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.truth.u, b.truth.u);
  auto c = generate_instance(cfg, NegBinomModel{0.5}, 4);
  EXPECT_NE(a.xbar, c.xbar);
}

TEST(Synth, NoiseLawDoesNotChangeTruth) {
  SynthConfig cfg;
  cfg.m = cfg.n = 25;
  cfg.seed = 3;
  auto p = generate_instance(cfg, PoissonModel{}, 0);
  auto e = generate_instance(cfg, ExponentialModel{}, 0);
  EXPECT_EQ(p.xbar, e.xbar);
  EXPECT_EQ(p.truth.u, e.truth.u);
  EXPECT_EQ(p.truth.v, e.truth.v);
}

TEST(Synth, SparsityZeroesExactCount) {
  SynthConfig cfg;
  cfg.m = 40;
  cfg.n = 30;
  for (double r : {0.0, 0.25, 0.9}) {
    cfg.sparsity = r;
    auto inst = generate_instance(cfg, PoissonModel{}, 0);
    auto zeroed = static_cast<std::size_t>(std::floor(r * 1200.0));
    EXPECT_EQ(inst.xbar.nnz(), 1200u - zeroed);
    for (const auto& e : inst.y.entries()) EXPECT_TRUE(inst.xbar.contains(e.row, e.col));
  }
}

TEST(Synth, ParameterRanges) {
  SynthConfig cfg;
  cfg.m = cfg.n = 50;
  auto inst = generate_instance(cfg, PoissonModel{}, 0);
  for (double f : inst.truth.row_factors()) {
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 4.0);
  }
  for (const auto& e : inst.xbar.entries()) EXPECT_LE(e.weight, 1.0);
  auto m = marginals(inst.y);
  EXPECT_EQ(m.p(), inst.marg.p());
}

TEST(Synth, ConfigValidation) {
  SynthConfig cfg;
  cfg.sparsity = 1.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.param_low = 5.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.m = 0;
  EXPECT_THROW(generate_instance(cfg, PoissonModel{}), InputError);
  EXPECT_THROW(generate_instance(SynthConfig{}, NegBinomModel{1.0}), InputError);
}

TEST(Synth, NegBinomParameterization) {
  auto prm = negbinom_params(4.0, 0.2);
  EXPECT_NEAR(prm.successes, 1.0, 1e-12);
  EXPECT_NEAR(prm.variance, 20.0, 1e-12);
  EXPECT_NEAR(prm.probability, 0.2, 1e-12);
}

// Moments of each noise law at a fixed rate, from many draws of a single cell.
TEST(Synth, NoiseMoments) {
  SynthConfig cfg;
  cfg.m = cfg.n = 100;
  cfg.seed = 8;
  auto check = [&](const GenerativeModel& model, double var_ratio) {
    double sm = 0.0, sr = 0.0, sv = 0.0;
    for (std::uint64_t t = 0; t < 4; ++t) {
      auto inst = generate_instance(cfg, model, t);
      auto rate = rate_matrix(inst.xbar, inst.truth);
      for (const auto& e : rate.entries()) {
        double y = inst.y.at(e.row, e.col);
        sm += y;
        sr += e.weight;
        sv += (y - e.weight) * (y - e.weight) / (var_ratio * e.weight);
      }
    }
    EXPECT_NEAR(sm / sr, 1.0, 0.02) << model_name(model);
    EXPECT_NEAR(sv / 40000.0, 1.0, 0.1) << model_name(model);
  };
  check(PoissonModel{}, 1.0);
  check(NegBinomModel{0.5}, 2.0);
}

TEST(Synth, ModelNames) {
  EXPECT_EQ(model_name(PoissonModel{}), "poisson");
  EXPECT_EQ(model_name(ExponentialModel{}), "exponential");
  EXPECT_EQ(model_name(NegBinomModel{0.8}), "negbinom(0.80)");
  EXPECT_EQ(model_name(InteractionModel{}), "interaction");
}

TEST(Gravity, RecoversKernelParameters) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  const std::size_t m = 60, n = 60;
  std::vector<double> d(m * n);
  for (auto& x : d) x = 0.05 + 2.0 * pos(rng);
  GravityModel truth;
  truth.alpha = -0.5;
  truth.beta = 1.5;
  truth.rows = m;
  truth.cols = n;
  truth.distances = d;
  auto fit = fit_gravity(truth.kernel().scaled(3.0), d, 0.05);
  EXPECT_NEAR(fit.alpha, -0.5, 0.05);
  EXPECT_NEAR(fit.beta, 1.5, 0.05);
}

TEST(Gravity, InferMatchesMarginals) {
  GravityModel gm;
  gm.alpha = -0.5;
  gm.beta = 1.0;
  gm.rows = 3;
  gm.cols = 2;
  gm.distances = effective_distances(std::vector<double>{0, 1, 2, 0.5, 1, 3});
  EXPECT_DOUBLE_EQ(gm.distances[0], 0.25);
  MarginalPair mp({1, 2, 3}, {4, 2});
  auto est = gravity_infer(gm, mp);
  auto got = marginals(est);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got.p()[i], mp.p()[i], 1e-8);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got.q()[j], mp.q()[j], 1e-8);
}

TEST(Gravity, TooFewBins) {
  auto x = SparseNetwork::from_dense({{1, 1}, {1, 1}});
  EXPECT_THROW(fit_gravity(x, std::vector<double>{1, 1, 1, 1}), InputError);
}

TEST(Baselines, MarginalsAndTotals) {
  auto x = SparseNetwork::from_dense({{1, 2, 0}, {0, 1, 1}});
  MarginalPair mp({3, 5}, {2, 4, 2});
  auto r1 = baseline_rank1(mp);
  EXPECT_NEAR(r1.at(1, 1), 5.0 * 4.0 / 8.0, 1e-12);
  auto rs = baseline_row_share(x, mp.p());
  EXPECT_NEAR(rs.row_sums()[0], 3.0, 1e-12);
  EXPECT_NEAR(rs.at(0, 1), 2.0, 1e-12);
  auto cs = baseline_col_share(x, mp.q());
  EXPECT_NEAR(cs.col_sums()[1], 4.0, 1e-12);
  EXPECT_NEAR(baseline_scale(x, 8.0).total(), 8.0, 1e-12);
  EXPECT_THROW(baseline_row_share(x, std::vector<double>{1, 1, 1}), InputError);
}

TEST(Metrics, CosineAndParameterError) {
  auto a = SparseNetwork::from_dense({{1, 0}, {0, 1}});
  auto b = SparseNetwork::from_dense({{0, 1}, {1, 0}});
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a.scaled(3.0)), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.0);
  ScalingParameters truth;
  truth.u = {0.0, std::log(2.0)};
  truth.v = {0.0, 0.0};
  EXPECT_NEAR(l2_param_error(std::vector<double>{5, 10}, std::vector<double>{7, 7}, truth), 0.0, 1e-12);
  EXPECT_GT(l2_param_error(std::vector<double>{1, 1}, std::vector<double>{1, 1}, truth), 0.1);
}

TEST(Summary, PercentileAndSpearman) {
  std::vector<double> v{4, 1, 3, 2, 5};
  EXPECT_DOUBLE_EQ(percentile(v, 50), 3.0);
  EXPECT_DOUBLE_EQ(percentile(v, 25), 2.0);
  EXPECT_DOUBLE_EQ(percentile(v, 10), 1.4);
  EXPECT_DOUBLE_EQ(mean(v), 3.0);
  std::vector<double> y{40, 10, 30, 20, 50};
  EXPECT_DOUBLE_EQ(spearman(v, y), 1.0);
  std::vector<double> inf{1.0, std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity()};
  EXPECT_TRUE(std::isinf(percentile(inf, 97.5)));
}

TEST(Parallel, CoversEveryIndexAndRethrows) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 8, [&](std::size_t k) { hits[k] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 4,
                            [](std::size_t k) {
                              if (k == 7) throw InputError("boom");
                            }),
               InputError);
}

TEST(Experiments, ParallelMatchesSerial) {
  SynthConfig cfg;
  cfg.m = cfg.n = 20;
  cfg.seed = 2;
  ExperimentOptions serial;
  serial.trials = 6;
  ExperimentOptions par = serial;
  par.workers = 4;
  auto a = experiment_sparsity(cfg, {0.0, 0.5}, serial);
  auto b = experiment_sparsity(cfg, {0.0, 0.5}, par);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(a[k].cosine.mean, b[k].cosine.mean);
    EXPECT_EQ(a[k].l2.mean, b[k].l2.mean);
    EXPECT_EQ(a[k].converged, 6u);
  }
  std::ostringstream csv;
  write_experiment_csv(csv, a);
  EXPECT_EQ(csv.str().substr(0, 36), "label,sparsity,trials,converged,iter");
}

}  // namespace
}  // namespace ipfnet
