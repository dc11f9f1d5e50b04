#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ipfnet/feasibility.hpp"
#include "ipfnet/ipf.hpp"
#include "oracles.hpp"

namespace ipfnet {
namespace {

SparseNetwork toy() { return SparseNetwork::from_dense({{1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 1, 1}}); }
MarginalPair toy_marginals() { return MarginalPair({1, 1, 1, 1}, {1, 1, 2}); }

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t k = 1; k < trace.size(); ++k) {
    if (trace[k] > trace[k - 1] + 1e-12) return false;
  }
  return true;
}

TEST(Ipf, ToyOscillatesWithTwoAccumulationPoints) {
  IpfConfig cfg;
  auto res = run_ipf(toy(), toy_marginals(), cfg);
  EXPECT_EQ(res.status, IpfStatus::Oscillating);
  ASSERT_TRUE(res.accumulation.has_value());
  MarginalPair rm = marginals(res.accumulation->row_fitted);
  MarginalPair cm = marginals(res.accumulation->col_fitted);
  const auto& target = toy_marginals();
  double row_err = 0.0, col_err = 0.0;
  for (std::size_t i = 0; i < 4; ++i) row_err += std::abs(rm.p()[i] - target.p()[i]);
  for (std::size_t j = 0; j < 3; ++j) col_err += std::abs(cm.q()[j] - target.q()[j]);
  EXPECT_LT(row_err, cfg.tolerance);
  EXPECT_LT(col_err, cfg.tolerance);
  EXPECT_TRUE(non_increasing(res.l1_trace));
}

TEST(Ipf, AllOnesConvergesToRankOne) {
  auto x = SparseNetwork::from_dense({{1, 1, 1}, {1, 1, 1}});
  MarginalPair mp({2, 4}, {1, 2, 3});
  auto res = run_ipf(x, mp);
  ASSERT_EQ(res.status, IpfStatus::Converged);
  auto xhat = scaled_matrix(x, res.d0, res.d1);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(xhat.at(i, j), mp.p()[i] * mp.q()[j] / 6.0, 1e-9);
    }
  }
  EXPECT_LT(l1_marginal_error(xhat, mp), 1e-8);
}

TEST(Ipf, ZeroMarginalsGetZeroFactors) {
  auto x = SparseNetwork::from_dense({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  MarginalPair mp({2, 0, 4}, {3, 3, 0});
  auto res = run_ipf(x, mp);
  ASSERT_EQ(res.status, IpfStatus::Converged);
  EXPECT_EQ(res.d0[1], 0.0);
  EXPECT_EQ(res.d1[2], 0.0);
  auto xhat = scaled_matrix(x, res.d0, res.d1);
  EXPECT_EQ(xhat.row(1).size(), 0u);
  EXPECT_LT(l1_marginal_error(xhat, mp), 1e-8);
}

TEST(Ipf, UnreachableRowIsStructurallyInfeasible) {
  auto x = SparseNetwork::from_dense({{1, 0}, {0, 1}});
  MarginalPair mp({1, 1}, {2, 0});
  try {
    run_ipf(x, mp);
    FAIL() << "expected StructuralInfeasibility";
  } catch (const StructuralInfeasibility& e) {
    EXPECT_EQ(e.axis(), StructuralInfeasibility::Axis::Row);
    EXPECT_EQ(e.index(), 1u);
    EXPECT_NE(std::string(e.what()).find("repair"), std::string::npos);
  }
}

TEST(Ipf, ConfigValidation) {
  IpfConfig cfg;
  cfg.max_iterations = 3;
  EXPECT_THROW(run_ipf(toy(), toy_marginals(), cfg), InputError);
  cfg.max_iterations = 100;
  cfg.tolerance = 0.0;
  EXPECT_THROW(run_ipf(toy(), toy_marginals(), cfg), InputError);
}

TEST(Ipf, IterationCapReported) {
  IpfConfig cfg;
  cfg.max_iterations = 4;
  std::mt19937_64 rng(5);
  auto x = oracle::random_network(rng, 10, 10, 0.5);
  std::vector<double> p(10), q(10);
  for (std::size_t k = 0; k < 10; ++k) {
    p[k] = 1.0 + static_cast<double>(k);
    q[k] = 1.0 + static_cast<double>(9 - k);
  }
  try {
    auto res = run_ipf(x, MarginalPair(p, q), cfg);
    EXPECT_NE(res.status, IpfStatus::Converged);
    EXPECT_LE(res.iterations, 4u);
  } catch (const StructuralInfeasibility&) {
  }
}

// Marginals of Y = A X B are always reachable on X's support, and the balanced
// matrix is unique, so IPF must recover Y itself.
TEST(Ipf, RecoversDiagonallyScaledMatrix) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> f(0.2, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = oracle::random_network(rng, 15, 12, 0.6);
    std::vector<double> a(15), b(12);
    for (auto& v : a) v = f(rng);
    for (auto& v : b) v = f(rng);
    auto y = scaled_matrix(x, a, b);
    auto res = run_ipf(x, marginals(y));
    ASSERT_EQ(res.status, IpfStatus::Converged);
    auto xhat = scaled_matrix(x, res.d0, res.d1);
    double num = 0.0, den = 0.0;
    for (const auto& e : y.entries()) {
      num += std::pow(xhat.at(e.row, e.col) - e.weight, 2);
      den += e.weight * e.weight;
    }
    EXPECT_LT(std::sqrt(num / den), 1e-8) << "trial " << trial;
    EXPECT_TRUE(non_increasing(res.l1_trace));
  }
}

TEST(Ipf, AggregateOfSeriesAlwaysConverges) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkSeries s;
    for (int t = 0; t < 4; ++t) {
      s.timesteps.push_back(std::to_string(t));
      s.slices.push_back(oracle::random_network(rng, 8, 8, 0.3));
    }
    auto xbar = aggregate(s);
    for (const auto& slice : s.slices) {
      if (slice.empty()) continue;
      EXPECT_EQ(run_ipf(xbar, marginals(slice)).status, IpfStatus::Converged);
    }
  }
}

// Feasible inputs whose balanced limit has forced zeros converge slowly; the
// period-2 test alone would misfire on them.
TEST(Ipf, SlowFeasibleRunIsNotCalledOscillating) {
  auto x = SparseNetwork::from_dense({{1, 0, 0.01}, {1, 1, 0}, {0, 1, 0}, {0, 1, 1}});
  ASSERT_TRUE(check_feasibility(x, toy_marginals()).feasible);
  IpfConfig cfg;
  cfg.max_iterations = 200000;
  auto res = run_ipf(x, toy_marginals(), cfg);
  EXPECT_NE(res.status, IpfStatus::Oscillating);
  EXPECT_TRUE(non_increasing(res.l1_trace));
}

TEST(Ipf, NormalizeFactorsUsesPositiveMean) {
  auto [a, b] = normalize_factors(std::vector<double>{2, 0, 4}, std::vector<double>{1, 3});
  EXPECT_DOUBLE_EQ(a[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
  EXPECT_DOUBLE_EQ(a[2], 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(b[0], 0.5);
  EXPECT_DOUBLE_EQ(b[1], 1.5);
}

TEST(Ipf, StatusNames) {
  EXPECT_EQ(to_string(IpfStatus::Converged), "converged");
  EXPECT_EQ(to_string(IpfStatus::Oscillating), "oscillating");
  EXPECT_EQ(to_string(IpfStatus::MaxIterations), "max_iterations");
}

}  // namespace
}  // namespace ipfnet
