#include <gtest/gtest.h>

#include <random>

#include "ipfnet/feasibility.hpp"
#include "ipfnet/ipf.hpp"
#include "oracles.hpp"

namespace ipfnet {
namespace {

TEST(Feasibility, ToyBlockingSet) {
  auto x = SparseNetwork::from_dense({{1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 1, 1}});
  MarginalPair mp({1, 1, 1, 1}, {1, 1, 2});
  auto flow = check_feasibility(x, mp);
  EXPECT_FALSE(flow.feasible);
  EXPECT_NEAR(flow.max_flow_value, 3.0, 1e-12);
  auto d = find_blocking_set(x, mp, flow);
  EXPECT_EQ(d.rows, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(d.neighbor_cols, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(d.p_sum, 3.0);
  EXPECT_DOUBLE_EQ(d.q_sum, 2.0);
  EXPECT_DOUBLE_EQ(d.delta, 1.0);
  EXPECT_TRUE(verify_blocking(x, mp, d.rows));
}

TEST(Feasibility, FlowMatrixHasTargetMarginals) {
  auto x = SparseNetwork::from_dense({{1, 1, 0}, {0, 1, 1}, {1, 0, 1}});
  MarginalPair mp({2, 3, 1}, {1, 2, 3});
  auto flow = check_feasibility(x, mp);
  ASSERT_TRUE(flow.feasible);
  auto f = flow_matrix(x, flow);
  for (const auto& e : f.entries()) EXPECT_TRUE(x.contains(e.row, e.col));
  MarginalPair got = marginals(f);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got.p()[i], mp.p()[i], 1e-12);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got.q()[j], mp.q()[j], 1e-12);
  EXPECT_THROW(find_blocking_set(x, mp, flow), InputError);
}

TEST(Feasibility, NeighborColumns) {
  auto x = SparseNetwork::from_dense({{1, 0, 0, 1}, {0, 0, 1, 0}, {0, 1, 0, 0}});
  EXPECT_EQ(neighbor_columns(x, std::vector<std::size_t>{0, 1}), (std::vector<std::size_t>{0, 2, 3}));
}

// Exhaustive subset enumeration as the oracle for the max-flow decision.
TEST(Feasibility, MatchesSubsetEnumeration) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 10);
  std::uniform_real_distribution<double> dens(0.15, 0.7);
  std::uniform_int_distribution<int> units(0, 4);
  int infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t m = dim(rng), n = dim(rng);
    auto x = oracle::random_network(rng, m, n, dens(rng));
    // Integer marginals with equal totals so ties (sum p(S) == sum q(N(S)))
    // occur often and exercise the boundary.
    std::vector<double> p(m), q(n, 0.0);
    double total = 0.0;
    for (auto& v : p) {
      v = units(rng);
      total += v;
    }
    if (total == 0.0) continue;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int u = 0; u < static_cast<int>(total); ++u) q[pick(rng)] += 1.0;
    MarginalPair mp(p, q);
    bool expected = oracle::hall_condition_holds(x, mp.p(), mp.q());
    auto flow = check_feasibility(x, mp);
    ASSERT_EQ(flow.feasible, expected) << "trial " << trial;
    if (!expected) {
      ++infeasible;
      auto d = find_blocking_set(x, mp, flow);
      EXPECT_TRUE(verify_blocking(x, mp, d.rows));
      EXPECT_GT(d.delta, 0.0);
      EXPECT_NEAR(d.delta, d.p_sum - d.q_sum, 1e-12);
    }
  }
  EXPECT_GT(infeasible, 30);
}

TEST(Feasibility, AgreesWithIpfOutcome) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = oracle::random_network(rng, 6, 6, 0.35);
    std::vector<double> p(6), q(6);
    for (auto& v : p) v = 0.1 + u(rng);
    double sp = 0.0;
    for (double v : p) sp += v;
    double sq = 0.0;
    for (auto& v : q) sq += (v = 0.1 + u(rng));
    for (auto& v : q) v *= sp / sq;
    MarginalPair mp(p, q);
    bool feasible = check_feasibility(x, mp).feasible;
    try {
      auto res = run_ipf(x, mp);
      if (feasible) {
        EXPECT_NE(res.status, IpfStatus::Oscillating);
      } else {
        EXPECT_NE(res.status, IpfStatus::Converged);
      }
    } catch (const StructuralInfeasibility&) {
      EXPECT_FALSE(feasible);
    }
  }
}

}  // namespace
}  // namespace ipfnet
