#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ipfnet/spectral.hpp"
#include "oracles.hpp"

namespace ipfnet {
namespace {

SparseNetwork ones(std::size_t m, std::size_t n) {
  return SparseNetwork::from_dense(m, n, std::vector<double>(m * n, 1.0));
}

TEST(Spectral, AllOnesFiedlerIsMinDimension) {
  for (std::size_t m : {1u, 2u, 7u, 20u, 50u}) {
    for (std::size_t n : {1u, 3u, 20u, 50u}) {
      if (m + n < 3) continue;
      auto s = bipartite_laplacian_fiedler(ones(m, n));
      EXPECT_TRUE(s.connected);
      EXPECT_NEAR(s.lambda2, static_cast<double>(std::min(m, n)), 1e-8) << m << "x" << n;
    }
  }
}

TEST(Spectral, FiedlerMatchesDenseSolver) {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto w = oracle::random_network(rng, 4 + trial % 13, 3 + trial % 11, 0.45, 0.01, 3.0);
    auto ev = oracle::laplacian_eigenvalues(w);
    auto s = bipartite_laplacian_fiedler(w);
    if (!is_connected(w)) {
      EXPECT_EQ(s.lambda2, 0.0);
      continue;
    }
    ++checked;
    EXPECT_NEAR(s.lambda2, ev(1), 1e-9 * std::max(1.0, ev(1))) << "trial " << trial;
  }
  EXPECT_GT(checked, 30);
}

TEST(Spectral, FiedlerIsHomogeneous) {
  std::mt19937_64 rng(4);
  auto w = oracle::random_network(rng, 30, 25, 0.3);
  ASSERT_TRUE(is_connected(w));
  double base = bipartite_laplacian_fiedler(w).lambda2;
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    double scaled = bipartite_laplacian_fiedler(w.scaled(c)).lambda2;
    EXPECT_NEAR(scaled / (c * base), 1.0, 1e-9);
  }
}

TEST(Spectral, DisconnectedIsZero) {
  auto w = SparseNetwork::from_dense({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  EXPECT_FALSE(is_connected(w));
  EXPECT_LT(bipartite_laplacian_fiedler(w).lambda2, 1e-10);
  auto isolated = SparseNetwork::from_dense({{1, 1}, {0, 0}});
  EXPECT_FALSE(is_connected(isolated));
  EXPECT_EQ(bipartite_laplacian_fiedler(isolated).lambda2, 0.0);
}

TEST(Spectral, PerronMatchesTopSingularValue) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    auto w = oracle::random_network(rng, 3 + trial % 9, 2 + trial % 7, 0.5);
    if (w.empty()) continue;
    auto s = perron_spectral(w);
    EXPECT_NEAR(s.lambda1, oracle::top_singular_value(w), 1e-9 * s.lambda1);
    EXPECT_NEAR(leading_eigenvalue(w), s.lambda1, 1e-9 * s.lambda1);
    double nu = 0.0, nv = 0.0;
    for (double x : s.u1) {
      EXPECT_GE(x, 0.0);
      nu += x * x;
    }
    for (double x : s.v1) {
      EXPECT_GE(x, 0.0);
      nv += x * x;
    }
    EXPECT_NEAR(nu, 1.0, 1e-9);
    EXPECT_NEAR(nv, 1.0, 1e-9);
  }
}

TEST(Spectral, ToyPerronValue) {
  auto w = SparseNetwork::from_dense({{1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 1, 1}});
  EXPECT_NEAR(leading_eigenvalue(w), oracle::top_singular_value(w), 1e-12);
}

}  // namespace
}  // namespace ipfnet
