// Convergence certificates for IPF.
//
// IPF converges on (X, p, q) iff some matrix with marginals (p, q) vanishes
// wherever X does. check_feasibility decides this with a maximum flow from a
// source through row nodes (capacity p_i), along the support of X (unbounded
// capacity), and through column nodes (capacity q_j) to a sink. When the flow
// falls short, find_blocking_set extracts a row set S whose total demand
// exceeds the total supply of every column adjacent to S.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ipfnet/network.hpp"

namespace ipfnet {

struct FlowDiagnostics {
  double max_flow_value = 0.0;
  double target = 0.0;             // sum p
  std::vector<double> edge_flows;  // aligned with X.entries()
  std::vector<double> row_flow;
  std::vector<double> col_flow;
  bool feasible = false;
};

struct BlockingDiagnosis {
  std::vector<std::size_t> rows;           // S, ascending
  std::vector<std::size_t> neighbor_cols;  // N_X(S), ascending
  double p_sum = 0.0;
  double q_sum = 0.0;
  double delta = 0.0;  // p_sum - q_sum > 0
};

/// Relative tolerance when comparing the flow value against sum p.
inline constexpr double kFeasibilityRelTol = 1e-9;

FlowDiagnostics check_feasibility(const SparseNetwork& x, const MarginalPair& marg);

/// The flow certificate as a matrix: same zero pattern as X, marginals (p, q)
/// when flow.feasible.
SparseNetwork flow_matrix(const SparseNetwork& x, const FlowDiagnostics& flow);

/// Alternating BFS from the row with the largest unmet demand (ties: lowest
/// index). Rows expand to every adjacent column; columns expand only to rows
/// sending positive flow into them. Throws InputError on feasible input.
BlockingDiagnosis find_blocking_set(const SparseNetwork& x, const MarginalPair& marg,
                                    const FlowDiagnostics& flow);

/// Columns adjacent to any row of S, ascending.
std::vector<std::size_t> neighbor_columns(const SparseNetwork& x,
                                          std::span<const std::size_t> rows);

/// sum_{i in S} p_i > sum_{j in N_X(S)} q_j.
bool verify_blocking(const SparseNetwork& x, const MarginalPair& marg,
                     std::span<const std::size_t> rows);

}  // namespace ipfnet
