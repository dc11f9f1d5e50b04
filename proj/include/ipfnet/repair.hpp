// ConvIPF: make an IPF instance feasible by adding a few small edges.
//
// Each round finds one blocking row set S (feasibility.hpp), then connects a
// row of S to columns outside N_X(S) whose supply covers the gap delta. Two
// objectives choose those columns: the fewest edges, or the smallest first-
// order increase of the leading eigenvalue of the bipartite adjacency matrix.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipfnet/feasibility.hpp"
#include "ipfnet/network.hpp"
#include "ipfnet/spectral.hpp"

namespace ipfnet {

enum class RepairObjective { MinEdges, MinLambda1 };
enum class RowTiebreak { LargestP, SmallestP };

std::string to_string(RepairObjective objective);
std::string to_string(RowTiebreak tiebreak);

struct RepairConfig {
  RepairObjective objective = RepairObjective::MinLambda1;
  RowTiebreak tiebreak = RowTiebreak::LargestP;
  /// Added edges get weight edge_weight_multiplier * (smallest entry of the
  /// input network).
  double edge_weight_multiplier = 0.01;
  std::size_t knapsack_resolution = 1'000'000;
  /// Zero means m * n.
  std::size_t max_rounds = 0;
  /// MinLambda1 only: attach edges to this row instead of argmin u1 over S.
  /// Must belong to S in the round where it is used.
  std::optional<std::size_t> forced_row;

  void validate() const;
};

struct EdgeAdditionSet {
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (row, col)
  double weight = 0.0;
  /// First-order eigenvalue change sum_j w u1(i*) v1(j); MinLambda1 only.
  double estimated_dlambda1 = 0.0;
};

struct RepairRound {
  BlockingDiagnosis blocking;
  EdgeAdditionSet additions;
};

struct RepairReport {
  std::size_t rounds = 0;
  std::size_t total_edges_added = 0;
  std::vector<RepairRound> history;
  double lambda1_before = 0.0;
  double lambda1_after = 0.0;
  double exact_dlambda1 = 0.0;
  SparseNetwork final_network;
};

/// Columns of the complement of N_X(S) with the largest q (ties: lowest
/// index), the shortest prefix whose supply reaches delta, all attached to one
/// row of S picked by `tiebreak` (ties: lowest index). `weight` is left at 0
/// for the caller to set.
EdgeAdditionSet unblock_min_edges(const SparseNetwork& x, const MarginalPair& marg,
                                  const BlockingDiagnosis& diag, RowTiebreak tiebreak);

/// Row argmin_{i in S} u1(i) (or cfg.forced_row), columns chosen by
/// knapsack_min_cover over the complement of N_X(S) with values v1(j) and
/// weights q_j. `weight` is the added-edge weight used for the estimate.
EdgeAdditionSet perron_addition(const SparseNetwork& x, const MarginalPair& marg,
                                const BlockingDiagnosis& diag, const SpectralInfo& spec,
                                const RepairConfig& cfg, double weight);

/// Index set J minimizing sum(values[J]) subject to sum(weights[J]) >= threshold.
/// Solved as the complementary knapsack (keep out a maximum-value set whose
/// weight is at most sum(weights) - threshold) by dynamic programming on
/// weights rounded up to `resolution` units of that capacity, followed by an
/// exact check against the real-valued constraint. Returned ascending.
std::vector<std::size_t> knapsack_min_cover(std::span<const double> values,
                                            std::span<const double> weights, double threshold,
                                            std::size_t resolution = 1'000'000);

/// X with uniform-weight edges added at the given coordinates (which must be
/// currently absent).
SparseNetwork add_edges(const SparseNetwork& x,
                        std::span<const std::pair<std::size_t, std::size_t>> edges,
                        double weight);

/// Repeats feasibility check, blocking-set extraction and edge addition until
/// the instance is feasible. Throws ConvergenceError past max_rounds.
RepairReport conv_ipf(const SparseNetwork& x, const MarginalPair& marg, const RepairConfig& cfg = {});

/// Every absent entry set to fill.
SparseNetwork fill_all_zeros(const SparseNetwork& x, double fill);

}  // namespace ipfnet
