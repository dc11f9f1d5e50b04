// Iterative proportional fitting (Sinkhorn balancing) of a non-negative
// matrix to prescribed row and column sums.
//
// Odd iterations rescale rows, even iterations rescale columns. Rows and
// columns with a zero target keep a zero factor throughout. The run stops when
// successive scaled matrices agree in l1 (Converged), when iterates two apart
// agree for two consecutive pairs and the max-flow certificate confirms that
// no balanced matrix exists (Oscillating, period-2 limit cycle), or at the
// iteration cap.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ipfnet/network.hpp"

namespace ipfnet {

enum class IpfStatus { Converged, Oscillating, MaxIterations };

std::string to_string(IpfStatus status);

struct IpfConfig {
  /// Absolute threshold on the l1 distance between scaled-matrix iterates.
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
  bool record_trace = true;

  void validate() const;
};

/// The two limit matrices of an oscillating run.
struct AccumulationPair {
  SparseNetwork row_fitted;  // after the last row update: matches p
  SparseNetwork col_fitted;  // after the last column update: matches q
};

struct IpfResult {
  std::vector<double> d0;
  std::vector<double> d1;
  IpfStatus status = IpfStatus::MaxIterations;
  std::size_t iterations = 0;
  /// Marginal l1 error after every iteration (empty unless record_trace).
  std::vector<double> l1_trace;
  std::optional<AccumulationPair> accumulation;
};

/// A row (or column) with positive target has no support on columns (rows)
/// with positive target, so no scaling can reach it. Run the repair step
/// (`ipfnet repair`) to add the missing edges.
class StructuralInfeasibility : public std::runtime_error {
 public:
  enum class Axis { Row, Column };
  StructuralInfeasibility(Axis axis, std::size_t index);
  Axis axis() const { return axis_; }
  std::size_t index() const { return index_; }

 private:
  Axis axis_;
  std::size_t index_;
};

IpfResult run_ipf(const SparseNetwork& x, const MarginalPair& marg, const IpfConfig& cfg = {});

/// diag(d0) * X * diag(d1); zero products are dropped from the support.
SparseNetwork scaled_matrix(const SparseNetwork& x, std::span<const double> d0,
                            std::span<const double> d1);

/// ||Xhat 1 - p||_1 + ||Xhat^T 1 - q||_1.
double l1_marginal_error(const SparseNetwork& xhat, const MarginalPair& marg);

/// Divides each factor vector by the mean of its positive entries.
std::pair<std::vector<double>, std::vector<double>> normalize_factors(
    std::span<const double> d0, std::span<const double> d1);

}  // namespace ipfnet
