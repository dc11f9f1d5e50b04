// Statistics of the biproportional Poisson model
//
//   Y_ij ~ Poisson(exp(u_i) * Xbar_ij * exp(-v_j))   for Xbar_ij > 0,
//
// whose sufficient statistics are the marginals (p, q) of Y. IPF factors map
// to parameters as d0 = exp(u), d1 = exp(-v). The likelihood is invariant
// under (u + c, v + c); a normalization picks one representative.
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ipfnet/ipf.hpp"
#include "ipfnet/network.hpp"
#include "ipfnet/spectral.hpp"

namespace ipfnet {

enum class Normalization {
  /// sum(u) + sum(v) = 0 over finite coordinates.
  SumZero,
  /// mean exp(u) over the p-support is 1 and mean exp(-v) over the q-support
  /// is 1. This drops the overall rate level, so it is a comparison
  /// convention rather than a gauge choice.
  MeanOneExp,
};

/// Parameters of the model. Rows with p_i = 0 carry u_i = -inf and columns
/// with q_j = 0 carry v_j = +inf (zero scaling factor).
struct ScalingParameters {
  std::vector<double> u;
  std::vector<double> v;
  Normalization normalization = Normalization::SumZero;

  static ScalingParameters from_factors(std::span<const double> d0, std::span<const double> d1,
                                        Normalization norm = Normalization::SumZero);
  std::vector<double> row_factors() const;  // exp(u)
  std::vector<double> col_factors() const;  // exp(-v)
};

ScalingParameters normalized(const ScalingParameters& params, Normalization norm);

/// sum_i p_i u_i - sum_j q_j v_j - sum_ij Xbar_ij exp(u_i - v_j) over the
/// support of Xbar. Throws InputError when a finite |u_i - v_j| exceeds 700.
double log_likelihood(const SparseNetwork& xbar, const MarginalPair& marg,
                      const ScalingParameters& params);

/// Gradient of the negative log-likelihood:
///   d/du_i =  sum_j Xbar_ij exp(u_i - v_j) - p_i
///   d/dv_j = -sum_i Xbar_ij exp(u_i - v_j) + q_j
std::pair<std::vector<double>, std::vector<double>> neg_ll_gradient(
    const SparseNetwork& xbar, const MarginalPair& marg, const ScalingParameters& params);

/// exp(u_i) Xbar_ij exp(-v_j) on the support of Xbar.
SparseNetwork rate_matrix(const SparseNetwork& xbar, const ScalingParameters& params);

struct GlmFit {
  ScalingParameters params;
  double loglik = 0.0;
  std::vector<double> ci_lower_u, ci_upper_u;
  std::vector<double> ci_lower_v, ci_upper_v;
  double ci_level = 0.95;
  bool converged = false;
  std::size_t newton_iterations = 0;
};

/// Maximum-likelihood fit by damped Newton on the negative log-likelihood,
/// independent of IPF. The Hessian is the bipartite Laplacian of the rate
/// matrix; steps are solved on the complement of the all-ones direction.
/// Wald intervals use the pseudo-inverse of the Hessian at the optimum.
/// Throws InputError on infeasible or disconnected input and ConvergenceError
/// at the iteration cap.
GlmFit mle_newton(const SparseNetwork& xbar, const MarginalPair& marg,
                  Normalization norm = Normalization::SumZero, double ci_level = 0.95);

struct ErrorBoundReport {
  double kappa = 0.0;   // total rate
  double B = 0.0;
  double lambda2 = 0.0; // Fiedler value of L(Xbar)
  double bound = 0.0;   // 8 exp(4B) kappa / lambda2^2, +inf when disconnected
  double M = 0.0;       // max row/column sum of the rate matrix
  bool connected = false;

  /// kappa / lambda2^2, the bound without constants.
  double constant_free() const;
};

ErrorBoundReport error_bound(const SparseNetwork& xbar, const ScalingParameters& truth, double B);

struct FiniteMleCondition {
  bool holds = false;
  double lambda2_star = 0.0;  // Fiedler value of the rate-matrix Laplacian
  double threshold = 0.0;     // 8 log(m + n)
};

FiniteMleCondition finite_mle_condition(const SparseNetwork& xbar, const ScalingParameters& truth);

struct FitDiagnostics {
  /// Pearson residuals aligned with the fitted network's entries (the
  /// observation set D = support of the fit).
  std::vector<double> pearson_residuals;
  double dispersion = 0.0;
  std::size_t observation_count = 0;
};

/// Pearson residuals (Y - Xhat) / sqrt(Xhat) over the support of Xhat and the
/// dispersion sum(r^2) / (|D| - m - n).
FitDiagnostics fit_diagnostics(const SparseNetwork& y, const SparseNetwork& xhat);

struct PercentileSummary {
  double p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
  std::size_t count = 0;
};

/// For each (i, j) in the support, sum_t d0_i(t) d1_j(t), divided by the
/// median over pairs; returns the 5/25/50/75/95th percentiles.
PercentileSummary stationarity_check(std::span<const IpfResult> results,
                                     const SparseNetwork& support);

}  // namespace ipfnet
