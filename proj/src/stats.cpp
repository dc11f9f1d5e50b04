#include "ipfnet/stats.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ipfnet/feasibility.hpp"
#include "ipfnet/summary.hpp"

namespace ipfnet {

namespace {

constexpr double kMaxExponent = 700.0;
constexpr std::size_t kNewtonCap = 200;

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::VectorXd;

double checked_rate(double xbar, double u, double v) {
  double e = u - v;
  if (std::isfinite(e) && std::abs(e) > kMaxExponent) {
    throw InputError("exponent u_i - v_j out of range (|u_i - v_j| > 700)");
  }
  return xbar * std::exp(e);
}

void check_dims(const SparseNetwork& xbar, const ScalingParameters& params) {
  if (params.u.size() != xbar.rows() || params.v.size() != xbar.cols()) {
    throw InputError("parameter lengths do not match network dimensions");
  }
}

void check_dims(const SparseNetwork& xbar, const MarginalPair& marg) {
  if (marg.rows() != xbar.rows() || marg.cols() != xbar.cols()) {
    throw InputError("marginals do not match network dimensions");
  }
}

double z_for_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0, 1)");
  // Inverse normal CDF by bisection on erfc; plenty fast for a single call.
  double target = (1.0 - level) / 2.0;
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Negative log-likelihood on the reduced coordinates (rows with p > 0, then
// columns with q > 0). Returns +inf when an exponent leaves the safe range.
struct Reduced {
  std::vector<std::size_t> row_of;  // reduced row -> original
  std::vector<std::size_t> col_of;
  std::vector<Entry> entries;       // reduced indices
  std::vector<double> p, q;

  std::size_t dim() const { return row_of.size() + col_of.size(); }

  double objective(const VectorXd& theta) const {
    const std::size_t mr = row_of.size();
    long double f = 0.0L;
    for (std::size_t i = 0; i < mr; ++i) f -= p[i] * theta(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < col_of.size(); ++j) {
      f += q[j] * theta(static_cast<Eigen::Index>(mr + j));
    }
    for (const auto& e : entries) {
      double ex = theta(static_cast<Eigen::Index>(e.row)) -
                  theta(static_cast<Eigen::Index>(mr + e.col));
      if (ex > kMaxExponent) return std::numeric_limits<double>::infinity();
      f += e.weight * std::exp(ex);
    }
    return static_cast<double>(f);
  }

  // Gradient and rates at theta.
  VectorXd gradient(const VectorXd& theta, std::vector<double>& rates) const {
    const std::size_t mr = row_of.size();
    VectorXd g = VectorXd::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < mr; ++i) g(static_cast<Eigen::Index>(i)) = -p[i];
    for (std::size_t j = 0; j < col_of.size(); ++j) g(static_cast<Eigen::Index>(mr + j)) = q[j];
    rates.resize(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      auto r = static_cast<Eigen::Index>(e.row);
      auto c = static_cast<Eigen::Index>(mr + e.col);
      double rate = e.weight * std::exp(theta(r) - theta(c));
      rates[k] = rate;
      g(r) += rate;
      g(c) -= rate;
    }
    return g;
  }

  // Laplacian of the rate matrix with the last coordinate removed.
  SpMat grounded_hessian(const std::vector<double>& rates) const {
    const std::size_t mr = row_of.size();
    const auto last = static_cast<Eigen::Index>(dim() - 1);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(entries.size() * 4);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      auto r = static_cast<Eigen::Index>(entries[k].row);
      auto c = static_cast<Eigen::Index>(mr + entries[k].col);
      if (r != last) trips.emplace_back(r, r, rates[k]);
      if (c != last) trips.emplace_back(c, c, rates[k]);
      if (r != last && c != last) {
        trips.emplace_back(r, c, -rates[k]);
        trips.emplace_back(c, r, -rates[k]);
      }
    }
    SpMat h(last, last);
    h.setFromTriplets(trips.begin(), trips.end());
    return h;
  }
};

Reduced reduce(const SparseNetwork& xbar, const MarginalPair& marg) {
  Reduced red;
  std::vector<std::size_t> row_idx(xbar.rows(), 0), col_idx(xbar.cols(), 0);
  for (std::size_t i = 0; i < xbar.rows(); ++i) {
    if (marg.p()[i] > 0.0) {
      row_idx[i] = red.row_of.size();
      red.row_of.push_back(i);
      red.p.push_back(marg.p()[i]);
    }
  }
  for (std::size_t j = 0; j < xbar.cols(); ++j) {
    if (marg.q()[j] > 0.0) {
      col_idx[j] = red.col_of.size();
      red.col_of.push_back(j);
      red.q.push_back(marg.q()[j]);
    }
  }
  for (const auto& e : xbar.entries()) {
    if (marg.p()[e.row] > 0.0 && marg.q()[e.col] > 0.0) {
      red.entries.push_back({row_idx[e.row], col_idx[e.col], e.weight});
    }
  }
  return red;
}

double norm_inf(const VectorXd& g) { return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff(); }

}  // namespace

ScalingParameters ScalingParameters::from_factors(std::span<const double> d0,
                                                  std::span<const double> d1,
                                                  Normalization norm) {
  ScalingParameters params;
  const double inf = std::numeric_limits<double>::infinity();
  params.u.reserve(d0.size());
  params.v.reserve(d1.size());
  for (double d : d0) {
    if (d < 0.0 || !std::isfinite(d)) throw InputError("scaling factors must be finite and >= 0");
    params.u.push_back(d > 0.0 ? std::log(d) : -inf);
  }
  for (double d : d1) {
    if (d < 0.0 || !std::isfinite(d)) throw InputError("scaling factors must be finite and >= 0");
    params.v.push_back(d > 0.0 ? -std::log(d) : inf);
  }
  return normalized(params, norm);
}

std::vector<double> ScalingParameters::row_factors() const {
  std::vector<double> out(u.size());
  std::transform(u.begin(), u.end(), out.begin(), [](double x) { return std::exp(x); });
  return out;
}

std::vector<double> ScalingParameters::col_factors() const {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::exp(-x); });
  return out;
}

ScalingParameters normalized(const ScalingParameters& params, Normalization norm) {
  ScalingParameters out = params;
  out.normalization = norm;
  if (norm == Normalization::SumZero) {
    long double sum = 0.0L;
    std::size_t count = 0;
    for (double x : params.u) {
      if (std::isfinite(x)) sum += x, ++count;
    }
    for (double x : params.v) {
      if (std::isfinite(x)) sum += x, ++count;
    }
    if (count == 0) return out;
    double shift = static_cast<double>(sum / count);
    for (double& x : out.u) x -= shift;
    for (double& x : out.v) x -= shift;
    return out;
  }
  long double su = 0.0L, sv = 0.0L;
  std::size_t cu = 0, cv = 0;
  for (double x : params.u) {
    if (std::isfinite(x)) su += std::exp(static_cast<long double>(x)), ++cu;
  }
  for (double x : params.v) {
    if (std::isfinite(x)) sv += std::exp(-static_cast<long double>(x)), ++cv;
  }
  if (cu > 0) {
    double shift = static_cast<double>(std::log(su / cu));
    for (double& x : out.u) x -= shift;
  }
  if (cv > 0) {
    double shift = static_cast<double>(std::log(sv / cv));
    for (double& x : out.v) x += shift;
  }
  return out;
}

double log_likelihood(const SparseNetwork& xbar, const MarginalPair& marg,
                      const ScalingParameters& params) {
  check_dims(xbar, marg);
  check_dims(xbar, params);
  long double ll = 0.0L;
  for (std::size_t i = 0; i < params.u.size(); ++i) {
    if (marg.p()[i] > 0.0) ll += marg.p()[i] * params.u[i];
  }
  for (std::size_t j = 0; j < params.v.size(); ++j) {
    if (marg.q()[j] > 0.0) ll -= marg.q()[j] * params.v[j];
  }
  for (const auto& e : xbar.entries()) {
    ll -= checked_rate(e.weight, params.u[e.row], params.v[e.col]);
  }
  return static_cast<double>(ll);
}

std::pair<std::vector<double>, std::vector<double>> neg_ll_gradient(
    const SparseNetwork& xbar, const MarginalPair& marg, const ScalingParameters& params) {
  check_dims(xbar, marg);
  check_dims(xbar, params);
  std::vector<double> gu(xbar.rows()), gv(xbar.cols());
  for (std::size_t i = 0; i < gu.size(); ++i) gu[i] = -marg.p()[i];
  for (std::size_t j = 0; j < gv.size(); ++j) gv[j] = marg.q()[j];
  for (const auto& e : xbar.entries()) {
    double rate = checked_rate(e.weight, params.u[e.row], params.v[e.col]);
    gu[e.row] += rate;
    gv[e.col] -= rate;
  }
  return {std::move(gu), std::move(gv)};
}

SparseNetwork rate_matrix(const SparseNetwork& xbar, const ScalingParameters& params) {
  check_dims(xbar, params);
  std::vector<double> vals;
  vals.reserve(xbar.nnz());
  for (const auto& e : xbar.entries()) {
    vals.push_back(checked_rate(e.weight, params.u[e.row], params.v[e.col]));
  }
  return xbar.with_values(vals);
}

GlmFit mle_newton(const SparseNetwork& xbar, const MarginalPair& marg, Normalization norm,
                  double ci_level) {
  check_dims(xbar, marg);
  const double z = z_for_level(ci_level);
  if (!check_feasibility(xbar, marg).feasible) {
    throw InputError("no finite maximum-likelihood estimate: marginals are infeasible for this support");
  }
  Reduced red = reduce(xbar, marg);
  const std::size_t mr = red.row_of.size();
  const std::size_t dim = red.dim();
  if (mr == 0 || red.col_of.empty()) throw InputError("marginals are identically zero");
  if (!is_connected(SparseNetwork::from_entries(mr, red.col_of.size(), red.entries))) {
    throw InputError("support restricted to positive marginals is disconnected; parameters are not identified");
  }

  const double gtol = 1e-10 * std::max(1.0, std::max(*std::max_element(red.p.begin(), red.p.end()),
                                                     *std::max_element(red.q.begin(), red.q.end())));
  VectorXd theta = VectorXd::Zero(static_cast<Eigen::Index>(dim));
  std::vector<double> rates;
  VectorXd g = red.gradient(theta, rates);
  double f = red.objective(theta);
  const auto last = static_cast<Eigen::Index>(dim - 1);

  GlmFit fit;
  fit.ci_level = ci_level;
  std::size_t it = 0;
  while (norm_inf(g) >= gtol) {
    if (it == kNewtonCap) throw ConvergenceError("Newton iteration cap reached in mle_newton");
    ++it;
    VectorXd step = VectorXd::Zero(static_cast<Eigen::Index>(dim));
    if (dim > 1) {
      Eigen::SimplicialLDLT<SpMat> solver(red.grounded_hessian(rates));
      if (solver.info() != Eigen::Success) throw ConvergenceError("Hessian factorization failed");
      step.head(last) = solver.solve(-g.head(last));
    }
    double alpha = 1.0;
    bool accepted = false;
    const double gnorm = g.norm();
    for (int halvings = 0; halvings < 60; ++halvings, alpha *= 0.5) {
      VectorXd trial = theta + alpha * step;
      double ft = red.objective(trial);
      if (!std::isfinite(ft)) continue;
      std::vector<double> trial_rates;
      VectorXd gt = red.gradient(trial, trial_rates);
      // Near the optimum f stops resolving changes; accept steps that shrink
      // the gradient without a measurable increase in f.
      bool flat = ft <= f + 1e-14 * std::max(1.0, std::abs(f));
      if (ft < f || (flat && gt.norm() < gnorm)) {
        theta = std::move(trial);
        f = ft;
        g = std::move(gt);
        rates = std::move(trial_rates);
        accepted = true;
        break;
      }
    }
    if (!accepted) throw ConvergenceError("line search failed in mle_newton");
  }
  fit.newton_iterations = it;
  fit.converged = true;

  // Wald variances from diag(H^+) with H the full Laplacian of the rates:
  // H^+ = P G P, G = grounded inverse padded with zeros, P = I - 11^T/k.
  const double k = static_cast<double>(dim);
  VectorXd var = VectorXd::Zero(static_cast<Eigen::Index>(dim));
  if (dim > 1) {
    Eigen::SimplicialLDLT<SpMat> solver(red.grounded_hessian(rates));
    if (solver.info() != Eigen::Success) throw ConvergenceError("Hessian factorization failed");
    VectorXd g_diag = VectorXd::Zero(static_cast<Eigen::Index>(dim));
    VectorXd g_ones = VectorXd::Zero(static_cast<Eigen::Index>(dim));
    g_ones.head(last) = solver.solve(VectorXd::Ones(last));
    const Eigen::Index chunk = 64;
    for (Eigen::Index start = 0; start < last; start += chunk) {
      Eigen::Index width = std::min(chunk, last - start);
      Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(last, width);
      for (Eigen::Index c = 0; c < width; ++c) rhs(start + c, c) = 1.0;
      Eigen::MatrixXd sol = solver.solve(rhs);
      for (Eigen::Index c = 0; c < width; ++c) g_diag(start + c) = sol(start + c, c);
    }
    const double total = g_ones.sum();
    for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(dim); ++a) {
      var(a) = std::max(0.0, g_diag(a) - 2.0 * g_ones(a) / k + total / (k * k));
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  ScalingParameters raw;
  raw.u.assign(xbar.rows(), -inf);
  raw.v.assign(xbar.cols(), inf);
  for (std::size_t i = 0; i < mr; ++i) raw.u[red.row_of[i]] = theta(static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < red.col_of.size(); ++j) {
    raw.v[red.col_of[j]] = theta(static_cast<Eigen::Index>(mr + j));
  }
  fit.params = normalized(raw, norm);

  // Intervals travel with the point estimate under the normalization shift.
  fit.ci_lower_u = fit.params.u;
  fit.ci_upper_u = fit.params.u;
  fit.ci_lower_v = fit.params.v;
  fit.ci_upper_v = fit.params.v;
  for (std::size_t i = 0; i < mr; ++i) {
    double half = z * std::sqrt(var(static_cast<Eigen::Index>(i)));
    fit.ci_lower_u[red.row_of[i]] -= half;
    fit.ci_upper_u[red.row_of[i]] += half;
  }
  for (std::size_t j = 0; j < red.col_of.size(); ++j) {
    double half = z * std::sqrt(var(static_cast<Eigen::Index>(mr + j)));
    fit.ci_lower_v[red.col_of[j]] -= half;
    fit.ci_upper_v[red.col_of[j]] += half;
  }
  fit.loglik = log_likelihood(xbar, marg, fit.params);
  return fit;
}

double ErrorBoundReport::constant_free() const {
  if (!connected) return std::numeric_limits<double>::infinity();
  return kappa / (lambda2 * lambda2);
}

ErrorBoundReport error_bound(const SparseNetwork& xbar, const ScalingParameters& truth, double B) {
  check_dims(xbar, truth);
  if (!(B >= 0.0) || !std::isfinite(B)) throw InputError("B must be finite and non-negative");
  double sup = 0.0;
  for (double x : truth.u) {
    if (std::isfinite(x)) sup = std::max(sup, std::abs(x));
  }
  for (double x : truth.v) {
    if (std::isfinite(x)) sup = std::max(sup, std::abs(x));
  }
  if (sup > B * (1.0 + 1e-12) + 1e-300) {
    throw InputError("parameters exceed the stated bound B");
  }
  ErrorBoundReport rep;
  rep.B = B;
  SparseNetwork rates = rate_matrix(xbar, truth);
  rep.kappa = rates.total();
  for (double s : rates.row_sums()) rep.M = std::max(rep.M, s);
  for (double s : rates.col_sums()) rep.M = std::max(rep.M, s);
  LaplacianSpectrum spec = bipartite_laplacian_fiedler(xbar);
  rep.connected = spec.connected;
  rep.lambda2 = spec.lambda2;
  if (!spec.connected || !(spec.lambda2 > 0.0)) {
    rep.connected = false;
    rep.bound = std::numeric_limits<double>::infinity();
  } else {
    rep.bound = 8.0 * std::exp(4.0 * B) * rep.kappa / (spec.lambda2 * spec.lambda2);
  }
  return rep;
}

FiniteMleCondition finite_mle_condition(const SparseNetwork& xbar, const ScalingParameters& truth) {
  FiniteMleCondition out;
  out.threshold = 8.0 * std::log(static_cast<double>(xbar.rows() + xbar.cols()));
  out.lambda2_star = bipartite_laplacian_fiedler(rate_matrix(xbar, truth)).lambda2;
  out.holds = out.lambda2_star >= out.threshold;
  return out;
}

FitDiagnostics fit_diagnostics(const SparseNetwork& y, const SparseNetwork& xhat) {
  if (y.rows() != xhat.rows() || y.cols() != xhat.cols()) {
    throw InputError("observed and fitted networks differ in shape");
  }
  const std::size_t m = xhat.rows();
  const std::size_t n = xhat.cols();
  FitDiagnostics out;
  out.observation_count = xhat.nnz();
  if (out.observation_count <= m + n) {
    throw InputError("too few observations for a dispersion estimate (|D| <= m + n)");
  }
  out.pearson_residuals.reserve(xhat.nnz());
  long double ss = 0.0L;
  for (const auto& e : xhat.entries()) {
    double r = (y.at(e.row, e.col) - e.weight) / std::sqrt(e.weight);
    out.pearson_residuals.push_back(r);
    ss += static_cast<long double>(r) * r;
  }
  out.dispersion = static_cast<double>(ss / static_cast<long double>(out.observation_count - m - n));
  return out;
}

PercentileSummary stationarity_check(std::span<const IpfResult> results,
                                     const SparseNetwork& support) {
  if (results.size() < 2) throw InputError("stationarity check needs at least two time steps");
  if (support.empty()) throw InputError("stationarity check needs a non-empty support");
  for (const auto& r : results) {
    if (r.d0.size() != support.rows() || r.d1.size() != support.cols()) {
      throw InputError("IPF result dimensions do not match the support");
    }
  }
  std::vector<double> sums;
  sums.reserve(support.nnz());
  for (const auto& e : support.entries()) {
    long double s = 0.0L;
    for (const auto& r : results) s += static_cast<long double>(r.d0[e.row]) * r.d1[e.col];
    sums.push_back(static_cast<double>(s));
  }
  double med = percentile(sums, 50.0);
  if (!(med > 0.0)) throw InputError("median of the summed factors is zero");
  for (double& s : sums) s /= med;
  PercentileSummary out;
  out.count = sums.size();
  out.p5 = percentile(sums, 5.0);
  out.p25 = percentile(sums, 25.0);
  out.p50 = percentile(sums, 50.0);
  out.p75 = percentile(sums, 75.0);
  out.p95 = percentile(sums, 95.0);
  return out;
}

}  // namespace ipfnet
