#include "ipfnet/ipf.hpp"

#include <array>
#include <cmath>
#include <optional>

#include "ipfnet/feasibility.hpp"

namespace ipfnet {

namespace {

// l1 marginal error of a value array aligned with x's support. Sums are
// accumulated in extended precision so the trace is not dominated by rounding
// once the fit is tight.
double marginal_error(const SparseNetwork& x, std::span<const double> values,
                      const MarginalPair& marg) {
  std::vector<long double> rs(x.rows(), 0.0L), cs(x.cols(), 0.0L);
  auto entries = x.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    rs[entries[k].row] += values[k];
    cs[entries[k].col] += values[k];
  }
  long double err = 0.0L;
  for (std::size_t i = 0; i < rs.size(); ++i) err += std::fabs(rs[i] - marg.p()[i]);
  for (std::size_t j = 0; j < cs.size(); ++j) err += std::fabs(cs[j] - marg.q()[j]);
  return static_cast<double>(err);
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a[k] - b[k]);
  return d;
}

}  // namespace

std::string to_string(IpfStatus status) {
  switch (status) {
    case IpfStatus::Converged: return "converged";
    case IpfStatus::Oscillating: return "oscillating";
    case IpfStatus::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

void IpfConfig::validate() const {
  if (!(tolerance > 0.0)) throw InputError("IPF tolerance must be positive");
  if (max_iterations < 4) throw InputError("IPF needs at least 4 iterations");
}

StructuralInfeasibility::StructuralInfeasibility(Axis axis, std::size_t index)
    : std::runtime_error(std::string(axis == Axis::Row ? "row " : "column ") +
                         std::to_string(index) +
                         " has a positive marginal but no reachable support; "
                         "IPF cannot match it (run `ipfnet repair`)"),
      axis_(axis),
      index_(index) {}

IpfResult run_ipf(const SparseNetwork& x, const MarginalPair& marg, const IpfConfig& cfg) {
  cfg.validate();
  if (marg.rows() != x.rows() || marg.cols() != x.cols()) {
    throw InputError("marginals do not match network dimensions");
  }
  const auto& p = marg.p();
  const auto& q = marg.q();
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  auto entries = x.entries();
  const std::size_t nnz = entries.size();

  IpfResult res;
  res.d0.assign(m, 1.0);
  res.d1.assign(n, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (p[i] == 0.0) res.d0[i] = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (q[j] == 0.0) res.d1[j] = 0.0;
  }

  // Ring buffer of the last four scaled-matrix iterates, stored as values
  // aligned with x's entries. hist[t % 4] holds iterate t.
  std::array<std::vector<double>, 4> hist;
  auto fill_iterate = [&](std::vector<double>& v) {
    v.resize(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
      v[k] = res.d0[entries[k].row] * entries[k].weight * res.d1[entries[k].col];
    }
  };
  fill_iterate(hist[0]);

  std::vector<double> denom;
  std::optional<bool> feasible;
  for (std::size_t tau = 1;; ++tau) {
    if (tau % 2 == 1) {
      denom.assign(m, 0.0);
      for (const auto& e : entries) denom[e.row] += e.weight * res.d1[e.col];
      for (std::size_t i = 0; i < m; ++i) {
        if (p[i] == 0.0) continue;
        if (!(denom[i] > 0.0)) {
          throw StructuralInfeasibility(StructuralInfeasibility::Axis::Row, i);
        }
        res.d0[i] = p[i] / denom[i];
      }
    } else {
      denom.assign(n, 0.0);
      for (const auto& e : entries) denom[e.col] += e.weight * res.d0[e.row];
      for (std::size_t j = 0; j < n; ++j) {
        if (q[j] == 0.0) continue;
        if (!(denom[j] > 0.0)) {
          throw StructuralInfeasibility(StructuralInfeasibility::Axis::Column, j);
        }
        res.d1[j] = q[j] / denom[j];
      }
    }

    auto& cur = hist[tau % 4];
    fill_iterate(cur);
    res.iterations = tau;
    if (cfg.record_trace) res.l1_trace.push_back(marginal_error(x, cur, marg));

    if (l1_distance(cur, hist[(tau - 1) % 4]) < cfg.tolerance) {
      res.status = IpfStatus::Converged;
      break;
    }
    // Period-2 agreement also shows up on feasible inputs whose solution
    // forces some entries to zero, where IPF converges only sublinearly. The
    // flow certificate separates the two, so it is consulted once.
    if (tau >= 3 && l1_distance(cur, hist[(tau - 2) % 4]) < cfg.tolerance &&
        l1_distance(hist[(tau - 1) % 4], hist[(tau - 3) % 4]) < cfg.tolerance &&
        !(feasible ? *feasible : *(feasible = check_feasibility(x, marg).feasible))) {
      res.status = IpfStatus::Oscillating;
      const auto& prev = hist[(tau - 1) % 4];
      bool row_step = tau % 2 == 1;
      res.accumulation = AccumulationPair{x.with_values(row_step ? cur : prev),
                                          x.with_values(row_step ? prev : cur)};
      break;
    }
    if (tau >= cfg.max_iterations) {
      res.status = IpfStatus::MaxIterations;
      break;
    }
  }
  return res;
}

SparseNetwork scaled_matrix(const SparseNetwork& x, std::span<const double> d0,
                            std::span<const double> d1) {
  if (d0.size() != x.rows() || d1.size() != x.cols()) {
    throw InputError("scaling factor lengths do not match network dimensions");
  }
  auto entries = x.entries();
  std::vector<double> v(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    v[k] = d0[entries[k].row] * entries[k].weight * d1[entries[k].col];
  }
  return x.with_values(v);
}

double l1_marginal_error(const SparseNetwork& xhat, const MarginalPair& marg) {
  if (marg.rows() != xhat.rows() || marg.cols() != xhat.cols()) {
    throw InputError("marginals do not match network dimensions");
  }
  std::vector<double> v(xhat.nnz());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = xhat.entries()[k].weight;
  return marginal_error(xhat, v, marg);
}

std::pair<std::vector<double>, std::vector<double>> normalize_factors(
    std::span<const double> d0, std::span<const double> d1) {
  auto norm = [](std::span<const double> d, const char* name) {
    double sum = 0.0;
    std::size_t count = 0;
    for (double x : d) {
      if (x > 0.0) {
        sum += x;
        ++count;
      }
    }
    if (count == 0) throw InputError(std::string(name) + " has no positive entries");
    double mean = sum / static_cast<double>(count);
    std::vector<double> out(d.begin(), d.end());
    for (auto& x : out) x /= mean;
    return out;
  };
  return {norm(d0, "d0"), norm(d1, "d1")};
}

}  // namespace ipfnet
