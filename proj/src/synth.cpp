#include "ipfnet/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "ipfnet/rng.hpp"

namespace ipfnet {

namespace {

double positive_uniform(std::mt19937_64& gen, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  double x = dist(gen);
  while (x <= 0.0) x = dist(gen);
  return x;
}

struct NoiseSampler {
  std::mt19937_64& gen;

  double operator()(const PoissonModel&, double rate) const {
    if (rate <= 0.0) return 0.0;
    std::poisson_distribution<long long> dist(rate);
    return static_cast<double>(dist(gen));
  }
  double operator()(const ExponentialModel&, double rate) const {
    if (rate <= 0.0) return 0.0;
    std::exponential_distribution<double> dist(1.0 / rate);
    return dist(gen);
  }
  double operator()(const NegBinomModel& nb, double rate) const {
    if (rate <= 0.0) return 0.0;
    NegBinomParams prm = negbinom_params(rate, nb.gamma);
    std::gamma_distribution<double> mix(prm.successes, (1.0 - nb.gamma) / nb.gamma);
    double lam = mix(gen);
    if (lam <= 0.0) return 0.0;
    std::poisson_distribution<long long> dist(lam);
    return static_cast<double>(dist(gen));
  }
  double operator()(const InteractionModel&, double rate) const {
    return (*this)(PoissonModel{}, rate);
  }
};

double mean_positive(std::span<const double> x) {
  long double s = 0.0L;
  std::size_t c = 0;
  for (double v : x) {
    if (v > 0.0) s += v, ++c;
  }
  if (c == 0) throw InputError("vector has no positive entries");
  return static_cast<double>(s / c);
}

}  // namespace

void SynthConfig::validate() const {
  if (m == 0 || n == 0) throw InputError("synthetic dimensions must be positive");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw InputError("sparsity must lie in [0, 1)");
  if (!(param_low < param_high) || param_low < 0.0) throw InputError("invalid parameter range");
  if (!(base_low < base_high) || base_low < 0.0) throw InputError("invalid base range");
}

std::string model_name(const GenerativeModel& model) {
  struct Namer {
    std::string operator()(const PoissonModel&) const { return "poisson"; }
    std::string operator()(const ExponentialModel&) const { return "exponential"; }
    std::string operator()(const NegBinomModel& nb) const {
      return "negbinom(" + std::to_string(nb.gamma).substr(0, 4) + ")";
    }
    std::string operator()(const InteractionModel&) const { return "interaction"; }
  };
  return std::visit(Namer{}, model);
}

NegBinomParams negbinom_params(double mean, double gamma) {
  if (!(mean > 0.0) || !std::isfinite(mean)) {
    throw InputError("negative binomial needs a positive mean");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("negative binomial gamma must lie in (0, 1)");
  return {gamma * mean / (1.0 - gamma), gamma, mean / gamma};
}

SynthInstance generate_instance(const SynthConfig& cfg, const GenerativeModel& model,
                                std::uint64_t trial) {
  cfg.validate();
  if (const auto* nb = std::get_if<NegBinomModel>(&model)) negbinom_params(1.0, nb->gamma);
  const std::size_t m = cfg.m, n = cfg.n;

  SynthInstance inst;
  inst.seed = cfg.seed;
  inst.trial = trial;

  auto truth_gen = make_rng(cfg.seed, Stream::Truth, trial);
  std::vector<double> a(m), b(n);
  for (double& x : a) x = positive_uniform(truth_gen, cfg.param_low, cfg.param_high);
  for (double& x : b) x = positive_uniform(truth_gen, cfg.param_low, cfg.param_high);
  inst.truth.u.resize(m);
  inst.truth.v.resize(n);
  for (std::size_t i = 0; i < m; ++i) inst.truth.u[i] = std::log(a[i]);
  for (std::size_t j = 0; j < n; ++j) inst.truth.v[j] = -std::log(b[j]);
  inst.truth.normalization = Normalization::SumZero;

  auto base_gen = make_rng(cfg.seed, Stream::Base, trial);
  std::vector<double> base(m * n);
  for (double& x : base) x = positive_uniform(base_gen, cfg.base_low, cfg.base_high);

  auto zeroed = static_cast<std::size_t>(std::floor(cfg.sparsity * static_cast<double>(m * n)));
  if (zeroed > 0) {
    std::vector<std::size_t> cells(m * n);
    std::iota(cells.begin(), cells.end(), 0);
    auto mask_gen = make_rng(cfg.seed, Stream::Sparsity, trial);
    // Partial Fisher-Yates: the first `zeroed` cells are a uniform sample.
    for (std::size_t k = 0; k < zeroed; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, cells.size() - 1);
      std::swap(cells[k], cells[pick(mask_gen)]);
      base[cells[k]] = 0.0;
    }
  }
  inst.xbar = SparseNetwork::from_dense(m, n, base);

  std::vector<double> kernel;
  if (const auto* im = std::get_if<InteractionModel>(&model)) {
    auto pos_gen = make_rng(cfg.seed, Stream::Positions, trial);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<double, double>> rpos(m), cpos(n);
    for (auto& p : rpos) p = {unit(pos_gen), unit(pos_gen)};
    for (auto& p : cpos) p = {unit(pos_gen), unit(pos_gen)};
    inst.distances.resize(m * n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        inst.distances[i * n + j] =
            std::hypot(rpos[i].first - cpos[j].first, rpos[i].second - cpos[j].second);
      }
    }
    auto eff = effective_distances(inst.distances);
    kernel.resize(m * n);
    for (std::size_t k = 0; k < m * n; ++k) {
      kernel[k] = std::pow(eff[k], im->alpha) * std::exp(-im->beta * eff[k]);
    }
  }

  auto noise_gen = make_rng(cfg.seed, Stream::Noise, trial);
  NoiseSampler sampler{noise_gen};
  std::vector<Entry> ys;
  ys.reserve(inst.xbar.nnz());
  for (const auto& e : inst.xbar.entries()) {
    double rate = a[e.row] * e.weight * b[e.col];
    if (!kernel.empty()) rate *= kernel[e.row * n + e.col];
    double draw = std::visit([&](const auto& mdl) { return sampler(mdl, rate); }, model);
    if (draw > 0.0) ys.push_back({e.row, e.col, draw});
  }
  inst.y = SparseNetwork::from_entries(m, n, std::move(ys));
  inst.marg = marginals(inst.y);
  return inst;
}

std::vector<double> effective_distances(std::span<const double> distances) {
  double min_pos = std::numeric_limits<double>::infinity();
  for (double d : distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw InputError("distances must be finite and non-negative");
    if (d > 0.0) min_pos = std::min(min_pos, d);
  }
  std::vector<double> out(distances.begin(), distances.end());
  if (!std::isfinite(min_pos)) {
    if (!out.empty()) throw InputError("all distances are zero");
    return out;
  }
  for (double& d : out) {
    if (d == 0.0) d = min_pos / 2.0;
  }
  return out;
}

SparseNetwork GravityModel::kernel() const {
  if (distances.size() != rows * cols) throw InputError("distance matrix has the wrong size");
  std::vector<double> vals(distances.size());
  for (std::size_t k = 0; k < vals.size(); ++k) {
    vals[k] = std::pow(distances[k], alpha) * std::exp(-beta * distances[k]);
  }
  return SparseNetwork::from_dense(rows, cols, vals);
}

GravityModel fit_gravity(const SparseNetwork& xbar, std::span<const double> distances,
                         double bin_width) {
  if (distances.size() != xbar.rows() * xbar.cols()) {
    throw InputError("distance matrix does not match the network");
  }
  if (!(bin_width > 0.0)) throw InputError("bin width must be positive");
  GravityModel gm;
  gm.rows = xbar.rows();
  gm.cols = xbar.cols();
  gm.distances = effective_distances(distances);

  struct Bin {
    long double dist = 0.0L;
    long double value = 0.0L;
    std::size_t count = 0;
  };
  std::map<long long, Bin> bins;
  const auto dense = xbar.to_dense();
  for (std::size_t k = 0; k < dense.size(); ++k) {
    auto key = static_cast<long long>(std::floor(gm.distances[k] / bin_width));
    Bin& b = bins[key];
    b.dist += gm.distances[k];
    b.value += dense[k];
    ++b.count;
  }
  std::vector<std::array<double, 3>> rows;
  std::vector<double> rhs;
  for (const auto& [key, b] : bins) {
    double mean_value = static_cast<double>(b.value / b.count);
    if (!(mean_value > 0.0)) continue;
    double d = static_cast<double>(b.dist / b.count);
    rows.push_back({1.0, std::log(d), -d});
    rhs.push_back(std::log(mean_value));
  }
  if (rows.size() < 3) throw InputError("gravity fit needs at least three distance bins with positive mean");
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::VectorXd target(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < 3; ++c) design(static_cast<Eigen::Index>(r), c) = rows[r][c];
    target(static_cast<Eigen::Index>(r)) = rhs[r];
  }
  Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
  gm.alpha = coef(1);
  gm.beta = coef(2);
  return gm;
}

SparseNetwork gravity_infer(const GravityModel& gm, const MarginalPair& marg, const IpfConfig& cfg) {
  SparseNetwork k = gm.kernel();
  IpfResult res = run_ipf(k, marg, cfg);
  if (res.status != IpfStatus::Converged) {
    throw ConvergenceError("IPF on the gravity kernel ended with status " + to_string(res.status));
  }
  return scaled_matrix(k, res.d0, res.d1);
}

SparseNetwork baseline_rank1(const MarginalPair& marg) {
  const double c = marg.total();
  if (!(c > 0.0)) throw InputError("rank-1 baseline needs a positive total");
  std::vector<Entry> out;
  for (std::size_t i = 0; i < marg.rows(); ++i) {
    if (marg.p()[i] <= 0.0) continue;
    for (std::size_t j = 0; j < marg.cols(); ++j) {
      if (marg.q()[j] > 0.0) out.push_back({i, j, marg.p()[i] * marg.q()[j] / c});
    }
  }
  return SparseNetwork::from_entries(marg.rows(), marg.cols(), std::move(out));
}

SparseNetwork baseline_row_share(const SparseNetwork& xbar, std::span<const double> p) {
  if (p.size() != xbar.rows()) throw InputError("row marginal length does not match the network");
  auto sums = xbar.row_sums();
  std::vector<double> vals;
  vals.reserve(xbar.nnz());
  for (std::size_t i = 0; i < xbar.rows(); ++i) {
    if (p[i] > 0.0 && !(sums[i] > 0.0)) {
      throw InputError("row " + std::to_string(i) + " has a positive marginal but an empty row");
    }
  }
  for (const auto& e : xbar.entries()) vals.push_back(p[e.row] * e.weight / sums[e.row]);
  return xbar.with_values(vals);
}

SparseNetwork baseline_col_share(const SparseNetwork& xbar, std::span<const double> q) {
  return baseline_row_share(xbar.transpose(), q).transpose();
}

SparseNetwork baseline_scale(const SparseNetwork& xbar, double total) {
  if (!(total >= 0.0) || !std::isfinite(total)) throw InputError("target total must be non-negative");
  double have = xbar.total();
  if (!(have > 0.0)) throw InputError("cannot scale an empty network");
  return xbar.scaled(total / have);
}

double cosine_similarity(const SparseNetwork& a, const SparseNetwork& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError("networks differ in shape");
  long double dot = 0.0L, na = 0.0L, nb = 0.0L;
  for (const auto& e : a.entries()) na += static_cast<long double>(e.weight) * e.weight;
  for (const auto& e : b.entries()) nb += static_cast<long double>(e.weight) * e.weight;
  if (na == 0.0L || nb == 0.0L) throw InputError("cosine similarity of a zero matrix");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ra = a.row(i);
    auto rb = b.row(i);
    std::size_t x = 0, y = 0;
    while (x < ra.size() && y < rb.size()) {
      if (ra[x].col < rb[y].col) {
        ++x;
      } else if (rb[y].col < ra[x].col) {
        ++y;
      } else {
        dot += static_cast<long double>(ra[x].weight) * rb[y].weight;
        ++x, ++y;
      }
    }
  }
  return static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

double l2_param_error(std::span<const double> d0, std::span<const double> d1,
                      const ScalingParameters& truth) {
  if (d0.size() != truth.u.size() || d1.size() != truth.v.size()) {
    throw InputError("factor lengths do not match the parameters");
  }
  auto a = truth.row_factors();
  auto b = truth.col_factors();
  double ma = mean_positive(a), mb = mean_positive(b);
  double m0 = mean_positive(d0), m1 = mean_positive(d1);
  long double s = 0.0L;
  for (std::size_t i = 0; i < d0.size(); ++i) {
    long double diff = d0[i] / m0 - a[i] / ma;
    s += diff * diff;
  }
  for (std::size_t j = 0; j < d1.size(); ++j) {
    long double diff = d1[j] / m1 - b[j] / mb;
    s += diff * diff;
  }
  return static_cast<double>(std::sqrt(s));
}

}  // namespace ipfnet
