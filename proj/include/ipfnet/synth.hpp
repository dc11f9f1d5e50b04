// Synthetic instances of the biproportional model and misspecified variants,
// the gravity baseline, simple marginal-only baselines, and the two accuracy
// metrics (cosine similarity of networks, l2 error of mean-normalized
// factors).
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ipfnet/ipf.hpp"
#include "ipfnet/network.hpp"
#include "ipfnet/stats.hpp"

namespace ipfnet {

struct SynthConfig {
  std::size_t m = 100;
  std::size_t n = 100;
  double sparsity = 0.0;  // fraction r of entries of Xbar set to zero
  double param_low = 0.0;
  double param_high = 4.0;
  double base_low = 0.0;
  double base_high = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PoissonModel {};
struct ExponentialModel {};
struct NegBinomModel {
  double gamma = 0.5;
};
/// Rates multiplied by d^alpha exp(-beta d), with row and column positions
/// drawn uniformly in the unit square.
struct InteractionModel {
  double alpha = -0.5;
  double beta = 1.0;
};

using GenerativeModel = std::variant<PoissonModel, ExponentialModel, NegBinomModel, InteractionModel>;

std::string model_name(const GenerativeModel& model);

struct SynthInstance {
  SparseNetwork xbar;
  ScalingParameters truth;
  SparseNetwork y;
  MarginalPair marg;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  /// Row-major m x n Euclidean distances (Interaction model only).
  std::vector<double> distances;
};

/// Draws exp(u), exp(-v) ~ U(param range) and Xbar ~ U(base range) with
/// floor(r m n) entries zeroed, then Y with mean exp(u_i) Xbar_ij exp(-v_j)
/// under the chosen noise law. Every random quantity is keyed by
/// (cfg.seed, trial), and the noise law does not affect Xbar or the truth.
SynthInstance generate_instance(const SynthConfig& cfg, const GenerativeModel& model,
                                std::uint64_t trial = 0);

struct NegBinomParams {
  double successes = 0.0;
  double probability = 0.0;
  double variance = 0.0;
};

/// Negative binomial with mean lambda and success probability gamma:
/// s = gamma lambda / (1 - gamma), variance lambda / gamma.
NegBinomParams negbinom_params(double mean, double gamma);

struct GravityModel {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> distances;  // row-major, all positive

  /// f(d) = d^alpha exp(-beta d) on every pair.
  SparseNetwork kernel() const;
};

/// Replaces zero distances by half the smallest positive one.
std::vector<double> effective_distances(std::span<const double> distances);

/// Least-squares fit of log(mean Xbar in bin) = a + alpha log d - beta d over
/// distance bins of the given width (bins with zero mean are skipped).
/// Throws InputError with fewer than three usable bins.
GravityModel fit_gravity(const SparseNetwork& xbar, std::span<const double> distances,
                         double bin_width = 0.001);

/// IPF on the gravity kernel; returns the balanced matrix.
SparseNetwork gravity_infer(const GravityModel& gm, const MarginalPair& marg,
                            const IpfConfig& cfg = {});

SparseNetwork baseline_rank1(const MarginalPair& marg);
SparseNetwork baseline_row_share(const SparseNetwork& xbar, std::span<const double> p);
SparseNetwork baseline_col_share(const SparseNetwork& xbar, std::span<const double> q);
SparseNetwork baseline_scale(const SparseNetwork& xbar, double total);

/// <A, B> / (|A| |B|) over the union of supports.
double cosine_similarity(const SparseNetwork& a, const SparseNetwork& b);

/// l2 distance between (d0, d1) and (exp(u), exp(-v)) after dividing each of
/// the four vectors by the mean of its positive entries.
double l2_param_error(std::span<const double> d0, std::span<const double> d1,
                      const ScalingParameters& truth);

}  // namespace ipfnet
