// Monte Carlo drivers: the sparsity sweep and the misspecification table.
#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "ipfnet/ipf.hpp"
#include "ipfnet/summary.hpp"
#include "ipfnet/synth.hpp"

namespace ipfnet {

struct TrialMetrics {
  IpfStatus status = IpfStatus::MaxIterations;
  std::size_t iterations = 0;
  double bound = 0.0;  // kappa / lambda2^2 of the instance
  double l2 = 0.0;
  double cosine = 0.0;
  bool trace_monotone = true;
};

/// Generates one instance, runs IPF on (Xbar, marginals of Y) and scores the
/// estimate against Y and the true parameters.
TrialMetrics run_trial(const SynthConfig& cfg, const GenerativeModel& model, std::size_t trial,
                       const IpfConfig& ipf = {});

struct ExperimentRow {
  std::string label;
  double sparsity = 0.0;
  std::size_t trials = 0;
  std::size_t converged = 0;
  bool all_traces_monotone = true;
  Band iterations;
  Band bound;
  Band l2;
  Band cosine;
};

struct ExperimentOptions {
  std::size_t trials = 200;
  std::size_t workers = 1;
  IpfConfig ipf;
};

/// One row per sparsity level, Poisson noise. Trial k at every level uses the
/// key (cfg.seed, k).
std::vector<ExperimentRow> experiment_sparsity(const SynthConfig& cfg,
                                               const std::vector<double>& levels,
                                               const ExperimentOptions& opts);

/// One row per generative model at cfg.sparsity.
std::vector<ExperimentRow> experiment_misspec(const SynthConfig& cfg,
                                              const std::vector<GenerativeModel>& models,
                                              const ExperimentOptions& opts);

/// label,sparsity,trials,converged,<metric>_mean,<metric>_lo,<metric>_hi,...
void write_experiment_csv(std::ostream& out, const std::vector<ExperimentRow>& rows);

}  // namespace ipfnet
