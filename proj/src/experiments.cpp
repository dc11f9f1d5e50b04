#include "ipfnet/experiments.hpp"

#include <limits>

#include "ipfnet/io.hpp"
#include "ipfnet/parallel.hpp"
#include "ipfnet/spectral.hpp"

namespace ipfnet {

namespace {

ExperimentRow summarize(std::string label, double sparsity, const std::vector<TrialMetrics>& ms) {
  ExperimentRow row;
  row.label = std::move(label);
  row.sparsity = sparsity;
  row.trials = ms.size();
  std::vector<double> it, bd, l2, cs;
  for (const auto& m : ms) {
    if (m.status == IpfStatus::Converged) ++row.converged;
    row.all_traces_monotone = row.all_traces_monotone && m.trace_monotone;
    it.push_back(static_cast<double>(m.iterations));
    bd.push_back(m.bound);
    l2.push_back(m.l2);
    cs.push_back(m.cosine);
  }
  row.iterations = band(it);
  row.bound = band(bd);
  row.l2 = band(l2);
  row.cosine = band(cs);
  return row;
}

std::vector<TrialMetrics> run_trials(const SynthConfig& cfg, const GenerativeModel& model,
                                     const ExperimentOptions& opts) {
  std::vector<TrialMetrics> out(opts.trials);
  parallel_for(opts.trials, opts.workers,
               [&](std::size_t k) { out[k] = run_trial(cfg, model, k, opts.ipf); });
  return out;
}

}  // namespace

TrialMetrics run_trial(const SynthConfig& cfg, const GenerativeModel& model, std::size_t trial,
                       const IpfConfig& ipf) {
  SynthInstance inst = generate_instance(cfg, model, trial);
  IpfResult res = run_ipf(inst.xbar, inst.marg, ipf);
  TrialMetrics tm;
  tm.status = res.status;
  tm.iterations = res.iterations;
  for (std::size_t k = 1; k < res.l1_trace.size(); ++k) {
    if (res.l1_trace[k] > res.l1_trace[k - 1] + 1e-12) tm.trace_monotone = false;
  }
  SparseNetwork xhat = scaled_matrix(inst.xbar, res.d0, res.d1);
  tm.cosine = cosine_similarity(xhat, inst.y);
  tm.l2 = l2_param_error(res.d0, res.d1, inst.truth);
  double kappa = rate_matrix(inst.xbar, inst.truth).total();
  double lambda2 = bipartite_laplacian_fiedler(inst.xbar).lambda2;
  tm.bound = lambda2 > 0.0 ? kappa / (lambda2 * lambda2) : std::numeric_limits<double>::infinity();
  return tm;
}

std::vector<ExperimentRow> experiment_sparsity(const SynthConfig& cfg,
                                               const std::vector<double>& levels,
                                               const ExperimentOptions& opts) {
  std::vector<ExperimentRow> rows;
  for (double r : levels) {
    SynthConfig c = cfg;
    c.sparsity = r;
    rows.push_back(summarize("poisson", r, run_trials(c, PoissonModel{}, opts)));
  }
  return rows;
}

std::vector<ExperimentRow> experiment_misspec(const SynthConfig& cfg,
                                              const std::vector<GenerativeModel>& models,
                                              const ExperimentOptions& opts) {
  std::vector<ExperimentRow> rows;
  for (const auto& model : models) {
    rows.push_back(summarize(model_name(model), cfg.sparsity, run_trials(cfg, model, opts)));
  }
  return rows;
}

void write_experiment_csv(std::ostream& out, const std::vector<ExperimentRow>& rows) {
  out << "label,sparsity,trials,converged";
  for (const char* name : {"iterations", "bound", "l2", "cosine"}) {
    out << ',' << name << "_mean," << name << "_lo," << name << "_hi";
  }
  out << '\n';
  for (const auto& r : rows) {
    out << r.label << ',' << format_double(r.sparsity) << ',' << r.trials << ',' << r.converged;
    for (const Band* b : {&r.iterations, &r.bound, &r.l2, &r.cosine}) {
      out << ',' << format_double(b->mean) << ',' << format_double(b->lo) << ','
          << format_double(b->hi);
    }
    out << '\n';
  }
}

}  // namespace ipfnet
