#include "ipfnet/repair.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ipfnet {

namespace {

// Bits allowed in the knapsack reconstruction table.
constexpr std::size_t kKnapsackTableBits = std::size_t{1} << 30;

std::vector<std::size_t> complement_columns(const SparseNetwork& x, const BlockingDiagnosis& diag) {
  std::vector<char> in_n(x.cols(), 0);
  for (std::size_t j : diag.neighbor_cols) {
    if (j >= x.cols()) throw InputError("blocking diagnosis does not match the network");
    in_n[j] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    if (!in_n[j]) out.push_back(j);
  }
  return out;
}

void check_diag(const SparseNetwork& x, const MarginalPair& marg, const BlockingDiagnosis& diag) {
  if (marg.rows() != x.rows() || marg.cols() != x.cols()) {
    throw InputError("marginals do not match network dimensions");
  }
  if (diag.rows.empty()) throw InputError("blocking set is empty");
  for (std::size_t i : diag.rows) {
    if (i >= x.rows()) throw InputError("blocking diagnosis does not match the network");
  }
  if (!(diag.delta > 0.0)) throw InputError("blocking diagnosis has no positive gap");
}

std::string coverage_error(double available, double delta) {
  return "columns outside N_X(S) supply " + std::to_string(available) +
         ", less than the gap " + std::to_string(delta) + "; the blocking set cannot be unblocked";
}

}  // namespace

std::string to_string(RepairObjective objective) {
  return objective == RepairObjective::MinEdges ? "min-edges" : "min-lambda1";
}

std::string to_string(RowTiebreak tiebreak) {
  return tiebreak == RowTiebreak::LargestP ? "largest-p" : "smallest-p";
}

void RepairConfig::validate() const {
  if (!(edge_weight_multiplier > 0.0) || !std::isfinite(edge_weight_multiplier)) {
    throw InputError("edge weight multiplier must be positive");
  }
  if (knapsack_resolution < 1) throw InputError("knapsack resolution must be at least 1");
}

EdgeAdditionSet unblock_min_edges(const SparseNetwork& x, const MarginalPair& marg,
                                  const BlockingDiagnosis& diag, RowTiebreak tiebreak) {
  check_diag(x, marg, diag);
  std::vector<std::size_t> cols;
  for (std::size_t j : complement_columns(x, diag)) {
    if (marg.q()[j] > 0.0) cols.push_back(j);
  }
  std::stable_sort(cols.begin(), cols.end(),
                   [&](std::size_t a, std::size_t b) { return marg.q()[a] > marg.q()[b]; });
  double available = 0.0;
  for (std::size_t j : cols) available += marg.q()[j];
  double target = diag.delta;
  if (available < target) {
    if (available < target * (1.0 - 1e-9)) throw InputError(coverage_error(available, target));
    target = available;
  }

  std::size_t row = diag.rows.front();
  for (std::size_t i : diag.rows) {
    double pi = marg.p()[i], pr = marg.p()[row];
    bool better = tiebreak == RowTiebreak::LargestP ? pi > pr : pi < pr;
    if (better || (pi == pr && i < row)) row = i;
  }

  EdgeAdditionSet out;
  double covered = 0.0;
  for (std::size_t j : cols) {
    if (covered >= target) break;
    out.edges.emplace_back(row, j);
    covered += marg.q()[j];
  }
  if (covered < target) {
    // Rounding in the running sum; the full set covers by construction.
    out.edges.clear();
    for (std::size_t j : cols) out.edges.emplace_back(row, j);
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

std::vector<std::size_t> knapsack_min_cover(std::span<const double> values,
                                            std::span<const double> weights, double threshold,
                                            std::size_t resolution) {
  if (values.size() != weights.size()) throw InputError("values and weights differ in length");
  if (resolution < 1) throw InputError("knapsack resolution must be at least 1");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] >= 0.0) || !(weights[k] >= 0.0) || !std::isfinite(values[k]) ||
        !std::isfinite(weights[k])) {
      throw InputError("knapsack values and weights must be finite and non-negative");
    }
  }
  if (!(threshold > 0.0)) return {};
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total < threshold) {
    if (total < threshold * (1.0 - 1e-9)) {
      throw InputError("knapsack cover is infeasible: total weight below threshold");
    }
    threshold = total;
  }
  const double slack_tol = 1e-12 * total;

  // Zero-weight items never help coverage.
  std::vector<std::size_t> items;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] > 0.0) items.push_back(k);
  }
  const double capacity = total - threshold;
  std::vector<char> chosen(values.size(), 0);
  for (std::size_t k : items) chosen[k] = 1;

  if (capacity > 0.0 && !items.empty()) {
    std::size_t res = std::min(resolution, kKnapsackTableBits / items.size());
    res = std::max<std::size_t>(res, 1);
    const double unit = capacity / static_cast<double>(res);
    std::vector<std::size_t> qw(items.size());
    for (std::size_t a = 0; a < items.size(); ++a) {
      double t = weights[items[a]] / unit;
      double c = std::ceil(t - 1e-9 * t);
      qw[a] = c > static_cast<double>(res) ? res + 1 : static_cast<std::size_t>(std::max(c, 1.0));
    }
    // best[c]: maximum excluded value with quantized weight at most c.
    std::vector<double> best(res + 1, 0.0);
    std::vector<std::vector<bool>> take(items.size());
    for (std::size_t a = 0; a < items.size(); ++a) {
      take[a].assign(res + 1, false);
      if (qw[a] > res) continue;
      const double val = values[items[a]];
      for (std::size_t c = res; c >= qw[a]; --c) {
        double cand = best[c - qw[a]] + val;
        if (cand > best[c]) {
          best[c] = cand;
          take[a][c] = true;
        }
        if (c == qw[a]) break;
      }
    }
    std::size_t c = res;
    for (std::size_t a = items.size(); a-- > 0;) {
      if (take[a][c]) {
        chosen[items[a]] = 0;
        c -= qw[a];
      }
    }
  }

  auto covered = [&] {
    long double s = 0.0L;
    for (std::size_t k : items) {
      if (chosen[k]) s += weights[k];
    }
    return static_cast<double>(s);
  };

  // Quantization is conservative, but guard against rounding: add back the
  // cheapest excluded items until the real constraint holds.
  double have = covered();
  if (have + slack_tol < threshold) {
    std::vector<std::size_t> excluded;
    for (std::size_t k : items) {
      if (!chosen[k]) excluded.push_back(k);
    }
    std::stable_sort(excluded.begin(), excluded.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    for (std::size_t k : excluded) {
      if (have + slack_tol >= threshold) break;
      chosen[k] = 1;
      have += weights[k];
    }
  }

  // Drop items the cover does not need, most valuable first.
  std::vector<std::size_t> in;
  for (std::size_t k : items) {
    if (chosen[k]) in.push_back(k);
  }
  std::stable_sort(in.begin(), in.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  for (std::size_t k : in) {
    if (values[k] > 0.0 && have - weights[k] + slack_tol >= threshold) {
      chosen[k] = 0;
      have -= weights[k];
    }
  }

  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (chosen[k]) out.push_back(k);
  }
  return out;
}

EdgeAdditionSet perron_addition(const SparseNetwork& x, const MarginalPair& marg,
                                const BlockingDiagnosis& diag, const SpectralInfo& spec,
                                const RepairConfig& cfg, double weight) {
  check_diag(x, marg, diag);
  if (spec.u1.size() != x.rows() || spec.v1.size() != x.cols()) {
    throw InputError("spectral information does not match the network");
  }
  std::size_t row = diag.rows.front();
  if (cfg.forced_row) {
    row = *cfg.forced_row;
    if (!std::binary_search(diag.rows.begin(), diag.rows.end(), row)) {
      throw InputError("forced row " + std::to_string(row) + " is not in the blocking set");
    }
  } else {
    for (std::size_t i : diag.rows) {
      if (spec.u1[i] < spec.u1[row]) row = i;
    }
  }

  std::vector<std::size_t> cols;
  for (std::size_t j : complement_columns(x, diag)) {
    if (marg.q()[j] > 0.0) cols.push_back(j);
  }
  std::vector<double> vals, wts;
  for (std::size_t j : cols) {
    vals.push_back(std::max(0.0, spec.v1[j]));
    wts.push_back(marg.q()[j]);
  }
  double available = std::accumulate(wts.begin(), wts.end(), 0.0);
  if (available < diag.delta * (1.0 - 1e-9)) throw InputError(coverage_error(available, diag.delta));
  auto pick = knapsack_min_cover(vals, wts, diag.delta, cfg.knapsack_resolution);

  EdgeAdditionSet out;
  out.weight = weight;
  for (std::size_t k : pick) {
    out.edges.emplace_back(row, cols[k]);
    out.estimated_dlambda1 += weight * spec.u1[row] * spec.v1[cols[k]];
  }
  return out;
}

SparseNetwork add_edges(const SparseNetwork& x,
                        std::span<const std::pair<std::size_t, std::size_t>> edges,
                        double weight) {
  if (!(weight > 0.0) || !std::isfinite(weight)) throw InputError("added edge weight must be positive");
  std::vector<Entry> all(x.entries().begin(), x.entries().end());
  for (const auto& [i, j] : edges) {
    if (i >= x.rows() || j >= x.cols()) throw InputError("added edge out of range");
    if (x.contains(i, j)) throw InputError("added edge already present in the network");
    all.push_back({i, j, weight});
  }
  return SparseNetwork::from_entries(x.rows(), x.cols(), std::move(all));
}

RepairReport conv_ipf(const SparseNetwork& x, const MarginalPair& marg, const RepairConfig& cfg) {
  cfg.validate();
  if (marg.rows() != x.rows() || marg.cols() != x.cols()) {
    throw InputError("marginals do not match network dimensions");
  }
  const std::size_t max_rounds = cfg.max_rounds == 0 ? x.rows() * x.cols() : cfg.max_rounds;
  // Weight anchored on the input network so it stays fixed across rounds.
  const double base = x.empty() ? 1.0 : x.min_positive();
  const double weight = cfg.edge_weight_multiplier * base;

  RepairReport rep;
  rep.lambda1_before = leading_eigenvalue(x);
  SparseNetwork current = x;
  while (true) {
    FlowDiagnostics flow = check_feasibility(current, marg);
    if (flow.feasible) break;
    if (rep.rounds == max_rounds) {
      throw ConvergenceError("repair did not reach a feasible network within " +
                             std::to_string(max_rounds) + " rounds");
    }
    RepairRound round;
    round.blocking = find_blocking_set(current, marg, flow);
    if (cfg.objective == RepairObjective::MinEdges) {
      round.additions = unblock_min_edges(current, marg, round.blocking, cfg.tiebreak);
      round.additions.weight = weight;
    } else {
      SpectralInfo spec;
      if (current.empty()) {
        spec.u1.assign(current.rows(), 1.0 / std::sqrt(static_cast<double>(current.rows())));
        spec.v1.assign(current.cols(), 1.0 / std::sqrt(static_cast<double>(current.cols())));
      } else {
        spec = perron_spectral(current);
      }
      RepairConfig round_cfg = cfg;
      if (rep.rounds > 0) round_cfg.forced_row.reset();
      round.additions = perron_addition(current, marg, round.blocking, spec, round_cfg, weight);
    }
    current = add_edges(current, round.additions.edges, weight);
    rep.total_edges_added += round.additions.edges.size();
    rep.history.push_back(std::move(round));
    ++rep.rounds;
  }
  rep.lambda1_after = leading_eigenvalue(current);
  rep.exact_dlambda1 = rep.lambda1_after - rep.lambda1_before;
  rep.final_network = std::move(current);
  return rep;
}

SparseNetwork fill_all_zeros(const SparseNetwork& x, double fill) {
  if (!(fill > 0.0) || !std::isfinite(fill)) throw InputError("fill value must be positive");
  std::vector<Entry> all;
  all.reserve(x.rows() * x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    std::size_t k = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (k < row.size() && row[k].col == j) {
        all.push_back(row[k++]);
      } else {
        all.push_back({i, j, fill});
      }
    }
  }
  return SparseNetwork::from_entries(x.rows(), x.cols(), std::move(all));
}

}  // namespace ipfnet
