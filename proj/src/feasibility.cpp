#include "ipfnet/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace ipfnet {

namespace {

// Dinic's algorithm over real capacities. Bottlenecks below `cutoff` are
// treated as saturated.
class Dinic {
 public:
  struct Arc {
    std::size_t to;
    double cap;
    double flow = 0.0;
  };

  Dinic(std::size_t nodes, double cutoff) : adj_(nodes), level_(nodes), next_(nodes), cutoff_(cutoff) {}

  std::size_t add_arc(std::size_t from, std::size_t to, double cap) {
    std::size_t id = arcs_.size();
    arcs_.push_back({to, cap});
    arcs_.push_back({from, 0.0});
    adj_[from].push_back(id);
    adj_[to].push_back(id + 1);
    return id;
  }

  double run(std::size_t s, std::size_t t) {
    double total = 0.0;
    while (build_levels(s, t)) {
      std::fill(next_.begin(), next_.end(), 0);
      while (true) {
        double pushed = augment(s, t, std::numeric_limits<double>::infinity());
        if (pushed <= cutoff_) break;
        total += pushed;
      }
    }
    return total;
  }

  const Arc& arc(std::size_t id) const { return arcs_[id]; }

 private:
  double residual(std::size_t id) const { return arcs_[id].cap - arcs_[id].flow; }

  bool build_levels(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> bfs;
    level_[s] = 0;
    bfs.push(s);
    while (!bfs.empty()) {
      std::size_t v = bfs.front();
      bfs.pop();
      for (std::size_t id : adj_[v]) {
        std::size_t w = arcs_[id].to;
        if (level_[w] < 0 && residual(id) > cutoff_) {
          level_[w] = level_[v] + 1;
          bfs.push(w);
        }
      }
    }
    return level_[t] >= 0;
  }

  double augment(std::size_t v, std::size_t t, double limit) {
    if (v == t) return limit;
    for (; next_[v] < adj_[v].size(); ++next_[v]) {
      std::size_t id = adj_[v][next_[v]];
      std::size_t w = arcs_[id].to;
      if (level_[w] != level_[v] + 1 || residual(id) <= cutoff_) continue;
      double pushed = augment(w, t, std::min(limit, residual(id)));
      if (pushed > cutoff_) {
        arcs_[id].flow += pushed;
        arcs_[id ^ 1].flow -= pushed;
        return pushed;
      }
    }
    return 0.0;
  }

  std::vector<Arc> arcs_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> next_;
  double cutoff_;
};

}  // namespace

FlowDiagnostics check_feasibility(const SparseNetwork& x, const MarginalPair& marg) {
  if (marg.rows() != x.rows() || marg.cols() != x.cols()) {
    throw InputError("marginals do not match network dimensions");
  }
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  const std::size_t source = 0;
  const std::size_t sink = m + n + 1;
  auto row_node = [](std::size_t i) { return 1 + i; };
  auto col_node = [m](std::size_t j) { return 1 + m + j; };

  double scale = std::max(1.0, marg.total());
  Dinic flow(m + n + 2, 1e-12 * scale);
  for (std::size_t i = 0; i < m; ++i) {
    if (marg.p()[i] > 0.0) flow.add_arc(source, row_node(i), marg.p()[i]);
  }
  std::vector<std::size_t> edge_arc;
  edge_arc.reserve(x.nnz());
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& e : x.entries()) {
    edge_arc.push_back(flow.add_arc(row_node(e.row), col_node(e.col), inf));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (marg.q()[j] > 0.0) flow.add_arc(col_node(j), sink, marg.q()[j]);
  }

  FlowDiagnostics diag;
  diag.max_flow_value = flow.run(source, sink);
  diag.target = marg.total();
  diag.edge_flows.resize(x.nnz());
  diag.row_flow.assign(m, 0.0);
  diag.col_flow.assign(n, 0.0);
  auto entries = x.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    double f = std::max(0.0, flow.arc(edge_arc[k]).flow);
    diag.edge_flows[k] = f;
    diag.row_flow[entries[k].row] += f;
    diag.col_flow[entries[k].col] += f;
  }
  diag.feasible =
      std::abs(diag.max_flow_value - diag.target) <= kFeasibilityRelTol * std::max(diag.target, 1e-300);
  return diag;
}

SparseNetwork flow_matrix(const SparseNetwork& x, const FlowDiagnostics& flow) {
  return x.with_values(flow.edge_flows);
}

std::vector<std::size_t> neighbor_columns(const SparseNetwork& x,
                                          std::span<const std::size_t> rows) {
  std::vector<char> hit(x.cols(), 0);
  for (std::size_t i : rows) {
    if (i >= x.rows()) throw InputError("row index " + std::to_string(i) + " out of range");
    for (const auto& e : x.row(i)) hit[e.col] = 1;
  }
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    if (hit[j]) cols.push_back(j);
  }
  return cols;
}

bool verify_blocking(const SparseNetwork& x, const MarginalPair& marg,
                     std::span<const std::size_t> rows) {
  auto cols = neighbor_columns(x, rows);
  double ps = 0.0, qs = 0.0;
  for (std::size_t i : rows) ps += marg.p()[i];
  for (std::size_t j : cols) qs += marg.q()[j];
  return ps > qs;
}

BlockingDiagnosis find_blocking_set(const SparseNetwork& x, const MarginalPair& marg,
                                    const FlowDiagnostics& flow) {
  if (flow.feasible) throw InputError("find_blocking_set called on feasible input");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();

  std::size_t start = m;
  double best_deficit = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double deficit = marg.p()[i] - flow.row_flow[i];
    if (deficit > best_deficit) {
      best_deficit = deficit;
      start = i;
    }
  }
  if (start == m) throw InputError("no row with unmet demand; flow is not short");

  // Column -> rows carrying positive flow into it.
  std::vector<std::vector<std::size_t>> feeders(n);
  auto entries = x.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (flow.edge_flows[k] > 0.0) feeders[entries[k].col].push_back(entries[k].row);
  }

  std::vector<char> row_seen(m, 0), col_seen(n, 0);
  std::queue<std::size_t> frontier;
  row_seen[start] = 1;
  frontier.push(start);
  while (!frontier.empty()) {
    std::size_t i = frontier.front();
    frontier.pop();
    for (const auto& e : x.row(i)) {
      if (col_seen[e.col]) continue;
      col_seen[e.col] = 1;
      for (std::size_t r : feeders[e.col]) {
        if (!row_seen[r]) {
          row_seen[r] = 1;
          frontier.push(r);
        }
      }
    }
  }

  BlockingDiagnosis d;
  for (std::size_t i = 0; i < m; ++i) {
    if (row_seen[i]) {
      d.rows.push_back(i);
      d.p_sum += marg.p()[i];
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (col_seen[j]) {
      d.neighbor_cols.push_back(j);
      d.q_sum += marg.q()[j];
    }
  }
  d.delta = d.p_sum - d.q_sum;
  return d;
}

}  // namespace ipfnet
