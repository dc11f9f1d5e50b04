#include "ipfnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ipfnet {

namespace {

std::string coord(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

}  // namespace

SparseNetwork::SparseNetwork(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

SparseNetwork SparseNetwork::from_entries(std::size_t rows, std::size_t cols,
                                          std::vector<Entry> entries) {
  SparseNetwork net(rows, cols);
  std::erase_if(entries, [](const Entry& e) { return e.weight == 0.0; });
  for (const auto& e : entries) {
    if (e.row >= rows || e.col >= cols) {
      throw InputError("entry " + coord(e.row, e.col) + " out of range for " +
                       std::to_string(rows) + "x" + std::to_string(cols) + " network");
    }
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw InputError("entry " + coord(e.row, e.col) + " has invalid weight " +
                       std::to_string(e.weight));
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col) {
      throw InputError("duplicate entry " + coord(entries[k].row, entries[k].col));
    }
  }
  net.entries_ = std::move(entries);
  net.build_offsets();
  return net;
}

SparseNetwork SparseNetwork::from_dense(std::size_t rows, std::size_t cols,
                                        std::span<const double> values) {
  if (values.size() != rows * cols) {
    throw InputError("dense input has " + std::to_string(values.size()) +
                     " values, expected " + std::to_string(rows * cols));
  }
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double w = values[i * cols + j];
      if (w != 0.0) entries.push_back({i, j, w});
    }
  }
  return from_entries(rows, cols, std::move(entries));
}

SparseNetwork SparseNetwork::from_dense(const std::vector<std::vector<double>>& rows) {
  std::size_t m = rows.size();
  std::size_t n = m == 0 ? 0 : rows.front().size();
  std::vector<double> flat;
  flat.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw InputError("ragged dense input");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return from_dense(m, n, flat);
}

void SparseNetwork::build_offsets() {
  row_offsets_.assign(rows_ + 1, 0);
  for (const auto& e : entries_) ++row_offsets_[e.row + 1];
  std::partial_sum(row_offsets_.begin(), row_offsets_.end(), row_offsets_.begin());
}

std::span<const Entry> SparseNetwork::row(std::size_t i) const {
  return std::span<const Entry>(entries_).subspan(row_offsets_[i],
                                                  row_offsets_[i + 1] - row_offsets_[i]);
}

double SparseNetwork::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) return 0.0;
  auto r = row(i);
  auto it = std::lower_bound(r.begin(), r.end(), j,
                             [](const Entry& e, std::size_t c) { return e.col < c; });
  return (it != r.end() && it->col == j) ? it->weight : 0.0;
}

double SparseNetwork::total() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.weight;
  return s;
}

std::vector<double> SparseNetwork::row_sums() const {
  std::vector<double> s(rows_, 0.0);
  for (const auto& e : entries_) s[e.row] += e.weight;
  return s;
}

std::vector<double> SparseNetwork::col_sums() const {
  std::vector<double> s(cols_, 0.0);
  for (const auto& e : entries_) s[e.col] += e.weight;
  return s;
}

double SparseNetwork::min_positive() const {
  if (entries_.empty()) return 0.0;
  double mn = entries_.front().weight;
  for (const auto& e : entries_) mn = std::min(mn, e.weight);
  return mn;
}

SparseNetwork SparseNetwork::transpose() const {
  std::vector<Entry> t;
  t.reserve(entries_.size());
  for (const auto& e : entries_) t.push_back({e.col, e.row, e.weight});
  return from_entries(cols_, rows_, std::move(t));
}

SparseNetwork SparseNetwork::scaled(double factor) const {
  std::vector<double> v(entries_.size());
  for (std::size_t k = 0; k < entries_.size(); ++k) v[k] = entries_[k].weight * factor;
  return with_values(v);
}

SparseNetwork SparseNetwork::with_values(std::span<const double> values) const {
  if (values.size() != entries_.size()) {
    throw InputError("value array does not match network support");
  }
  SparseNetwork out(rows_, cols_);
  out.entries_.reserve(entries_.size());
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (values[k] > 0.0) out.entries_.push_back({entries_[k].row, entries_[k].col, values[k]});
  }
  out.build_offsets();
  return out;
}

std::vector<double> SparseNetwork::to_dense() const {
  std::vector<double> d(rows_ * cols_, 0.0);
  for (const auto& e : entries_) d[e.row * cols_ + e.col] = e.weight;
  return d;
}

MarginalPair::MarginalPair(std::vector<double> p, std::vector<double> q, double rel_tol)
    : p_(std::move(p)), q_(std::move(q)) {
  auto check = [](const std::vector<double>& v, const char* name) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!std::isfinite(v[k]) || v[k] < 0.0) {
        throw InputError(std::string("marginal ") + name + "[" + std::to_string(k) +
                         "] is negative or not finite");
      }
    }
  };
  check(p_, "p");
  check(q_, "q");
  double sp = std::accumulate(p_.begin(), p_.end(), 0.0);
  double sq = std::accumulate(q_.begin(), q_.end(), 0.0);
  if (std::abs(sp - sq) > rel_tol * sp) {
    throw InputError("marginal totals disagree: sum p = " + std::to_string(sp) +
                     ", sum q = " + std::to_string(sq));
  }
  if (sq > 0.0 && sp != sq) {
    double f = sp / sq;
    for (auto& x : q_) x *= f;
  }
  total_ = sp;
}

SparseNetwork aggregate(const NetworkSeries& series) {
  if (series.slices.empty()) throw InputError("cannot aggregate an empty series");
  std::size_t m = series.slices.front().rows();
  std::size_t n = series.slices.front().cols();
  std::vector<Entry> all;
  for (const auto& s : series.slices) {
    if (s.rows() != m || s.cols() != n) {
      throw InputError("series slices have mismatched dimensions");
    }
    all.insert(all.end(), s.entries().begin(), s.entries().end());
  }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Entry> merged;
  for (const auto& e : all) {
    if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
      merged.back().weight += e.weight;
    } else {
      merged.push_back(e);
    }
  }
  return SparseNetwork::from_entries(m, n, std::move(merged));
}

MarginalPair marginals(const SparseNetwork& net) {
  // Totals of row and column sums can differ in the last bits; accept that.
  return MarginalPair(net.row_sums(), net.col_sums(), 1e-9);
}

MarginalPair validate_pair(const SparseNetwork& net, const MarginalPair& marg,
                           double rel_tol) {
  if (marg.rows() != net.rows() || marg.cols() != net.cols()) {
    throw InputError("marginal lengths (" + std::to_string(marg.rows()) + ", " +
                     std::to_string(marg.cols()) + ") do not match network " +
                     std::to_string(net.rows()) + "x" + std::to_string(net.cols()));
  }
  if (!(marg.total() > 0.0)) throw InputError("marginal total must be positive");
  return MarginalPair(marg.p(), marg.q(), rel_tol);
}

}  // namespace ipfnet
