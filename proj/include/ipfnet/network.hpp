// Bipartite weighted networks in coordinate form, marginal pairs, and
// time-indexed series of networks.
//
// A SparseNetwork stores only strictly positive weights, sorted row-major with
// no duplicate coordinates. The same type is used for the aggregated network,
// for individual time slices, and for fitted estimates.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ipfnet/errors.hpp"

namespace ipfnet {

struct Entry {
  std::size_t row = 0;
  std::size_t col = 0;
  double weight = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

class SparseNetwork {
 public:
  SparseNetwork() = default;
  /// Empty (all-zero) rows x cols network.
  SparseNetwork(std::size_t rows, std::size_t cols);

  /// Builds a network from unordered triplets. Zero weights are dropped;
  /// negative or non-finite weights, out-of-range indices and duplicate
  /// coordinates raise InputError.
  static SparseNetwork from_entries(std::size_t rows, std::size_t cols,
                                    std::vector<Entry> entries);

  /// Row-major dense input of size rows*cols.
  static SparseNetwork from_dense(std::size_t rows, std::size_t cols,
                                  std::span<const double> values);
  static SparseNetwork from_dense(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::span<const Entry> entries() const { return entries_; }
  /// Entries of row i (contiguous, sorted by column).
  std::span<const Entry> row(std::size_t i) const;
  /// Offset of the first entry of row i in entries(); row_offset(rows()) == nnz().
  std::size_t row_offset(std::size_t i) const { return row_offsets_[i]; }

  /// Weight at (i, j), zero when absent.
  double at(std::size_t i, std::size_t j) const;
  bool contains(std::size_t i, std::size_t j) const { return at(i, j) > 0.0; }

  double total() const;
  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  /// Smallest stored weight; zero for an empty network.
  double min_positive() const;

  SparseNetwork transpose() const;
  SparseNetwork scaled(double factor) const;
  /// Same support, weights replaced by `values` (aligned with entries()).
  /// Non-positive values are dropped from the result.
  SparseNetwork with_values(std::span<const double> values) const;
  std::vector<double> to_dense() const;

  friend bool operator==(const SparseNetwork&, const SparseNetwork&) = default;

 private:
  void build_offsets();

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Entry> entries_;
  std::vector<std::size_t> row_offsets_{0};
};

/// Target row sums p and column sums q for one time step.
class MarginalPair {
 public:
  MarginalPair() = default;

  /// Validates non-negativity and finiteness; when |sum p - sum q| is within
  /// rel_tol * sum p, q is rescaled by sum p / sum q so both totals agree.
  /// Larger mismatches raise InputError.
  MarginalPair(std::vector<double> p, std::vector<double> q, double rel_tol = 1e-6);

  const std::vector<double>& p() const { return p_; }
  const std::vector<double>& q() const { return q_; }
  std::size_t rows() const { return p_.size(); }
  std::size_t cols() const { return q_.size(); }
  double total() const { return total_; }

  friend bool operator==(const MarginalPair&, const MarginalPair&) = default;

 private:
  std::vector<double> p_;
  std::vector<double> q_;
  double total_ = 0.0;
};

/// Ordered time slices sharing the same shape.
struct NetworkSeries {
  std::vector<std::string> timesteps;
  std::vector<SparseNetwork> slices;
};

/// Entrywise sum of all slices.
SparseNetwork aggregate(const NetworkSeries& series);

/// Row and column sums of `net`. Totals agree up to floating-point rounding.
MarginalPair marginals(const SparseNetwork& net);

/// Checks that `marg` fits `net` and has a positive total. Returns a copy with
/// q rescaled onto sum p when the totals differ by at most rel_tol.
MarginalPair validate_pair(const SparseNetwork& net, const MarginalPair& marg,
                           double rel_tol = 1e-6);

}  // namespace ipfnet
