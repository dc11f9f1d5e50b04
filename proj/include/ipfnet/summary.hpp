// Small descriptive-statistics helpers used by diagnostics and experiment
// drivers.
#pragma once

#include <span>
#include <vector>

namespace ipfnet {

/// Linear-interpolation percentile (same convention as numpy's default),
/// q in [0, 100]. Throws InputError on empty input.
double percentile(std::span<const double> values, double q);

double mean(std::span<const double> values);

/// Mean with a 2.5-97.5 percentile band.
struct Band {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

Band band(std::span<const double> values);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace ipfnet
