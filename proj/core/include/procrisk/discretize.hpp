#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "procrisk/redflags.hpp"

namespace procrisk {

/// Per-flag risk-category cutpoints: C-1 quantiles for positive-polarity
/// flags, 2C-1 for two-sided ones.
struct ThresholdSet {
  std::string flag_id;
  FlagPolarity polarity = FlagPolarity::positive;
  std::vector<double> cutpoints;  // non-decreasing
};

/// Ordinal risk categories 0..C-1 per (authority, flag); absent cells stay absent.
struct CategoricalMatrix {
  std::vector<std::string> authorities;
  std::vector<std::string> flags;
  std::vector<std::optional<int>> cells;  // row-major
  int categories = 4;

  std::optional<int>& at(std::size_t i, std::size_t j) { return cells[i * flags.size() + j]; }
  const std::optional<int>& at(std::size_t i, std::size_t j) const {
    return cells[i * flags.size() + j];
  }
};

/// Empirical quantile with linear interpolation between order statistics
/// (the common "type 7" rule). With dedupe_on_ties the quantile is taken on
/// the distribution of unique values. Throws on empty input.
double sample_quantile(std::span<const double> values, double tau, bool dedupe_on_ties);

/// Category 0 at or below the first quartile, 3 above the third.
int discretize_positive(double x, const ThresholdSet& cuts);

/// Category 0 around the median, 3 on both extreme tails.
int discretize_two_sided(double x, const ThresholdSet& cuts);

struct DiscretizeResult {
  CategoricalMatrix matrix;
  std::vector<ThresholdSet> thresholds;
};

/// Per-flag thresholds from each flag's observed distribution, then applied
/// cell-wise. Quantiles are recomputed on unique values when any two
/// cutpoints of a flag coincide. Throws when a flag has fewer present
/// values than cutpoints require (names the flag).
DiscretizeResult discretize_matrix(const IndicatorMatrix& m, std::span<const FlagSpec> specs,
                                   int categories = 4);

}  // namespace procrisk
