#pragma once

#include <string>
#include <vector>

#include "procrisk/redflags.hpp"

namespace procrisk {

enum class CorrelationMethod { pearson_linear, spearman_rank };

/// Pairwise-complete correlations over the indicator columns with a
/// Bonferroni-adjusted two-sided significance screen.
struct CorrelationReport {
  CorrelationMethod method = CorrelationMethod::pearson_linear;
  std::vector<std::string> flags;
  std::vector<double> r;               // J x J row-major, NaN when untestable
  std::vector<double> p;               // two-sided p-values, NaN when untestable
  std::vector<unsigned char> tested;   // diagonal and sparse pairs are not
  std::vector<unsigned char> significant;
  double alpha = 0.05;
  int comparisons = 0;                 // J(J-1)/2

  std::size_t idx(std::size_t a, std::size_t b) const { return a * flags.size() + b; }
  double per_test_level() const { return alpha / comparisons; }
};

/// Midranks of a vector (ties get the average rank, 1-based).
std::vector<double> midranks(std::span<const double> values);

CorrelationReport correlation_matrix(const IndicatorMatrix& m, CorrelationMethod method,
                                     double alpha = 0.05);

}  // namespace procrisk
