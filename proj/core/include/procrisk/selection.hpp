#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace procrisk {

struct InfoCriteria {
  double aic = 0.0, sabic = 0.0, hqc = 0.0, bic = 0.0;
};

/// AIC = -2l + 2k, BIC = -2l + k ln n, SABIC = -2l + k ln((n+2)/24),
/// HQC = -2l + 2k ln ln n. Throws when n <= 2 (HQC undefined).
InfoCriteria info_criteria(double loglik, int k, int n);

struct LrTest {
  double chi2 = 0.0;
  double p = 1.0;
};

/// chi2 = 2(l_large - l_small) floored at zero, p from the chi-square
/// upper tail with df degrees of freedom.
LrTest lr_test(double loglik_small, double loglik_large, int df);

enum class IndexKind { aic, sabic, hqc, bic };
std::string to_string(IndexKind k);
double index_value(const InfoCriteria& c, IndexKind k);

struct SelectionRow {
  int dims = 0;
  double loglik = 0.0;
  int k = 0;
  InfoCriteria criteria;
  std::optional<double> lrt_chi2;  // vs the previous row; absent on the first
  std::optional<int> lrt_df;
  std::optional<double> lrt_p;
};

/// Percentage decrease of an index against the previous row:
/// 100 (idx_{D-1} - idx_D) / idx_{D-1}, one value per row from the second.
std::vector<double> relative_improvements(std::span<const SelectionRow> rows, IndexKind index);

struct SelectionReport {
  std::vector<SelectionRow> rows;  // ordered by dims
  std::vector<IndexKind> indexes;
  double threshold_pct = 0.25;
  std::vector<std::vector<double>> improvements;  // one series per index
  int chosen_dims = 0;
};

/// Plateau rule: the smallest D whose every later improvement, for every
/// index in the set, stays below the threshold; argmin of the first index
/// when no plateau exists.
SelectionReport select_dimension(std::vector<SelectionRow> rows, double threshold_pct = 0.25,
                                 std::vector<IndexKind> indexes = {IndexKind::aic,
                                                                   IndexKind::bic});

/// Fills per-row criteria and consecutive likelihood-ratio tests from
/// (dims, loglik, k) triples ordered by dims.
std::vector<SelectionRow> build_selection_rows(std::span<const SelectionRow> bare, int n);

}  // namespace procrisk
