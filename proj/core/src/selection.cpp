#include "procrisk/selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "procrisk/special.hpp"

namespace procrisk {

InfoCriteria info_criteria(double loglik, int k, int n) {
  if (n <= 2)
    throw std::invalid_argument("info_criteria: n must exceed e for the Hannan-Quinn index");
  if (k < 0) throw std::invalid_argument("info_criteria: negative parameter count");
  double deviance = -2.0 * loglik;
  InfoCriteria c;
  c.aic = deviance + 2.0 * k;
  c.bic = deviance + k * std::log(static_cast<double>(n));
  c.sabic = deviance + k * std::log((static_cast<double>(n) + 2.0) / 24.0);
  c.hqc = deviance + 2.0 * k * std::log(std::log(static_cast<double>(n)));
  return c;
}

LrTest lr_test(double loglik_small, double loglik_large, int df) {
  if (df < 1) throw std::invalid_argument("lr_test: df must be positive");
  LrTest t;
  t.chi2 = std::max(0.0, 2.0 * (loglik_large - loglik_small));
  t.p = t.chi2 == 0.0 ? 1.0 : special::chi_square_upper(t.chi2, static_cast<double>(df));
  return t;
}

std::string to_string(IndexKind k) {
  switch (k) {
    case IndexKind::aic: return "aic";
    case IndexKind::sabic: return "sabic";
    case IndexKind::hqc: return "hqc";
    case IndexKind::bic: return "bic";
  }
  return "?";
}

double index_value(const InfoCriteria& c, IndexKind k) {
  switch (k) {
    case IndexKind::aic: return c.aic;
    case IndexKind::sabic: return c.sabic;
    case IndexKind::hqc: return c.hqc;
    case IndexKind::bic: return c.bic;
  }
  return 0.0;
}

std::vector<double> relative_improvements(std::span<const SelectionRow> rows, IndexKind index) {
  if (rows.size() < 2)
    throw std::invalid_argument("relative_improvements: need at least two rows");
  std::vector<double> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    double prev = index_value(rows[i - 1].criteria, index);
    double cur = index_value(rows[i].criteria, index);
    out.push_back(100.0 * (prev - cur) / prev);
  }
  return out;
}

SelectionReport select_dimension(std::vector<SelectionRow> rows, double threshold_pct,
                                 std::vector<IndexKind> indexes) {
  if (rows.empty()) throw std::invalid_argument("select_dimension: no rows");
  if (!(threshold_pct > 0.0)) throw std::invalid_argument("select_dimension: threshold must be positive");
  if (indexes.empty()) throw std::invalid_argument("select_dimension: empty index set");
  std::sort(rows.begin(), rows.end(),
            [](const SelectionRow& a, const SelectionRow& b) { return a.dims < b.dims; });

  SelectionReport rep;
  rep.rows = rows;
  rep.indexes = indexes;
  rep.threshold_pct = threshold_pct;
  for (IndexKind k : indexes)
    rep.improvements.push_back(rows.size() >= 2 ? relative_improvements(rows, k)
                                                : std::vector<double>{});

  // improvements[*][i-1] belongs to rows[i]; a candidate row is a plateau
  // start when everything after it improves below the threshold
  int chosen = -1;
  for (std::size_t cand = 0; cand < rows.size(); ++cand) {
    bool plateau = true;
    for (std::size_t later = cand + 1; later < rows.size() && plateau; ++later)
      for (const auto& series : rep.improvements)
        if (series[later - 1] >= threshold_pct) {
          plateau = false;
          break;
        }
    if (plateau) {
      chosen = rows[cand].dims;
      break;
    }
  }
  if (chosen < 0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (index_value(rows[i].criteria, indexes.front()) <
          index_value(rows[best].criteria, indexes.front()))
        best = i;
    chosen = rows[best].dims;
  }
  rep.chosen_dims = chosen;
  return rep;
}

std::vector<SelectionRow> build_selection_rows(std::span<const SelectionRow> bare, int n) {
  std::vector<SelectionRow> rows(bare.begin(), bare.end());
  std::sort(rows.begin(), rows.end(),
            [](const SelectionRow& a, const SelectionRow& b) { return a.dims < b.dims; });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].criteria = info_criteria(rows[i].loglik, rows[i].k, n);
    if (i > 0) {
      int df = rows[i].k - rows[i - 1].k;
      if (df >= 1) {
        LrTest t = lr_test(rows[i - 1].loglik, rows[i].loglik, df);
        rows[i].lrt_chi2 = t.chi2;
        rows[i].lrt_df = df;
        rows[i].lrt_p = t.p;
      }
    }
  }
  return rows;
}

}  // namespace procrisk
