#include "procrisk/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace procrisk {

namespace {

double quantile_sorted(const std::vector<double>& sorted, double tau) {
  double h = (static_cast<double>(sorted.size()) - 1.0) * tau;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> compute_cutpoints(std::vector<double> values,
                                      const std::vector<double>& taus, bool dedupe) {
  std::sort(values.begin(), values.end());
  if (dedupe) values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> cuts;
  cuts.reserve(taus.size());
  for (double tau : taus) cuts.push_back(quantile_sorted(values, tau));
  return cuts;
}

bool any_coincide(const std::vector<double>& cuts) {
  for (std::size_t i = 1; i < cuts.size(); ++i)
    if (cuts[i] == cuts[i - 1]) return true;
  return false;
}

}  // namespace

double sample_quantile(std::span<const double> values, double tau, bool dedupe_on_ties) {
  if (values.empty()) throw std::invalid_argument("sample_quantile: empty input");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("sample_quantile: tau outside (0,1)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (dedupe_on_ties) sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  return quantile_sorted(sorted, tau);
}

int discretize_positive(double x, const ThresholdSet& cuts) {
  int cat = 0;
  for (double c : cuts.cutpoints)
    if (x > c) ++cat;
  return cat;
}

int discretize_two_sided(double x, const ThresholdSet& cuts) {
  // bins 1..2C split by the 2C-1 cutpoints; category grows with the
  // distance from the two middle bins
  int parts = static_cast<int>(cuts.cutpoints.size()) + 1;
  int c = parts / 2;
  int bin = 1;
  for (double cut : cuts.cutpoints)
    if (x > cut) ++bin;
  return std::max(c - bin, bin - c - 1);
}

DiscretizeResult discretize_matrix(const IndicatorMatrix& m, std::span<const FlagSpec> specs,
                                   int categories) {
  if (categories < 2) throw std::invalid_argument("discretize_matrix: need at least 2 categories");
  if (specs.size() != m.flags.size())
    throw std::invalid_argument("discretize_matrix: spec list does not match matrix flags");

  DiscretizeResult out;
  out.matrix.authorities = m.authorities;
  out.matrix.flags = m.flags;
  out.matrix.categories = categories;
  out.matrix.cells.assign(m.cells.size(), std::nullopt);

  for (std::size_t j = 0; j < m.flags.size(); ++j) {
    const FlagSpec& spec = specs[j];
    bool two_sided = spec.polarity == FlagPolarity::two_sided;
    int n_cuts = two_sided ? 2 * categories - 1 : categories - 1;

    std::vector<double> present;
    for (std::size_t i = 0; i < m.authorities.size(); ++i)
      if (m.at(i, j)) present.push_back(*m.at(i, j));
    if (present.size() < static_cast<std::size_t>(n_cuts + 1))
      throw std::invalid_argument("discretize_matrix: flag '" + m.flags[j] + "' has only " +
                                  std::to_string(present.size()) +
                                  " present values, needs at least " + std::to_string(n_cuts + 1));

    std::vector<double> taus;
    for (int k = 1; k <= n_cuts; ++k)
      taus.push_back(static_cast<double>(k) / static_cast<double>(n_cuts + 1));

    std::vector<double> cuts = compute_cutpoints(present, taus, false);
    if (any_coincide(cuts)) cuts = compute_cutpoints(present, taus, true);

    ThresholdSet t{m.flags[j], spec.polarity, std::move(cuts)};
    for (std::size_t i = 0; i < m.authorities.size(); ++i)
      if (m.at(i, j))
        out.matrix.at(i, j) =
            two_sided ? discretize_two_sided(*m.at(i, j), t) : discretize_positive(*m.at(i, j), t);
    out.thresholds.push_back(std::move(t));
  }
  return out;
}

}  // namespace procrisk
