#include "procrisk/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "procrisk/special.hpp"

namespace procrisk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;  // constant column: undefined
  double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

CorrelationReport correlation_matrix(const IndicatorMatrix& m, CorrelationMethod method,
                                     double alpha) {
  std::size_t J = m.flags.size();
  CorrelationReport rep;
  rep.method = method;
  rep.flags = m.flags;
  rep.alpha = alpha;
  rep.comparisons = static_cast<int>(J * (J - 1) / 2);
  rep.r.assign(J * J, kNaN);
  rep.p.assign(J * J, kNaN);
  rep.tested.assign(J * J, 0);
  rep.significant.assign(J * J, 0);

  for (std::size_t a = 0; a < J; ++a) {
    rep.r[rep.idx(a, a)] = 1.0;  // identity, never tested
    for (std::size_t b = a + 1; b < J; ++b) {
      std::vector<double> x, y;
      for (std::size_t i = 0; i < m.authorities.size(); ++i)
        if (m.at(i, a) && m.at(i, b)) {
          x.push_back(*m.at(i, a));
          y.push_back(*m.at(i, b));
        }
      double r = kNaN, p = kNaN;
      bool tested = false, significant = false;
      if (x.size() >= 3) {
        if (method == CorrelationMethod::spearman_rank) {
          x = midranks(x);
          y = midranks(y);
        }
        r = pearson(x, y);
        if (!std::isnan(r)) {
          tested = true;
          double df = static_cast<double>(x.size() - 2);
          if (std::fabs(r) >= 1.0) {
            p = 0.0;
          } else {
            double t = r * std::sqrt(df / (1.0 - r * r));
            p = special::student_t_two_sided(t, df);
          }
          significant = p < rep.per_test_level();
        }
      }
      for (auto [i, j] : {std::pair{a, b}, std::pair{b, a}}) {
        rep.r[rep.idx(i, j)] = r;
        rep.p[rep.idx(i, j)] = p;
        rep.tested[rep.idx(i, j)] = tested ? 1 : 0;
        rep.significant[rep.idx(i, j)] = significant ? 1 : 0;
      }
    }
  }
  return rep;
}

}  // namespace procrisk
