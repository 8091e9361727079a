// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "procrisk/correlation.hpp"
#include "procrisk/discretize.hpp"
#include "procrisk/grm.hpp"
#include "procrisk/pipeline.hpp"
#include "procrisk/redflags.hpp"
#include "procrisk/rng.hpp"
#include "procrisk/rotation.hpp"
#include "procrisk/selection.hpp"

using namespace procrisk;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  if (!pass) ++failures;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

struct SweepRow {
  int dims;
  double loglik;
  int k;
  double aic, sabic, hqc, bic;
  double chi2;
};
const SweepRow kSweep[] = {
    {1, -57572.4, 60, 115264.9, 115492.7, 115408.2, 115683.4, 0.0},
    {2, -55277.1, 74, 110702.1, 110983.2, 110878.9, 111218.3, 4590.7},
    {3, -54426.1, 87, 109026.3, 109356.7, 109234.1, 109633.2, 1701.9},
    {4, -53984.6, 99, 108167.1, 108543.1, 108403.7, 108857.7, 883.1},
    {5, -53696.8, 110, 107613.7, 108031.4, 107876.4, 108381.0, 575.5},
    {6, -53566.7, 120, 107373.3, 107829.1, 107660.0, 108210.4, 260.3},
    {7, -53507.2, 129, 107272.4, 107762.3, 107580.6, 108172.2, 118.9},
};
constexpr int kN = 7900;

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- criterion 1 -----------------------------------------------------------
void criterion_information_criteria() {
  auto t0 = std::chrono::steady_clock::now();
  int checks = 0;
  double worst = 0.0;
  for (const auto& r : kSweep) {
    auto c = info_criteria(r.loglik, r.k, kN);
    // compare at the published table's one-decimal precision
    for (auto [got, want] : {std::pair{c.aic, r.aic}, {c.sabic, r.sabic}, {c.hqc, r.hqc},
                             {c.bic, r.bic}}) {
      worst = std::max(worst, std::fabs(round1(got) - want));
      ++checks;
    }
  }
  double secs = elapsed_s(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "AIC/SABIC/HQC/BIC reproduction: %d checks, worst |dev| %.3f (<= 0.2), %.3fs",
                checks, worst, secs);
  report(1, checks == 28 && worst <= 0.2 + 1e-12 && secs < 1.0, buf);
}

// --- criterion 2 -----------------------------------------------------------
void criterion_parameter_counts() {
  bool ok = true;
  for (const auto& r : kSweep) ok = ok && free_parameter_count(15, 4, r.dims) == r.k;
  report(2, ok, "parameter count k(J=15, C=4, D) exact for D = 1..7");
}

// --- criterion 3 -----------------------------------------------------------
void criterion_lrt() {
  bool ok = true;
  double worst = 0.0;
  const int dfs[] = {14, 13, 12, 11, 10, 9};
  for (std::size_t i = 1; i < std::size(kSweep); ++i) {
    int df = kSweep[i].k - kSweep[i - 1].k;
    ok = ok && df == dfs[i - 1];
    auto t = lr_test(kSweep[i - 1].loglik, kSweep[i].loglik, df);
    worst = std::max(worst, std::fabs(t.chi2 - kSweep[i].chi2));
    ok = ok && t.p < 0.001;
  }
  ok = ok && worst <= 0.2;
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "six LRTs: worst |chi2 dev| %.2f (<= 0.2), df 14..9, all p < 0.001", worst);
  report(3, ok, buf);
}

// --- criterion 4 -----------------------------------------------------------
void criterion_selection() {
  std::vector<SelectionRow> bare;
  for (const auto& r : kSweep) {
    SelectionRow row;
    row.dims = r.dims;
    row.loglik = r.loglik;
    row.k = r.k;
    bare.push_back(row);
  }
  auto rows = build_selection_rows(bare, kN);
  auto rep = select_dimension(rows);  // defaults: {aic, bic}, 0.25%
  char buf[96];
  std::snprintf(buf, sizeof buf, "default elbow rule on the published series chooses D = %d",
                rep.chosen_dims);
  report(4, rep.chosen_dims == 5, buf);
}

// --- criterion 5 -----------------------------------------------------------
void criterion_likelihood_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  Rng prng(20250640);
  GrmParams p;
  p.slopes.resize(3, 1);
  p.intercepts.resize(3, 3);
  for (int j = 0; j < 3; ++j) {
    p.slopes(j, 0) = 0.6 + prng.uniform();
    double b = 1.0 + prng.uniform();
    for (int y = 0; y < 3; ++y) {
      p.intercepts(j, y) = b;
      b -= 0.6 + prng.uniform();
    }
  }
  CategoricalMatrix data = simulate(p, 20, 77001);

  double gh = marginal_loglik(p, data, QuadratureGrid::gauss_hermite(1, 15));

  QuadratureGrid dense;
  dense.nodes.resize(2001, 1);
  dense.weights.resize(2001);
  for (int i = 0; i < 2001; ++i) {
    double x = -10.0 + i * 0.01;
    dense.nodes(i, 0) = x;
    double w = std::exp(-0.5 * x * x) * 0.01;
    if (i == 0 || i == 2000) w *= 0.5;
    dense.weights(i) = w;
  }
  dense.weights /= dense.weights.sum();
  double wide = marginal_loglik(p, data, dense);

  double secs = elapsed_s(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "15-node Gauss-Hermite vs 2001-node dense grid: |dev| %.2e (< 1e-4), %.3fs",
                std::fabs(gh - wide), secs);
  report(5, std::fabs(gh - wide) < 1e-4 && secs < 1.0, buf);
}

// --- criteria 6 and 8 ------------------------------------------------------
FitResult recovery_fit;
GrmParams recovery_truth;
bool recovery_available = false;

void criterion_recovery() {
  auto t0 = std::chrono::steady_clock::now();
  GrmParams truth;
  truth.slopes = Eigen::MatrixXd::Zero(15, 2);
  truth.intercepts.resize(15, 3);
  Rng prng(11235813);
  for (int j = 0; j < 15; ++j) {
    if (j < 7) truth.slopes(j, 0) = 1.0 + 1.2 * prng.uniform();
    else if (j < 14) truth.slopes(j, 1) = 1.0 + 1.2 * prng.uniform();
    else truth.slopes.row(j) << 0.9, 0.9;
    double b = 1.2 + 0.6 * prng.uniform();
    for (int y = 0; y < 3; ++y) {
      truth.intercepts(j, y) = b;
      b -= 0.9 + 0.5 * prng.uniform();
    }
  }
  CategoricalMatrix data = simulate(truth, 2000, 271828);

  FitConfig config;
  config.categories = 4;
  FitResult fit_result];
