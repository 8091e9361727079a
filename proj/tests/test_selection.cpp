#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "procrisk/rng.hpp"
#include "procrisk/selection.hpp"

using namespace procrisk;

namespace {

// Published model-selection sweep used as ground truth throughout:
// J = 15 four-category items, n = 7900, D = 1..7.
struct SweepRow {
  int dims;
  double loglik;
  int k;
  double aic, sabic, hqc, bic;
  double chi2;  // vs the previous dimension; 0 on the first row
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

std::vector<SelectionRow> sweep_rows() {
  std::vector<SelectionRow> bare;
  for (const auto& r : kSweep) {
    SelectionRow row;
    row.dims = r.dims;
    row.loglik = r.loglik;
    row.k = r.k;
    bare.push_back(row);
  }
  return build_selection_rows(bare, kN);
}

}  // namespace

TEST_CASE("information criteria: published sweep reproduced within print precision") {
  for (const auto& r : kSweep) {
    auto c = info_criteria(r.loglik, r.k, kN);
    CHECK(std::fabs(c.aic - r.aic) <= 0.21);
    CHECK(std::fabs(c.sabic - r.sabic) <= 0.21);
    CHECK(std::fabs(c.hqc - r.hqc) <= 0.21);
    CHECK(std::fabs(c.bic - r.bic) <= 0.21);
  }
}

TEST_CASE("information criteria basics") {
  auto zero = info_criteria(0.0, 0, 100);
  CHECK(zero.aic == 0.0);
  CHECK(zero.bic == 0.0);
  CHECK(zero.sabic == 0.0);
  CHECK(zero.hqc == 0.0);
  CHECK_THROWS(info_criteria(-1.0, 3, 2));
  CHECK_THROWS(info_criteria(-1.0, -1, 100));
}

TEST_CASE("criteria are affine in loglik and in k") {
  Rng rng(6);
  for (int round = 0; round < 50; ++round) {
    double l = -1000.0 * rng.uniform();
    int k = 1 + static_cast<int>(rng.uniform_int(100));
    auto base = info_criteria(l, k, kN);
    auto shifted = info_criteria(l - 5.0, k, kN);
    CHECK(shifted.aic - base.aic == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(shifted.bic - base.bic == doctest::Approx(10.0).epsilon(1e-10));
    auto more = info_criteria(l, k + 3, kN);
    CHECK(more.aic - base.aic == doctest::Approx(6.0).epsilon(1e-10));
    CHECK(more.bic - base.bic == doctest::Approx(3.0 * std::log(kN)).epsilon(1e-10));
    CHECK(more.sabic - base.sabic ==
          doctest::Approx(3.0 * std::log((kN + 2.0) / 24.0)).epsilon(1e-10));
    CHECK(more.hqc - base.hqc ==
          doctest::Approx(6.0 * std::log(std::log(kN))).epsilon(1e-10));
  }
}

TEST_CASE("BIC >= HQC >= AIC at the study's sample size") {
  Rng rng(1234);
  for (int round = 0; round < 200; ++round) {
    double l = -100000.0 * rng.uniform();
    int k = 1 + static_cast<int>(rng.uniform_int(200));
    auto c = info_criteria(l, k, kN);
    CHECK(c.bic >= c.hqc);
    CHECK(c.hqc >= c.aic);
  }
}

TEST_CASE("likelihood ratio tests across the sweep") {
  for (std::size_t i = 1; i < std::size(kSweep); ++i) {
    auto t = lr_test(kSweep[i - 1].loglik, kSweep[i].loglik, kSweep[i].k - kSweep[i - 1].k);
    CHECK(std::fabs(t.chi2 - kSweep[i].chi2) <= 0.2);
    CHECK(t.p < 0.001);
  }
  auto rows = sweep_rows();
  const int dfs[] = {14, 13, 12, 11, 10, 9};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].lrt_df.has_value());
    CHECK(*rows[i].lrt_df == dfs[i - 1]);
  }
  CHECK(!rows[0].lrt_chi2.has_value());
}

TEST_CASE("likelihood ratio edge cases") {
  auto equal = lr_test(-100.0, -100.0, 5);
  CHECK(equal.chi2 == 0.0);
  CHECK(equal.p == 1.0);
  auto floored = lr_test(-100.0, -101.0, 5);  // larger model fits worse
  CHECK(floored.chi2 == 0.0);
  CHECK(lr_test(-10.0, -8.08, 1).chi2 == doctest::Approx(3.84).epsilon(1e-12));
  CHECK(lr_test(-10.0, -8.08, 1).p == doctest::Approx(0.0500).epsilon(2e-3));
  CHECK_THROWS(lr_test(-1.0, -0.5, 0));
}

TEST_CASE("p decreases as chi2 grows") {
  double prev = 1.0;
  for (double gain = 0.1; gain < 40.0; gain += 0.9) {
    auto t = lr_test(-50.0 - gain, -50.0, 4);
    CHECK(t.p <= prev);
    CHECK(t.p >= 0.0);
    CHECK(t.p <= 1.0);
    prev = t.p;
  }
}

TEST_CASE("relative improvements on the published AIC and BIC series") {
  auto rows = sweep_rows();
  auto aic = relative_improvements(rows, IndexKind::aic);
  auto bic = relative_improvements(rows, IndexKind::bic);
  REQUIRE(aic.size() == 6);
  // D = 5 -> 6 and D = 6 -> 7
  CHECK(aic[4] == doctest::Approx(0.22).epsilon(0.03));
  CHECK(aic[5] == doctest::Approx(0.09).epsilon(0.06));
  CHECK(bic[5] == doctest::Approx(0.035).epsilon(0.07));

  std::vector<SelectionRow> flat(3);
  for (int i = 0; i < 3; ++i) {
    flat[i].dims = i + 1;
    flat[i].criteria = {500.0, 500.0, 500.0, 500.0};
  }
  for (double v : relative_improvements(flat, IndexKind::aic)) CHECK(v == 0.0);
}

TEST_CASE("dimension selection: published series chooses five dimensions") {
  auto report = select_dimension(sweep_rows());
  CHECK(report.chosen_dims == 5);
  CHECK(report.threshold_pct == 0.25);
  REQUIRE(report.indexes.size() == 2);
}

TEST_CASE("dimension selection edge rules") {
  // strictly worsening index from the second dimension on
  std::vector<SelectionRow> worsening(3);
  for (int i = 0; i < 3; ++i) {
    worsening[i].dims = i + 1;
    double v = 100.0 + 10.0 * i;
    worsening[i].criteria = {v, v, v, v};
  }
  CHECK(select_dimension(worsening).chosen_dims == 1);

  std::vector<SelectionRow> single(1);
  single[0].dims = 3;
  single[0].criteria = {7.0, 7.0, 7.0, 7.0};
  CHECK(select_dimension(single).chosen_dims == 3);

  // no plateau at a tiny threshold: fall back to the argmin of the first index
  auto report = select_dimension(sweep_rows(), 1e-9, {IndexKind::aic});
  CHECK(report.chosen_dims == 7);

  CHECK_THROWS(select_dimension({}));
  CHECK_THROWS(select_dimension(sweep_rows(), -1.0));
  CHECK_THROWS(select_dimension(sweep_rows(), 0.25, {}));
}
