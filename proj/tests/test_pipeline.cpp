#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "procrisk/pipeline.hpp"

using namespace procrisk;

namespace {

const std::filesystem::path kSynthetic =
    std::filesystem::path(PROCRISK_DATA_DIR) / "synthetic" / "config.json";

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("procrisk_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  return slurp(a) == slurp(b);
}

RunConfig synthetic_config(const std::filesystem::path& out) {
  RunConfig c = load_run_config(kSynthetic);
  c.out_dir = out;
  return c;
}

}  // namespace

TEST_CASE("full pipeline on the bundled synthetic data") {
  TempDir out("pipe");
  RunConfig config = synthetic_config(out.path);
  config.dims_min = 1;
  config.dims_max = 3;
  config.fit.gh_nodes_per_dim = 7;  // keep the three-dimension sweep quick

  RunManifest manifest = run_pipeline(config);
  CHECK(manifest.status == "ok");
  CHECK(manifest.stages.size() == 7);

  // stage fan-out: one fit per dimension plus one selection report
  for (int d = 1; d <= 3; ++d)
    CHECK(std::filesystem::exists(out.path / ("fits/fit_D" + std::to_string(d) + ".json")));
  CHECK(std::filesystem::exists(out.path / "selection.csv"));
  CHECK(std::filesystem::exists(out.path / "selection.json"));
  CHECK(std::filesystem::exists(out.path / "manifest.json"));

  // fifteen items at four categories pin the parameter counts
  csv::Table sel = csv::read_file(out.path / "selection.csv", ',');
  REQUIRE(sel.rows.size() == 3);
  CHECK(sel.rows[0][sel.column("k")] == "60");
  CHECK(sel.rows[1][sel.column("k")] == "74");
  CHECK(sel.rows[2][sel.column("k")] == "87");

  // the indicator matrix carries all fifteen flags
  IndicatorMatrix m = read_indicator_matrix(out.path / "indicators.csv");
  CHECK(m.flags.size() == 15);
  CHECK(m.authorities.size() > 100);
}

TEST_CASE("identical rerun writes byte-identical numeric artifacts") {
  TempDir out1("det1"), out2("det2");
  RunConfig c1 = synthetic_config(out1.path);
  RunConfig c2 = synthetic_config(out2.path);
  run_pipeline(c1);
  run_pipeline(c2);

  std::size_t compared = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(out1.path)) {
    if (!entry.is_regular_file()) continue;
    auto rel = std::filesystem::relative(entry.path(), out1.path);
    if (rel == "manifest.json") continue;  // carries wall-clock timings
    CAPTURE(rel.string());
    CHECK(same_bytes(entry.path(), out2.path / rel));
    ++compared;
  }
  CHECK(compared >= 20);
}

TEST_CASE("stagewise runs compose to the single-shot result") {
  TempDir staged("staged"), oneshot("oneshot");
  RunConfig cs = synthetic_config(staged.path);
  RunConfig co = synthetic_config(oneshot.path);
  run_pipeline(co);
  for (const auto& stage : pipeline_stages()) run_stage(cs, stage);

  for (const char* f : {"contracts.csv", "indicators.csv", "categories.csv", "thresholds.json",
                        "correlation_pearson.csv", "selection.csv", "report_loadings.csv",
                        "report_irt.csv"})
    CHECK(same_bytes(staged.path / f, oneshot.path / f));
}

TEST_CASE("a failing stage is named and leaves a failure marker") {
  TempDir out("fail");
  RunConfig config = synthetic_config(out.path);
  // fit without its persisted input
  CHECK_THROWS_AS(run_stage(config, "fit"), PipelineError);
  try {
    run_stage(config, "fit");
  } catch (const PipelineError& e) {
    CHECK(e.stage == "fit");
  }
  std::string manifest = slurp(out.path / "manifest.json");
  CHECK(manifest.find("\"status\": \"failed\"") != std::string::npos);
  CHECK(manifest.find("\"failed_stage\": \"fit\"") != std::string::npos);

  CHECK_THROWS_AS(run_stage(config, "nonsense"), PipelineError);
}

TEST_CASE("contracts round-trip through the persisted form") {
  TempDir out("roundtrip");
  ContractRecord r;
  r.cig = "C1";
  r.authority_id = "A1";
  r.award_id = "AW1";
  r.publication_date = Date{2017, 3, 1};
  r.procedure_type = ProcedureType::non_open;
  r.award_criterion = AwardCriterion::meat;
  r.award_value = 1234.5600000000001;  // exercises shortest-round-trip formatting
  r.bids_received = 4;
  r.bids_excluded = 3;
  r.has_variant = true;
  r.winner_ids = {"F1", "F2"};
  ContractRecord empty;
  empty.cig = "C2";
  empty.authority_id = "A2";

  std::vector<ContractRecord> records{r, empty};
  write_contracts(out.path / "contracts.csv", records);
  auto back = read_contracts(out.path / "contracts.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == r);
  CHECK(back[1] == empty);
}

TEST_CASE("loading table blanks below the cut only") {
  FitResult fit;
  fit.irt.items = {"a", "b"};
  fit.rotation.loadings.resize(2, 2);
  fit.rotation.loadings << 0.19, 0.85, -0.232, 0.05;
  fit.rotation.factor_correlations = Eigen::MatrixXd::Identity(2, 2);
  fit.rotation.communalities = Eigen::VectorXd::Constant(2, 0.5);
  fit.rotation.uniquenesses = Eigen::VectorXd::Constant(2, 0.5);
  fit.rotation.ss_loadings = Eigen::VectorXd::Constant(2, 1.0);
  fit.rotation.explained_variance_prop = Eigen::VectorXd::Constant(2, 0.5);

  csv::Table cut = rotated_loading_table(fit, 0.2);
  CHECK(cut.rows[0][1] == "");        // 0.19 blanked
  CHECK(cut.rows[0][2] == "0.850");
  CHECK(cut.rows[1][1] == "-0.232");  // above the cut in magnitude: shown
  CHECK(cut.rows[1][2] == "");

  csv::Table full = rotated_loading_table(fit, std::nullopt);
  CHECK(full.rows[0][1] == "0.19");
  csv::Table zero_cut = rotated_loading_table(fit, 0.0);
  for (const auto& row : zero_cut.rows)
    for (std::size_t i = 1; i + 1 < row.size(); ++i)
      if (row[0] != "ss_loadings" && row[0] != "explained_variance_prop") CHECK(!row[i].empty());
}

TEST_CASE("run config validation") {
  TempDir out("cfg");
  auto bad = out.path / "bad.json";
  std::ofstream(bad) << R"({"mapping": "m.json", "tables": {"call": "c"}, "reference_year": 2017,
                            "dims": {"min": 3, "max": 2}})";
  CHECK_THROWS(load_run_config(bad));
  std::ofstream(bad) << R"({"tables": {"call": "c"}, "reference_year": 2017})";
  CHECK_THROWS(load_run_config(bad));

  RunConfig c = load_run_config(kSynthetic);
  CHECK(c.reference_year == 2017);
  CHECK(c.categories == 4);
  CHECK(c.dims_min == 1);
  CHECK(c.dims_max == 2);
  CHECK(c.fit.gh_nodes_per_dim == 11);
  CHECK(c.selection_indexes.size() == 2);
  // relative paths resolve against the config directory
  CHECK(c.mapping_path.is_absolute());
  CHECK(std::filesystem::exists(c.mapping_path));
}
