#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "procrisk/correlation.hpp"
#include "procrisk/csv.hpp"
#include "procrisk/discretize.hpp"
#include "procrisk/grm.hpp"
#include "procrisk/ingest.hpp"
#include "procrisk/selection.hpp"

namespace procrisk {

struct PipelineError : std::runtime_error {
  PipelineError(std::string stage_name, const std::string& message)
      : std::runtime_error("stage '" + stage_name + "' failed: " + message),
        stage(std::move(stage_name)) {}
  std::string stage;
};

/// Everything one run needs: inputs, conventions, estimation settings,
/// output directory. Loaded from a JSON file; relative paths resolve
/// against the file's directory.
struct RunConfig {
  std::filesystem::path mapping_path;
  std::map<std::string, std::filesystem::path> tables;  // stage name -> file
  int reference_year = 0;
  std::vector<std::string> flag_ids;  // empty = all fifteen
  int categories = 4;
  double alpha = 0.05;
  int dims_min = 1;
  int dims_max = 1;
  FitConfig fit;
  double selection_threshold_pct = 0.25;
  std::vector<IndexKind> selection_indexes = {IndexKind::aic, IndexKind::bic};
  double loading_cut = 0.2;
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path out_dir;
};

RunConfig load_run_config(const std::filesystem::path& path);

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  std::vector<std::string> artifacts;
};

struct RunManifest {
  std::string status;  // "ok" or "failed"
  std::string failed_stage;
  std::string error;
  std::vector<StageRecord> stages;
};

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> names = {"ingest",  "flags", "discretize", "screen",
                                                 "fit",     "select", "report"};
  return names;
}

/// Runs every stage in order, persisting each intermediate artifact under
/// out_dir and a manifest with config echo, seeds, input digests and
/// timings. Reruns with identical config and inputs write byte-identical
/// numeric artifacts. Throws PipelineError naming the failing stage;
/// partial outputs are kept and the manifest is marked failed.
RunManifest run_pipeline(const RunConfig& config);

/// Runs a single stage against previously persisted intermediates.
RunManifest run_stage(const RunConfig& config, const std::string& stage);

/// Table-style view of a rotated solution: one row per item with the
/// pattern and communality, then SS-loadings and explained-variance rows.
/// With `cut` set, loadings below it in magnitude are blanked and numbers
/// are fixed to three decimals; without it, full precision.
csv::Table rotated_loading_table(const FitResult& fit, std::optional<double> cut);

/// Item discrimination/difficulty summary table.
csv::Table irt_table(const FitResult& fit);

// Persisted-intermediate readers and writers (also used by the stage
// subcommands to compose on each other's outputs).
void write_contracts(const std::filesystem::path& path, std::span<const ContractRecord> records);
std::vector<ContractRecord> read_contracts(const std::filesystem::path& path);
void write_indicator_matrix(const std::filesystem::path& path, const IndicatorMatrix& m);
IndicatorMatrix read_indicator_matrix(const std::filesystem::path& path);
void write_categorical_matrix(const std::filesystem::path& path, const CategoricalMatrix& m);
CategoricalMatrix read_categorical_matrix(const std::filesystem::path& path, int categories);
void write_fit_result(const std::filesystem::path& path, const FitResult& fit, int dims,
                      const std::vector<std::string>& item_names);

/// FNV-1a 64-bit digest of a file, as fixed-width hex. Used for the
/// manifest's input fingerprints (change detection, not cryptography).
std::string file_digest(const std::filesystem::path& path);

std::string library_version();

}  // namespace procrisk
