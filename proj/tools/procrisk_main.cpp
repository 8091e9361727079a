// procrisk: red-flag corruption-risk indicators from procurement stage
// tables, validated with multidimensional graded response models.
//
// Subcommands map onto the pipeline stages; `run` executes all of them in
// order. Every stage works off the artifacts persisted in the output
// directory, so long fit sweeps never force a re-ingest.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "procrisk/pipeline.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "Run configuration file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opt.out_dir, "Output directory (overrides the config)");
  cmd->add_option("--threads", opt.threads, "Parallel fits in the dimension sweep");
  auto* seed = cmd->add_option("--seed", opt.seed, "Master seed (overrides the config)");
  cmd->callback([&opt, seed] { opt.seed_set = seed->count() > 0; });
}

procrisk::RunConfig make_config(const CommonOptions& opt) {
  procrisk::RunConfig config = procrisk::load_run_config(opt.config_path);
  if (!opt.out_dir.empty()) config.out_dir = opt.out_dir;
  if (opt.threads > 0) config.threads = opt.threads;
  if (opt.seed_set) config.seed = opt.seed;
  return config;
}

int run_guarded(const procrisk::RunConfig& config, const std::string& stage) {
  try {
    if (stage.empty())
      procrisk::run_pipeline(config);
    else
      procrisk::run_stage(config, stage);
  } catch (const procrisk::PipelineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"red-flag indicator pipeline for public procurement data"};
  app.set_version_flag("--version", procrisk::library_version());
  app.require_subcommand(1);

  CommonOptions run_opt;
  std::string run_stage_name;
  CLI::App* run = app.add_subcommand("run", "Run the full pipeline (or one stage via --stage)");
  add_common(run, run_opt);
  run->add_option("--stage", run_stage_name, "Run a single stage instead of the whole pipeline");

  std::vector<std::pair<CLI::App*, CommonOptions>> stage_cmds;
  stage_cmds.reserve(procrisk::pipeline_stages().size());
  for (const auto& name : procrisk::pipeline_stages()) {
    CLI::App* cmd = app.add_subcommand(name, "Run the " + name + " stage standalone");
    stage_cmds.emplace_back(cmd, CommonOptions{});
  }
  for (std::size_t i = 0; i < stage_cmds.size(); ++i) add_common(stage_cmds[i].first, stage_cmds[i].second);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_guarded(make_config(run_opt), run_stage_name);
    for (std::size_t i = 0; i < stage_cmds.size(); ++i)
      if (stage_cmds[i].first->parsed())
        return run_guarded(make_config(stage_cmds[i].second),
                           procrisk::pipeline_stages()[i]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
