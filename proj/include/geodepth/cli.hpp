#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geodepth/eval.hpp"
#include "geodepth/optimizer.hpp"

namespace geodepth {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Provenance written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> ablation;
  std::string started;
  std::string finished;
};

/// ISO-8601 UTC time; SOURCE_DATE_EPOCH pins it for reproducible outputs.
std::string run_timestamp();
std::string manifest_json(const RunManifest& m);

/// Creates `dir`, which must not exist yet or be empty. Throws IoError.
void claim_output_dir(const std::string& dir);

struct SynthOptions {
  std::string config_path;  // empty: defaults
  std::uint64_t seed = 0;
  std::string out;
};
void cmd_synth(const SynthOptions& opts);

struct TrainOptions {
  std::string dataset;
  std::string config_path;  // empty: defaults
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::string> ablate;
  bool no_automask = false;
  std::optional<int> isd_iters;
  std::optional<int> epochs;
};
/// Effective training config: file, then preset, then flag overrides.
TrainConfig resolve_train_config(const TrainOptions& opts);
/// Returns the evaluation of the exported predictions, if any ground truth
/// was available.
std::optional<EvalSummary> cmd_train(const TrainOptions& opts);

struct EvalCliOptions {
  std::string pred_dir;
  std::string gt_dir;
  std::string out;  // empty: print only
  EvalOptions eval;
};
EvalSummary cmd_eval(const EvalCliOptions& opts);

/// Comma-separated preset names; throws ConfigError when none is given.
std::vector<std::string> parse_ablation_grid(const std::string& grid);
const std::vector<std::string>& default_ablation_grid();

struct AblateOptions {
  TrainOptions train;  // dataset, config, seed and overrides; out is the grid root
  std::vector<std::string> grid;
};
/// One row per configuration, in grid order.
std::vector<EvalSummary> cmd_ablate(const AblateOptions& opts);

/// Depth files keyed by relative path without extension; PFM wins over PNG
/// when both exist. Only files inside a `depth` directory or directly under
/// `root` are considered.
std::vector<std::pair<std::string, std::string>> collect_depth_files(const std::string& root);

/// Parses arguments, runs a command and maps exceptions to exit codes.
int run_cli(int argc, char** argv);

}  // namespace geodepth
