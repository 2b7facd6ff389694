#include "geodepth/cli.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>

#include "geodepth/colmap_io.hpp"
#include "geodepth/dataset.hpp"
#include "geodepth/errors.hpp"
#include "geodepth/image_io.hpp"
#include "geodepth/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace geodepth {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create directory " + p.string());
}

// Rounds through float32, the precision of exported PFM maps, so metrics
// computed in memory match those recomputed from the files.
Image as_exported(const Image& depth) {
  Image out = depth;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::string stem(const std::string& name) { return fs::path(name).stem().string(); }

std::string table(const std::vector<std::pair<std::string, EvalSummary>>& rows) {
  std::string out = metrics_table_header();
  for (const auto& [label, s] : rows) out += metrics_table_row(label, s);
  return out;
}

struct TrainRun {
  TrainConfig config;
  std::optional<EvalSummary> eval;
};

TrainRun train_into(const Dataset& data, const TrainOptions& opts, const std::string& label) {
  TrainRun run;
  run.config = resolve_train_config(opts);
  const TrainConfig& cfg = run.config;
  const fs::path out(opts.out);
  make_dirs(out);
  write_text(out / "train_config.json", train_config_to_json(cfg) + "\n");

  const int report_every = std::max(1, cfg.epochs / 10);
  const TrainReport report = train(data, cfg, [&](const StepLog& s) {
    if (s.epoch % report_every == 0 || s.epoch + 1 == cfg.epochs) {
      if (s.eval) {
        spdlog::info("[{}] epoch {} loss {:.6f} AbsRel {:.4f}", label, s.epoch,
                     s.loss.total, s.eval->mean.abs_rel);
      } else {
        spdlog::info("[{}] epoch {} loss {:.6f}", label, s.epoch, s.loss.total);
      }
    }
  });
  write_text(out / "train_log.csv", train_log_csv(report));
  write_text(out / "alignment.csv", alignment_csv(data, report));

  EvalOptions eval_opts;
  eval_opts.min_depth = cfg.min_depth;
  eval_opts.max_depth = cfg.max_depth;
  const std::vector<Image> depths = predicted_depths(report.model);
  std::vector<std::string> names;
  std::vector<Metrics> metrics;
  std::size_t idx = 0;
  for (const Sequence& seq : data.sequences) {
    const fs::path dir = out / "pred" / seq.id / "depth";
    make_dirs(dir);
    for (const Frame& f : seq.frames) {
      const Image depth = as_exported(depths[idx++]);
      write_pfm((dir / (stem(f.name) + ".pfm")).string(), depth);
      write_depth_png16((dir / (stem(f.name) + ".png")).string(), depth);
      if (f.gt_depth.empty()) continue;
      names.push_back(seq.id + "/" + stem(f.name));
      metrics.push_back(compute_metrics(depth, f.gt_depth, eval_opts));
    }
  }
  if (!metrics.empty()) {
    run.eval = summarize(std::move(names), std::move(metrics));
    write_text(out / "metrics.csv", metrics_csv(*run.eval));
    write_text(out / "metrics.txt", table({{label, *run.eval}}));
  }
  return run;
}

RunManifest start_manifest(const std::string& command, const std::string& config,
                           const std::string& out, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.config_path = config;
  m.output_dir = out;
  m.seed = seed;
  m.started = run_timestamp();
  return m;
}

void finish_manifest(RunManifest& m) {
  m.finished = run_timestamp();
  write_text(fs::path(m.output_dir) / "manifest.json", manifest_json(m) + "\n");
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("geodepth");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("GEODEPTH_LOG")) {
    const std::string value(env);
    const auto level = spdlog::level::from_str(value);
    if (level == spdlog::level::off && value != "off") {
      spdlog::warn("unknown GEODEPTH_LOG level '{}'", value);
    } else {
      spdlog::set_level(level);
    }
  }
}

}  // namespace

std::string run_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
  }
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(t));
}

std::string manifest_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["output_dir"] = m.output_dir;
  j["seed"] = m.seed;
  j["ablation"] = m.ablation;
  j["started"] = m.started;
  j["finished"] = m.finished;
  return j.dump(2);
}

void claim_output_dir(const std::string& dir) {
  const fs::path p(dir);
  if (dir.empty()) throw ConfigError("an output directory is required");
  if (fs::exists(p)) {
    if (!fs::is_directory(p)) throw IoError(dir + " exists and is not a directory");
    if (!fs::is_empty(p)) throw IoError("output directory " + dir + " is not empty");
  }
  make_dirs(p);
}

void cmd_synth(const SynthOptions& opts) {
  const SceneConfig config =
      opts.config_path.empty() ? SceneConfig{} : load_scene_config(opts.config_path);
  claim_output_dir(opts.out);
  RunManifest m = start_manifest("synth", opts.config_path, opts.out, opts.seed);
  const SceneDataset scene = make_dataset(config, opts.seed);
  save_dataset(opts.out, scene.data, config.corruption ? &scene.gt_poses : nullptr);
  write_text(fs::path(opts.out) / "scene_config.json", scene_config_to_json(config) + "\n");
  finish_manifest(m);
  spdlog::info("wrote {} sequences, {} frames to {}", scene.data.sequences.size(),
               scene.data.frame_count(), opts.out);
}

TrainConfig resolve_train_config(const TrainOptions& opts) {
  TrainConfig cfg =
      opts.config_path.empty() ? TrainConfig{} : load_train_config(opts.config_path);
  if (opts.ablate) apply_ablation(cfg, *opts.ablate);
  if (opts.no_automask) cfg.automask = false;
  if (opts.isd_iters) cfg.isd_iterations = *opts.isd_iters;
  if (opts.epochs) cfg.epochs = *opts.epochs;
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

std::optional<EvalSummary> cmd_train(const TrainOptions& opts) {
  const TrainConfig cfg = resolve_train_config(opts);
  const Dataset data = load_dataset(opts.dataset);
  claim_output_dir(opts.out);
  RunManifest m = start_manifest("train", opts.config_path, opts.out, cfg.seed);
  if (opts.ablate) m.ablation = {*opts.ablate};
  const TrainRun run = train_into(data, opts, opts.ablate.value_or("train"));
  if (run.eval) fmt::print("{}", table({{opts.ablate.value_or("train"), *run.eval}}));
  finish_manifest(m);
  return run.eval;
}

std::vector<std::pair<std::string, std::string>> collect_depth_files(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("directory not found: " + root);
  std::map<std::string, std::string> found;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const fs::path& p = e.path();
    const std::string ext = p.extension().string();
    if (ext != ".pfm" && ext != ".png") continue;
    const fs::path parent = p.parent_path();
    const bool in_depth_dir = parent.filename() == "depth";
    if (!in_depth_dir && parent != fs::path(root)) continue;
    fs::path rel = fs::relative(in_depth_dir ? parent.parent_path() : parent, root);
    std::string key = (rel / p.stem()).lexically_normal().generic_string();
    if (key.rfind("./", 0) == 0) key = key.substr(2);
    auto it = found.find(key);
    if (it == found.end() || ext == ".pfm") found[key] = p.string();
  }
  return {found.begin(), found.end()};
}

EvalSummary cmd_eval(const EvalCliOptions& opts) {
  const auto pred = collect_depth_files(opts.pred_dir);
  const auto gt = collect_depth_files(opts.gt_dir);
  std::set<std::string> pred_names, gt_names;
  for (const auto& [k, v] : pred) pred_names.insert(k);
  for (const auto& [k, v] : gt) gt_names.insert(k);
  if (pred_names != gt_names || pred.empty()) {
    std::vector<std::string> only_pred, only_gt;
    std::set_difference(pred_names.begin(), pred_names.end(), gt_names.begin(),
                        gt_names.end(), std::back_inserter(only_pred));
    std::set_difference(gt_names.begin(), gt_names.end(), pred_names.begin(),
                        pred_names.end(), std::back_inserter(only_gt));
    throw IoError(fmt::format(
        "prediction and ground-truth names differ; only in {}: [{}]; only in {}: [{}]",
        opts.pred_dir, fmt::join(only_pred, ", "), opts.gt_dir, fmt::join(only_gt, ", ")));
  }
  auto read_depth = [](const std::string& path) {
    return fs::path(path).extension() == ".pfm" ? read_pfm(path) : read_depth_png16(path);
  };
  std::vector<std::string> names;
  std::vector<Metrics> metrics;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Image p = read_depth(pred[i].second);
    const Image g = read_depth(gt[i].second);
    if (!p.same_extent(g)) throw IoError(pred[i].second + ": size differs from ground truth");
    names.push_back(pred[i].first);
    metrics.push_back(compute_metrics(p, g, opts.eval));
  }
  EvalSummary s = summarize(std::move(names), std::move(metrics));
  const std::string text = table({{"eval", s}});
  if (!opts.out.empty()) {
    claim_output_dir(opts.out);
    RunManifest m = start_manifest("eval", "", opts.out, 0);
    write_text(fs::path(opts.out) / "metrics.csv", metrics_csv(s));
    write_text(fs::path(opts.out) / "metrics.txt", text);
    finish_manifest(m);
  }
  fmt::print("{}", text);
  return s;
}

const std::vector<std::string>& default_ablation_grid() {
  static const std::vector<std::string> grid = {"coarse", "optim_t", "optim_tr", "full"};
  return grid;
}

std::vector<std::string> parse_ablation_grid(const std::string& grid) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start <= grid.size()) {
    const std::size_t comma = std::min(grid.find(',', start), grid.size());
    std::string name = grid.substr(start, comma - start);
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    if (!name.empty()) names.push_back(name);
    start = comma + 1;
  }
  if (names.empty()) throw ConfigError("empty ablation grid");
  return names;
}

std::vector<EvalSummary> cmd_ablate(const AblateOptions& opts) {
  if (opts.grid.empty()) throw ConfigError("empty ablation grid");
  const auto& known = ablation_names();
  for (const std::string& name : opts.grid) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError("unknown ablation '" + name + "'");
    }
    TrainOptions check = opts.train;
    check.ablate = name;
    resolve_train_config(check);
  }
  const Dataset data = load_dataset(opts.train.dataset);
  claim_output_dir(opts.train.out);
  RunManifest m = start_manifest("ablate", opts.train.config_path, opts.train.out,
                                 resolve_train_config(opts.train).seed);
  m.ablation = opts.grid;

  std::vector<std::pair<std::string, EvalSummary>> rows;
  std::string csv = "config,scale_std,abs_rel,sq_rel,rmse,rmse_log,d1,d2,d3\n";
  for (const std::string& name : opts.grid) {
    TrainOptions t = opts.train;
    t.ablate = name;
    t.out = (fs::path(opts.train.out) / name).string();
    const TrainRun run = train_into(data, t, name);
    if (!run.eval) throw ConfigError("ablation needs ground-truth depth in the dataset");
    const Metrics& a = run.eval->mean;
    csv += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", name,
                       run.eval->scale_std, a.abs_rel, a.sq_rel, a.rmse, a.rmse_log, a.d1,
                       a.d2, a.d3);
    rows.emplace_back(name, *run.eval);
  }
  const std::string text = table(rows);
  write_text(fs::path(opts.train.out) / "ablation.csv", csv);
  write_text(fs::path(opts.train.out) / "ablation.txt", text);
  finish_manifest(m);
  fmt::print("{}", text);
  std::vector<EvalSummary> out;
  for (auto& [name, s] : rows) out.push_back(std::move(s));
  return out;
}

int run_cli(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Geometry-aided self-supervised depth on desk-scale scenes"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic dataset");
  synth_cmd->add_option("--config", synth.config_path, "scene config (JSON)");
  synth_cmd->add_option("--seed", synth.seed, "scene seed");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  auto add_train_flags = [](CLI::App* cmd, TrainOptions& t) {
    cmd->add_option("dataset", t.dataset, "dataset directory")->required();
    cmd->add_option("--config", t.config_path, "training config (JSON)");
    cmd->add_option("--seed", t.seed, "run seed");
    cmd->add_option("--out", t.out, "output directory")->required();
    cmd->add_flag("--no-automask", t.no_automask, "disable the auto-mask");
    cmd->add_option("--isd-iters", t.isd_iters, "self-distillation iterations");
    cmd->add_option("--epochs", t.epochs, "override the epoch count");
  };

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "optimise depth and pose alignment");
  add_train_flags(train_cmd, train_opts);
  train_cmd->add_option("--ablate", train_opts.ablate, "preset name");

  EvalCliOptions eval_opts;
  bool no_align = false;
  auto* eval_cmd = app.add_subcommand("eval", "score predicted depth maps");
  eval_cmd->add_option("pred", eval_opts.pred_dir, "prediction directory")->required();
  eval_cmd->add_option("gt", eval_opts.gt_dir, "ground-truth directory")->required();
  eval_cmd->add_option("--out", eval_opts.out, "write metrics.csv and metrics.txt here");
  eval_cmd->add_flag("--no-align", no_align, "skip median scale alignment");
  eval_cmd->add_option("--min-depth", eval_opts.eval.min_depth, "lower depth bound");
  eval_cmd->add_option("--max-depth", eval_opts.eval.max_depth, "upper depth bound");

  AblateOptions ablate_opts;
  std::string grid = fmt::format("{}", fmt::join(default_ablation_grid(), ","));
  auto* ablate_cmd = app.add_subcommand("ablate", "train a grid of presets");
  add_train_flags(ablate_cmd, ablate_opts.train);
  ablate_cmd->add_option("--ablate", grid, "comma-separated presets")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth_cmd) {
      cmd_synth(synth);
    } else if (*train_cmd) {
      cmd_train(train_opts);
    } else if (*eval_cmd) {
      eval_opts.eval.median_align = !no_align;
      cmd_eval(eval_opts);
    } else if (*ablate_cmd) {
      ablate_opts.grid = parse_ablation_grid(grid);
      cmd_ablate(ablate_opts);
    }
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    spdlog::error("parse error: {}", e.what());
    return kExitIo;
  } catch (const FrameUnregistered& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const IoError& e) {
    spdlog::error("I/O error: {}", e.what());
    return kExitIo;
  } catch (const NumericalError& e) {
    spdlog::error("numerical error: {}", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitOther;
  }
  return kExitOk;
}

}  // namespace geodepth
