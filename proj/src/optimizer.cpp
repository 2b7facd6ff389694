#include "geodepth/optimizer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "geodepth/errors.hpp"
#include "geodepth/isd.hpp"

namespace geodepth {
namespace {

using json = nlohmann::json;

enum Group : std::uint8_t { kDepth, kScale, kShift, kResRot, kResT, kNumGroups };

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// Flattened view of a model: depth logits frame by frame, then alignments.
std::vector<double> flatten(const Model& m) {
  std::vector<double> out;
  for (const auto& d : m.depth) out.insert(out.end(), d.parameters().begin(), d.parameters().end());
  out.insert(out.end(), m.alignment.begin(), m.alignment.end());
  return out;
}

std::vector<double> flatten(const ModelGradient& g) {
  std::vector<double> out;
  for (const auto& d : g.depth) out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), g.alignment.begin(), g.alignment.end());
  return out;
}

void unflatten(std::span<const double> flat, Model& m) {
  std::size_t i = 0;
  for (auto& d : m.depth) {
    for (double& v : d.parameters()) v = flat[i++];
  }
  for (double& v : m.alignment) v = flat[i++];
}

std::vector<std::uint8_t> group_layout(const Model& m) {
  std::vector<std::uint8_t> g;
  for (const auto& d : m.depth) g.insert(g.end(), d.parameters().size(), kDepth);
  const std::size_t pairs = m.alignment.size() / PairAlignment::kNumParams;
  for (std::size_t p = 0; p < pairs; ++p) {
    g.push_back(kScale);
    g.insert(g.end(), 3, kShift);
    g.insert(g.end(), 3, kResRot);
    g.insert(g.end(), 3, kResT);
  }
  return g;
}

}  // namespace

AdamW::AdamW(std::vector<ParamGroup> groups, std::vector<std::uint8_t> group_of,
             AdamWSettings settings)
    : groups_(std::move(groups)), group_of_(std::move(group_of)), settings_(settings) {
  for (std::uint8_t g : group_of_) {
    if (g >= groups_.size()) throw std::invalid_argument("parameter group out of range");
  }
  m_.assign(group_of_.size(), 0.0);
  v_.assign(group_of_.size(), 0.0);
}

void AdamW::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != group_of_.size() || grads.size() != group_of_.size()) {
    throw std::invalid_argument("AdamW: parameter count changed");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError(fmt::format("non-finite gradient in parameter block '{}' (index {})",
                                       groups_[group_of_[i]].name, i));
    }
  }
  ++steps_;
  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, steps_);
  const double c2 = 1.0 - std::pow(b2, steps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamGroup& g = groups_[group_of_[i]];
    if (g.frozen) continue;
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    params[i] *= 1.0 - g.lr * g.weight_decay;
    params[i] -= g.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + settings_.eps);
  }
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  for (double lr : {lr_depth, lr_scale, lr_shift, lr_residual}) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("moment decay rates must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("eps must be positive");
  if (isd && isd_iterations < 1) throw ConfigError("isd_iterations must be >= 1");
  if (!(min_depth > 0.0 && max_depth > min_depth)) {
    throw ConfigError("depth range must satisfy 0 < min_depth < max_depth");
  }
  if (!(init_depth > min_depth && init_depth < max_depth)) {
    throw ConfigError("init_depth must lie strictly inside the depth range");
  }
  if (eval_every < 0) throw ConfigError("eval_every must be non-negative");
}

ObjectiveOptions TrainConfig::objective_options() const {
  ObjectiveOptions o;
  o.optim_r = optim_r;
  o.isd = isd;
  o.automask = automask;
  o.automask_optim_r = automask_optim_r;
  o.weights = weights;
  return o;
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    read_key(j, "epochs", c.epochs);
    read_key(j, "lr_depth", c.lr_depth);
    read_key(j, "lr_scale", c.lr_scale);
    read_key(j, "lr_shift", c.lr_shift);
    read_key(j, "lr_residual", c.lr_residual);
    read_key(j, "weight_decay", c.weight_decay);
    read_key(j, "beta1", c.adam.beta1);
    read_key(j, "beta2", c.adam.beta2);
    read_key(j, "eps", c.adam.eps);
    read_key(j, "isd_iterations", c.isd_iterations);
    read_key(j, "use_coarse_poses", c.use_coarse_poses);
    read_key(j, "optim_t", c.optim_t);
    read_key(j, "optim_scale", c.optim_scale);
    read_key(j, "optim_shift", c.optim_shift);
    read_key(j, "optim_r", c.optim_r);
    read_key(j, "isd", c.isd);
    read_key(j, "automask", c.automask);
    read_key(j, "automask_optim_r", c.automask_optim_r);
    read_key(j, "beta", c.weights.beta);
    read_key(j, "lambda", c.weights.lambda);
    read_key(j, "isd_weight", c.weights.isd_weight);
    read_key(j, "min_depth", c.min_depth);
    read_key(j, "max_depth", c.max_depth);
    read_key(j, "init_depth", c.init_depth);
    read_key(j, "eval_every", c.eval_every);
    read_key(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["lr_depth"] = c.lr_depth;
  j["lr_scale"] = c.lr_scale;
  j["lr_shift"] = c.lr_shift;
  j["lr_residual"] = c.lr_residual;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["eps"] = c.adam.eps;
  j["isd_iterations"] = c.isd_iterations;
  j["use_coarse_poses"] = c.use_coarse_poses;
  j["optim_t"] = c.optim_t;
  j["optim_scale"] = c.optim_scale;
  j["optim_shift"] = c.optim_shift;
  j["optim_r"] = c.optim_r;
  j["isd"] = c.isd;
  j["automask"] = c.automask;
  j["automask_optim_r"] = c.automask_optim_r;
  j["beta"] = c.weights.beta;
  j["lambda"] = c.weights.lambda;
  j["isd_weight"] = c.weights.isd_weight;
  j["min_depth"] = c.min_depth;
  j["max_depth"] = c.max_depth;
  j["init_depth"] = c.init_depth;
  j["eval_every"] = c.eval_every;
  j["seed"] = c.seed;
  return j.dump(2);
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names = {
      "baseline", "coarse", "scale_only", "shift_only", "optim_t",
      "optim_tr", "isd",    "optim_t_isd", "full"};
  return names;
}

void apply_ablation(TrainConfig& c, const std::string& name) {
  auto set = [&](bool cp, bool t, bool r, bool isd) {
    c.use_coarse_poses = cp;
    c.optim_t = t;
    c.optim_scale = true;
    c.optim_shift = true;
    c.optim_r = r;
    c.isd = isd;
  };
  if (name == "baseline") {
    set(false, false, false, false);
  } else if (name == "coarse") {
    set(true, false, false, false);
  } else if (name == "scale_only") {
    set(true, true, false, false);
    c.optim_shift = false;
  } else if (name == "shift_only") {
    set(true, true, false, false);
    c.optim_scale = false;
  } else if (name == "optim_t") {
    set(true, true, false, false);
  } else if (name == "optim_tr") {
    set(true, true, true, false);
  } else if (name == "isd") {
    set(false, false, false, true);
  } else if (name == "optim_t_isd") {
    set(true, true, false, true);
  } else if (name == "full") {
    set(true, true, true, true);
  } else {
    throw ConfigError("unknown ablation '" + name + "'");
  }
}

std::vector<Image> predicted_depths(const Model& model) {
  std::vector<Image> out;
  for (const auto& pyr : model.depth) {
    out.push_back(disparity_to_depth(predict_full_res(pyr, 0)));
  }
  return out;
}

std::optional<EvalSummary> evaluate_model(const Dataset& data, const Model& model,
                                          const EvalOptions& opts) {
  std::vector<std::string> names;
  std::vector<Metrics> metrics;
  std::size_t idx = 0;
  for (const auto& seq : data.sequences) {
    for (const auto& f : seq.frames) {
      const DepthPyramid& pyr = model.depth[idx++];
      if (f.gt_depth.empty()) continue;
      const Image depth = disparity_to_depth(predict_full_res(pyr, 0));
      names.push_back(seq.id + "/" + f.name);
      metrics.push_back(compute_metrics(depth, f.gt_depth, opts));
    }
  }
  if (metrics.empty()) return std::nullopt;
  return summarize(std::move(names), std::move(metrics));
}

TrainReport train(const Dataset& data, const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  PairList list = enumerate_pairs(data);
  if (list.pairs.empty()) throw std::invalid_argument("no usable training pairs");
  if (list.skipped > 0) {
    spdlog::warn("skipped {} pairs with frames missing from the coarse poses", list.skipped);
  }
  if (!cfg.use_coarse_poses) {
    for (auto& p : list.pairs) {
      if (!p.gt) {
        throw ConfigError("ground-truth pose mode needs ground-truth poses for every frame");
      }
      p.coarse = *p.gt;
    }
  }

  TrainReport report;
  report.skipped_pairs = list.skipped;
  const Objective objective(data, list.pairs, cfg.objective_options());
  const DisparityBounds bounds = DisparityBounds::FromDepthRange(cfg.min_depth, cfg.max_depth);
  Model model = objective.initial_model(bounds, cfg.init_depth);

  std::vector<ParamGroup> groups(kNumGroups);
  groups[kDepth] = {"depth", cfg.lr_depth, cfg.weight_decay, false};
  groups[kScale] = {"log_scale", cfg.lr_scale, cfg.weight_decay, !(cfg.optim_t && cfg.optim_scale)};
  groups[kShift] = {"delta_t", cfg.lr_shift, cfg.weight_decay, !(cfg.optim_t && cfg.optim_shift)};
  groups[kResRot] = {"residual_rotation", cfg.lr_residual, cfg.weight_decay, !cfg.optim_r};
  groups[kResT] = {"residual_translation", cfg.lr_residual, cfg.weight_decay, !cfg.optim_r};
  AdamW adam(groups, group_layout(model), cfg.adam);

  EvalOptions eval_opts;
  eval_opts.min_depth = cfg.min_depth;
  eval_opts.max_depth = cfg.max_depth;
  report.initial_eval = evaluate_model(data, model, eval_opts);

  const int inner = cfg.isd ? cfg.isd_iterations : 1;
  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool do_eval = cfg.eval_every > 0 && epoch % cfg.eval_every == 0;
    isd_round_loop(inner, [&]() {
      ModelGradient grad = ModelGradient::ZerosLike(model);
      StepLog log;
      log.epoch = epoch;
      log.step = global_step++;
      log.loss = objective.evaluate(model, &grad);
      if (!std::isfinite(log.loss.total)) {
        throw NumericalError(fmt::format("non-finite loss at epoch {}", epoch));
      }
      if (do_eval) log.eval = evaluate_model(data, model, eval_opts);
      std::vector<double> flat = flatten(model);
      adam.step(flat, flatten(grad));
      unflatten(flat, model);
      if (on_step) on_step(log);
      report.history.push_back(std::move(log));
      return report.history.back().loss.total;
    });
    const StepLog& last = report.history.back();
    spdlog::debug("epoch {} loss {:.6f}", epoch, last.loss.total);
  }
  report.final_eval = evaluate_model(data, model, eval_opts);
  report.model = std::move(model);
  report.pairs = objective.pairs();
  return report;
}

std::string train_log_csv(const TrainReport& report) {
  std::string out =
      "epoch,step,rec_optim_t,rec_optim_r,smooth,isd,total,abs_rel,sq_rel,rmse,rmse_log,d1,d2,"
      "d3,scale_std\n";
  for (const StepLog& s : report.history) {
    out += fmt::format("{},{},{:.8f},{:.8f},{:.8f},{:.8f},{:.8f}", s.epoch, s.step,
                       s.loss.rec_optim_t, s.loss.rec_optim_r, s.loss.smooth, s.loss.isd,
                       s.loss.total);
    if (s.eval) {
      const Metrics& m = s.eval->mean;
      out += fmt::format(",{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                         m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.d1, m.d2, m.d3,
                         s.eval->scale_std);
    } else {
      out += ",,,,,,,,\n";
    }
  }
  return out;
}

std::string alignment_csv(const Dataset& data, const TrainReport& report) {
  std::string out =
      "sequence,target,source,scale,delta_t_norm,residual_angle_deg,residual_t_norm\n";
  for (std::size_t i = 0; i < report.pairs.size(); ++i) {
    const TrainingPair& p = report.pairs[i];
    const PairAlignment a = report.model.pair(i);
    const Sequence& seq = data.sequences[p.sequence];
    out += fmt::format("{},{},{},{:.8f},{:.8f},{:.8f},{:.8f}\n", seq.id,
                       seq.frames[p.target].name, seq.frames[p.source].name, a.scale(),
                       a.delta_t.norm(),
                       a.residual_axis_angle.norm() * 180.0 / std::numbers::pi,
                       a.residual_t.norm());
  }
  return out;
}

}  // namespace geodepth
