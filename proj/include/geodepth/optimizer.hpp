#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geodepth/dataset.hpp"
#include "geodepth/eval.hpp"
#include "geodepth/objective.hpp"

namespace geodepth {

struct AdamWSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct ParamGroup {
  std::string name;
  double lr = 1e-3;
  double weight_decay = 0.0;
  /// Frozen groups are never updated.
  bool frozen = false;
};

/// Adam with bias correction and decoupled weight decay. Each parameter
/// belongs to one group, which sets its learning rate and decay.
class AdamW {
 public:
  AdamW(std::vector<ParamGroup> groups, std::vector<std::uint8_t> group_of,
        AdamWSettings settings = {});

  /// Throws NumericalError naming the group of the first non-finite gradient;
  /// parameters are left untouched in that case.
  void step(std::span<double> params, std::span<const double> grads);

  int steps() const { return steps_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }

 private:
  std::vector<ParamGroup> groups_;
  std::vector<std::uint8_t> group_of_;
  AdamWSettings settings_;
  std::vector<double> m_;
  std::vector<double> v_;
  int steps_ = 0;
};

struct TrainConfig {
  int epochs = 200;
  double lr_depth = 1e-2;
  double lr_scale = 5e-3;
  double lr_shift = 1e-3;
  double lr_residual = 1e-3;
  double weight_decay = 0.0;
  AdamWSettings adam;
  int isd_iterations = 2;

  /// false: use ground-truth relative poses instead of the coarse ones.
  bool use_coarse_poses = true;
  /// Translation rescale and shift; the two sub-switches select either part.
  bool optim_t = true;
  bool optim_scale = true;
  bool optim_shift = true;
  bool optim_r = true;
  bool isd = true;
  bool automask = true;
  bool automask_optim_r = true;

  LossWeights weights;
  double min_depth = 0.1;
  double max_depth = 10.0;
  /// Depth every logit starts at.
  double init_depth = 2.0;
  /// Evaluate against ground truth every this many epochs (0 = never).
  int eval_every = 1;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  ObjectiveOptions objective_options() const;
};

TrainConfig train_config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& config);

/// Flag presets named after the ablation rows they reproduce: baseline,
/// coarse, scale_only, shift_only, optim_t, optim_tr, isd, optim_t_isd, full.
/// Throws ConfigError for an unknown name.
void apply_ablation(TrainConfig& config, const std::string& name);
const std::vector<std::string>& ablation_names();

struct StepLog {
  int epoch = 0;
  int step = 0;  // global optimizer step
  LossBreakdown loss;
  /// Ground-truth metrics of the parameters the loss was evaluated at.
  std::optional<EvalSummary> eval;
};

struct TrainReport {
  std::vector<StepLog> history;
  Model model;
  std::vector<TrainingPair> pairs;
  int skipped_pairs = 0;
  std::optional<EvalSummary> initial_eval;
  std::optional<EvalSummary> final_eval;
};

/// Finest-scale depth of every frame, dataset order.
std::vector<Image> predicted_depths(const Model& model);

/// Metrics of the model against every frame with ground-truth depth; empty
/// when no frame has it.
std::optional<EvalSummary> evaluate_model(const Dataset& data, const Model& model,
                                          const EvalOptions& opts = {});

using StepCallback = std::function<void(const StepLog&)>;

/// Full-batch training. Throws std::invalid_argument when no pair is usable,
/// NumericalError on non-finite gradients.
TrainReport train(const Dataset& data, const TrainConfig& config,
                  const StepCallback& on_step = {});

std::string train_log_csv(const TrainReport& report);
/// sequence,target,source,scale,delta_t_norm,residual_angle_deg,residual_t_norm
std::string alignment_csv(const Dataset& data, const TrainReport& report);

}  // namespace geodepth
