#pragma once

// Joint training of the target classifier and the magnitude policy.
//
// Per mini-batch: draw one (op, direction); build x_ada = e(m_stored, x) and
// x_full = e(1, x) for every sample; run three forward passes for per-sample
// L_none, L_ada, L_full and the feature states; let the actor propose the
// magnitudes each sample will use next epoch; reward the applied magnitudes;
// update actor and critic; finally step the classifier on mean L_ada.

#include "adaaug/a2c.hpp"
#include "adaaug/augment.hpp"
#include "adaaug/data.hpp"
#include "adaaug/model.hpp"
#include "adaaug/optim.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adaaug::train {

enum class Mode { adaaugment, baseline_none, fixed_m, random_m, linear_m, sine_m };
enum class LambdaSchedule { linear, cosine, step };

std::optional<Mode> mode_from_name(std::string_view name);
std::string_view mode_name(Mode mode);
std::optional<LambdaSchedule> lambda_schedule_from_name(std::string_view name);
std::string_view lambda_schedule_name(LambdaSchedule schedule);

/// Curriculum weight: 1 at t = 0 falling to 0 at t = T - 1.
/// linear: 1 - t/(T-1); cosine: (1 + cos(pi t/(T-1)))/2; step: 1 for t < (T-1)/2, else 0.
double lambda_at(int epoch, int total_epochs, LambdaSchedule schedule = LambdaSchedule::linear);

struct RewardInputs {
  std::span<const double> l_full;
  std::span<const double> l_ada;
  std::span<const double> l_none;
  double lambda;
};

/// r = lambda (L_full - L_ada) + (1 - lambda)(L_ada - L_none), per sample.
std::vector<double> reward(const RewardInputs& in);

/// Magnitude used by the schedule-driven ablation modes at epoch t.
double scheduled_magnitude(Mode mode, int epoch, int total_epochs, double fixed_m);

struct TrainConfig {
  // data
  std::filesystem::path data_path;
  data::Format format = data::Format::mnist_idx;
  std::optional<std::size_t> subset;
  std::uint64_t subset_seed = 0;
  bool evaluate_test = true;
  bool pad_flip = false;
  // target model
  int features = 128;
  int conv1_filters = 32;
  int conv2_filters = 64;
  // target optimizer
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  num::ScheduleKind schedule = num::ScheduleKind::cosine;
  std::vector<int> milestones;
  double decay_factor = 0.2;
  // policy
  a2c::PolicyHyper policy;
  LambdaSchedule lambda_schedule = LambdaSchedule::linear;
  // loop
  int epochs = 30;
  std::size_t batch_size = 128;
  Mode mode = Mode::adaaugment;
  double fixed_m = 0.5;
  bool random_per_epoch = true;  // random-m: redraw every epoch, or draw once per sample
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "run";

  void validate() const;
};

struct EpochState {
  int epoch = 0;
  int total_epochs = 0;
  double lambda = 0.0;
  double mean_magnitude = 0.0;  // mean magnitude applied to produce x_ada this epoch
  double mean_l_none = 0.0;
  double mean_l_ada = 0.0;
  double mean_l_full = 0.0;
  double mean_reward = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double train_acc = 0.0;  // on x_ada, during the epoch
  double test_acc = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct LossOrdering {
  int epoch = 0;
  double l_none = 0.0, l_ada = 0.0, l_full = 0.0;
  bool none_above_ada = false;  // mean(L_none) > mean(L_ada)
  bool ada_above_full = false;  // mean(L_ada) > mean(L_full)
  bool boundary_equal = false;  // mean(L_none) == mean(L_ada)
  bool ordered() const { return !none_above_ada && !ada_above_full; }
};

/// Flags epochs where mean(L_none) <= mean(L_ada) <= mean(L_full) fails. Never throws.
LossOrdering loss_ordering_diagnostic(const EpochState& state);

/// Fraction of argmax(logits) == label over the dataset, no augmentation.
double evaluate(const model::TargetNet& net, const data::Dataset& dataset, const data::ChannelStats& stats,
                std::size_t batch_size = 250);
double accuracy(const num::Tensor& logits, std::span<const int> labels);

/// Everything one mini-batch step computed, for tracing and tests.
struct BatchTrace {
  int epoch = 0;
  std::size_t batch = 0;
  std::vector<std::size_t> indices;
  aug::SampledOp op{};
  std::vector<double> applied;   // magnitudes used for x_ada
  std::vector<double> proposed;  // actor output written to the store (adaaugment only)
  std::vector<double> l_none, l_ada, l_full;
  std::vector<double> rewards;
  double lambda = 0.0;
  double lr = 0.0;
  a2c::UpdateStats policy{};
};

class Trainer {
 public:
  Trainer(TrainConfig config, data::Dataset train, std::optional<data::Dataset> test = std::nullopt);

  /// Runs epoch t (0 <= t < T) and returns its aggregates.
  EpochState train_epoch(int epoch);

  void set_trace(std::function<void(const BatchTrace&)> trace) { trace_ = std::move(trace); }

  const TrainConfig& config() const { return config_; }
  const data::Dataset& train_set() const { return train_; }
  model::TargetNet& net() { return net_; }
  const model::TargetNet& net() const { return net_; }
  a2c::Agent* agent() { return agent_ ? &*agent_ : nullptr; }
  data::MagnitudeStore& store() { return store_; }
  const num::SgdNesterov& optimizer() const { return optimizer_; }

  /// target.ckpt (weights, architecture, normalization stats), policy.ckpt, magnitudes.bin.
  void save_checkpoints(const std::filesystem::path& dir) const;

 private:
  std::vector<double> magnitudes_for(const data::Batch& batch, int epoch);

  TrainConfig config_;
  data::Dataset train_;
  std::optional<data::Dataset> test_;
  model::TargetNet net_;
  std::optional<a2c::Agent> agent_;
  num::SgdNesterov optimizer_;
  num::LrSchedule schedule_;
  data::MagnitudeStore store_;
  Rng shuffle_rng_, op_rng_, policy_rng_, ablation_rng_, preprocess_rng_;
  std::function<void(const BatchTrace&)> trace_;
};

/// Normalization statistics stored in a target checkpoint.
data::ChannelStats stats_from_checkpoint(const std::vector<num::NamedTensor>& records);

}  // namespace adaaug::train
