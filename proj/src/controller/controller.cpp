#include "adaaug/controller.hpp"

#include "adaaug/errors.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace adaaug::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

model::TargetNet build_net(const TrainConfig& config, const data::Dataset& train) {
  if (train.images.empty()) throw ConfigError("training set is empty");
  const auto& img = train.images.front();
  model::NetConfig nc{img.channels, img.height, img.width, train.classes, config.features, config.conv1_filters,
                      config.conv2_filters};
  Rng rng = make_stream(config.seed, stream::target_init);
  return model::TargetNet(nc, rng);
}

std::optional<a2c::Agent> build_agent(const TrainConfig& config) {
  if (config.mode != Mode::adaaugment) return std::nullopt;
  Rng rng = make_stream(config.seed, stream::policy_init);
  return a2c::Agent(config.features, config.policy, rng);
}

num::LrSchedule build_schedule(const TrainConfig& config) {
  num::LrSchedule s;
  s.kind = config.schedule;
  s.base_rate = config.lr;
  s.total_epochs = config.epochs;
  s.milestones = config.milestones;
  s.decay_factor = config.decay_factor;
  return s;
}

}  // namespace

std::optional<Mode> mode_from_name(std::string_view name) {
  if (name == "adaaugment") return Mode::adaaugment;
  if (name == "baseline-none") return Mode::baseline_none;
  if (name == "fixed-m") return Mode::fixed_m;
  if (name == "random-m") return Mode::random_m;
  if (name == "linear-m") return Mode::linear_m;
  if (name == "sine-m") return Mode::sine_m;
  return std::nullopt;
}

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::adaaugment: return "adaaugment";
    case Mode::baseline_none: return "baseline-none";
    case Mode::fixed_m: return "fixed-m";
    case Mode::random_m: return "random-m";
    case Mode::linear_m: return "linear-m";
    case Mode::sine_m: return "sine-m";
  }
  return "adaaugment";
}

std::optional<LambdaSchedule> lambda_schedule_from_name(std::string_view name) {
  if (name == "linear") return LambdaSchedule::linear;
  if (name == "cosine") return LambdaSchedule::cosine;
  if (name == "step") return LambdaSchedule::step;
  return std::nullopt;
}

std::string_view lambda_schedule_name(LambdaSchedule schedule) {
  switch (schedule) {
    case LambdaSchedule::linear: return "linear";
    case LambdaSchedule::cosine: return "cosine";
    case LambdaSchedule::step: return "step";
  }
  return "linear";
}

double lambda_at(int epoch, int total_epochs, LambdaSchedule schedule) {
  if (total_epochs < 2) throw ConfigError("lambda schedule needs at least 2 epochs");
  if (epoch < 0 || epoch >= total_epochs) {
    throw std::out_of_range("lambda_at: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(total_epochs) + ")");
  }
  const double last = static_cast<double>(total_epochs - 1);
  const double t = static_cast<double>(epoch);
  switch (schedule) {
    case LambdaSchedule::linear:
      return 1.0 - t / last;
    case LambdaSchedule::cosine:
      if (epoch == total_epochs - 1) return 0.0;
      return 0.5 * (1.0 + std::cos(std::numbers::pi * t / last));
    case LambdaSchedule::step:
      return 2.0 * t < last ? 1.0 : 0.0;
  }
  return 0.0;
}

std::vector<double> reward(const RewardInputs& in) {
  const std::size_t n = in.l_ada.size();
  if (in.l_full.size() != n || in.l_none.size() != n) throw ContractError("reward: loss vectors differ in length");
  if (!(in.lambda >= 0.0 && in.lambda <= 1.0)) throw ContractError("reward: lambda outside [0, 1]");
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double full = in.l_full[i], ada = in.l_ada[i], none = in.l_none[i];
    if (!std::isfinite(full) || !std::isfinite(ada) || !std::isfinite(none) || full < 0.0 || ada < 0.0 || none < 0.0) {
      throw ContractError("reward: losses must be finite and nonnegative (sample " + std::to_string(i) + ")");
    }
    r[i] = in.lambda * (full - ada) + (1.0 - in.lambda) * (ada - none);
  }
  return r;
}

double scheduled_magnitude(Mode mode, int epoch, int total_epochs, double fixed_m) {
  const double last = static_cast<double>(std::max(1, total_epochs - 1));
  switch (mode) {
    case Mode::fixed_m: return fixed_m;
    case Mode::linear_m: return static_cast<double>(epoch) / last;
    case Mode::sine_m: return std::sin(std::numbers::pi * static_cast<double>(epoch) / (2.0 * last));
    default: return 0.0;
  }
}

void TrainConfig::validate() const {
  if (epochs < 2) throw ConfigError("epochs must be at least 2");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (schedule == num::ScheduleKind::multi_step && !(decay_factor > 0.0)) {
    throw ConfigError("decay factor must be positive");
  }
  for (std::size_t i = 1; i < milestones.size(); ++i)
    if (milestones[i] <= milestones[i - 1]) throw ConfigError("milestones must be strictly ascending");
  if (features <= 0 || conv1_filters <= 0 || conv2_filters <= 0) throw ConfigError("model widths must be positive");
  if (!(fixed_m >= 0.0 && fixed_m <= 1.0)) throw ConfigError("fixed_m must lie in [0, 1]");
  if (subset && *subset == 0) throw ConfigError("subset size must be positive");
  policy.validate();
}

LossOrdering loss_ordering_diagnostic(const EpochState& state) {
  LossOrdering d;
  d.epoch = state.epoch;
  d.l_none = state.mean_l_none;
  d.l_ada = state.mean_l_ada;
  d.l_full = state.mean_l_full;
  d.none_above_ada = d.l_none > d.l_ada;
  d.ada_above_full = d.l_ada > d.l_full;
  d.boundary_equal = d.l_none == d.l_ada;
  return d;
}

double accuracy(const num::Tensor& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw ContractError("accuracy: label count mismatch");
  std::size_t correct = 0;
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = logits.data().data() + b * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    if (static_cast<int>(best) == labels[b]) ++correct;
  }
  return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
}

double evaluate(const model::TargetNet& net, const data::Dataset& dataset, const data::ChannelStats& stats,
                std::size_t batch_size) {
  if (dataset.size() == 0) return 0.0;
  num::NoGradGuard no_grad;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    const std::span<const aug::Image> images(dataset.images.data() + start, end - start);
    const std::span<const int> labels(dataset.labels.data() + start, end - start);
    const auto out = net.forward(data::to_batch_tensor(images, stats));
    correct += static_cast<std::size_t>(std::llround(accuracy(out.logits, labels) * static_cast<double>(end - start)));
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

// ---- Trainer -------------------------------------------------------------------

Trainer::Trainer(TrainConfig config, data::Dataset train, std::optional<data::Dataset> test)
    : config_((config.validate(), std::move(config))),
      train_((data::validate(train), std::move(train))),
      test_(std::move(test)),
      net_(build_net(config_, train_)),
      agent_(build_agent(config_)),
      optimizer_(net_.parameters(), config_.lr, config_.momentum, config_.weight_decay),
      schedule_(build_schedule(config_)),
      store_(train_.size()),
      shuffle_rng_(make_stream(config_.seed, stream::shuffle)),
      op_rng_(make_stream(config_.seed, stream::operation)),
      policy_rng_(make_stream(config_.seed, stream::policy_noise)),
      ablation_rng_(make_stream(config_.seed, stream::ablation)),
      preprocess_rng_(make_stream(config_.seed, stream::preprocess)) {
  if (config_.batch_size > train_.size()) {
    throw ConfigError("batch size " + std::to_string(config_.batch_size) + " exceeds training set size " +
                      std::to_string(train_.size()));
  }
  if (config_.mode == Mode::random_m && !config_.random_per_epoch) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> once(store_.size());
    std::vector<std::size_t> all(store_.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      once[i] = u(ablation_rng_);
      all[i] = i;
    }
    store_.write(all, once);
  }
  if (test_) {
    data::validate(*test_);
    if (!test_->images.front().same_shape(train_.images.front())) {
      throw ConfigError("test images differ in shape from training images");
    }
  }
}

std::vector<double> Trainer::magnitudes_for(const data::Batch& batch, int epoch) {
  switch (config_.mode) {
    case Mode::adaaugment:
      return store_.read(batch.indices);
    case Mode::baseline_none:
      return std::vector<double>(batch.indices.size(), 0.0);
    case Mode::random_m: {
      if (!config_.random_per_epoch) return store_.read(batch.indices);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> m(batch.indices.size());
      for (auto& v : m) v = u(ablation_rng_);
      return m;
    }
    default:
      return std::vector<double>(batch.indices.size(),
                                 scheduled_magnitude(config_.mode, epoch, config_.epochs, config_.fixed_m));
  }
}

EpochState Trainer::train_epoch(int epoch) {
  if (store_.size() != train_.size()) throw ConfigError("magnitude store size does not match the training set");
  const auto started = std::chrono::steady_clock::now();
  EpochState st;
  st.epoch = epoch;
  st.total_epochs = config_.epochs;
  st.lambda = lambda_at(epoch, config_.epochs, config_.lambda_schedule);
  st.lr = schedule_.rate(epoch);
  optimizer_.set_learning_rate(st.lr);

  const bool adaptive = config_.mode == Mode::adaaugment;
  const bool baseline = config_.mode == Mode::baseline_none;
  double sum_m = 0.0, sum_none = 0.0, sum_ada = 0.0, sum_full = 0.0, sum_reward = 0.0, sum_correct = 0.0;
  double sum_actor = 0.0, sum_critic = 0.0;
  std::size_t actor_batches = 0, critic_batches = 0, seen = 0;

  auto batches = data::epoch_batches(train_, config_.batch_size, shuffle_rng_);
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    auto& batch = batches[bi];
    const std::size_t n = batch.indices.size();
    if (config_.pad_flip) {
      for (auto& img : batch.images) img = data::pad_crop_flip(img, 4, preprocess_rng_);
    }
    BatchTrace tr;
    tr.epoch = epoch;
    tr.batch = bi;
    tr.indices = batch.indices;
    tr.lambda = st.lambda;
    tr.lr = st.lr;
    tr.applied = magnitudes_for(batch, epoch);

    std::vector<aug::Image> x_ada, x_full;
    if (!baseline) {
      tr.op = aug::sample_operation(op_rng_);
      x_ada.reserve(n);
      x_full.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        x_ada.push_back(aug::apply(tr.op, tr.applied[i], batch.images[i]));
        x_full.push_back(aug::apply(tr.op, 1.0, batch.images[i]));
      }
    } else {
      x_ada = batch.images;
    }

    const num::Tensor t_ada = data::to_batch_tensor(x_ada, train_.stats);
    const auto out_ada = net_.forward(t_ada);
    const auto ce = num::cross_entropy(out_ada.logits, batch.labels);
    tr.l_ada = ce.per_sample.to_vector();

    model::TargetNet::Output out_none;
    if (baseline) {
      tr.l_none = tr.l_ada;
      tr.l_full.assign(n, kNaN);
    } else {
      num::NoGradGuard no_grad;
      out_none = net_.forward(data::to_batch_tensor(batch.images, train_.stats));
      const auto out_full = net_.forward(data::to_batch_tensor(x_full, train_.stats));
      tr.l_none = num::cross_entropy(out_none.logits, batch.labels).per_sample.to_vector();
      tr.l_full = num::cross_entropy(out_full.logits, batch.labels).per_sample.to_vector();
    }

    if (adaptive) {
      const num::Tensor s_none = out_none.features.detach();
      const num::Tensor s_ada = out_ada.features.detach();
      {
        num::NoGradGuard no_grad;
        tr.proposed = agent_->act(s_none, policy_rng_).magnitude;
      }
      store_.write(batch.indices, tr.proposed);
      tr.rewards = reward({tr.l_full, tr.l_ada, tr.l_none, st.lambda});
      tr.policy = agent_->update({s_none, tr.applied, tr.rewards, s_ada});
      if (std::isfinite(tr.policy.actor_loss)) {
        sum_actor += tr.policy.actor_loss;
        ++actor_batches;
      }
      sum_critic += tr.policy.critic_loss;
      ++critic_batches;
      for (double r : tr.rewards) sum_reward += r;
    }

    optimizer_.zero_grad();
    num::backward(ce.mean);
    optimizer_.step();

    for (std::size_t i = 0; i < n; ++i) {
      sum_m += tr.applied[i];
      sum_none += tr.l_none[i];
      sum_ada += tr.l_ada[i];
      sum_full += tr.l_full[i];
    }
    sum_correct += accuracy(out_ada.logits, batch.labels) * static_cast<double>(n);
    seen += n;
    if (trace_) trace_(tr);
  }

  const double count = static_cast<double>(seen);
  st.mean_magnitude = sum_m / count;
  st.mean_l_none = sum_none / count;
  st.mean_l_ada = sum_ada / count;
  st.mean_l_full = sum_full / count;
  st.mean_reward = adaptive ? sum_reward / count : kNaN;
  st.actor_loss = actor_batches ? sum_actor / static_cast<double>(actor_batches) : kNaN;
  st.critic_loss = critic_batches ? sum_critic / static_cast<double>(critic_batches) : kNaN;
  st.train_acc = std::round(sum_correct) / count;
  st.test_acc = test_ ? evaluate(net_, *test_, train_.stats) : kNaN;
  st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return st;
}

void Trainer::save_checkpoints(const std::filesystem::path& dir) const {
  auto records = net_.named_parameters();
  records.push_back(net_.config_record());
  const auto channels = train_.stats.mean.size();
  records.push_back({"data.mean", num::Tensor({channels}, train_.stats.mean)});
  records.push_back({"data.std", num::Tensor({channels}, train_.stats.std)});
  num::save_checkpoint(dir / "target.ckpt", records);
  if (agent_) {
    auto policy = agent_->actor().named_parameters();
    for (auto& r : agent_->critic().named_parameters()) policy.push_back(std::move(r));
    num::save_checkpoint(dir / "policy.ckpt", policy);
  }
  store_.save(dir / "magnitudes.bin");
}

data::ChannelStats stats_from_checkpoint(const std::vector<num::NamedTensor>& records) {
  data::ChannelStats stats;
  for (const auto& r : records) {
    if (r.name == "data.mean") stats.mean = r.tensor.to_vector();
    if (r.name == "data.std") stats.std = r.tensor.to_vector();
  }
  if (stats.mean.empty() || stats.mean.size() != stats.std.size()) {
    throw num::CheckpointError("checkpoint has no normalization statistics (data.mean / data.std)");
  }
  return stats;
}

}  // namespace adaaug::train
