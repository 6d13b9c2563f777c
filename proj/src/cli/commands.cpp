#include "adaaug/run.hpp"

#include "adaaug/checkpoint.hpp"
#include "adaaug/config.hpp"
#include "adaaug/errors.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace adaaug::cli {

namespace fs = std::filesystem;

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::string metrics_row(const train::EpochState& s) {
  std::string row = std::to_string(s.epoch);
  for (double v : {s.lambda, s.mean_magnitude, s.mean_l_none, s.mean_l_ada, s.mean_l_full, s.mean_reward, s.actor_loss,
                   s.critic_loss, s.train_acc, s.test_acc, s.lr, s.wall_seconds}) {
    row += ',';
    row += real(v);
  }
  return row;
}

std::string loss_ordering_row(const train::LossOrdering& d) {
  return std::to_string(d.epoch) + "," + real(d.l_none) + "," + real(d.l_ada) + "," + real(d.l_full) + "," +
         (d.none_above_ada ? "1" : "0") + "," + (d.ada_above_full ? "1" : "0") + "," + (d.boundary_equal ? "1" : "0");
}

RunLock::RunLock(const fs::path& dir) : file_(dir / ".lock") {
  const int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) throw LockError("output directory " + dir.string() + " is locked by another run (" +
                                         file_.string() + ")");
    throw LockError("cannot create " + file_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

std::vector<train::EpochState> run_train(train::TrainConfig config, std::ostream* progress) {
  config.validate();
  if (config.data_path.empty()) throw ConfigError("data.path is required");
  config.data_path = fs::absolute(config.data_path);
  std::optional<data::Subset> subset;
  if (config.subset) subset = data::Subset{*config.subset, config.subset_seed};
  data::Dataset train_set = data::load_dataset(config.data_path, config.format, data::Split::train, subset);
  std::optional<data::Dataset> test_set;
  if (config.evaluate_test) test_set = data::load_dataset(config.data_path, config.format, data::Split::test);
  return run_train(std::move(config), std::move(train_set), std::move(test_set), progress);
}

std::vector<train::EpochState> run_train(train::TrainConfig config, data::Dataset train_set,
                                         std::optional<data::Dataset> test_set, std::ostream* progress) {
  config.validate();
  if (!config.data_path.empty()) config.data_path = fs::absolute(config.data_path);
  config.out_dir = fs::absolute(config.out_dir);
  fs::create_directories(config.out_dir);
  RunLock lock(config.out_dir);

  const auto& dir = config.out_dir;
  write_file(dir / "manifest.ini", manifest_text(config));

  train::Trainer trainer(config, std::move(train_set), std::move(test_set));
  std::ofstream metrics(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
  std::ofstream ordering(dir / "loss_ordering.csv", std::ios::binary | std::ios::trunc);
  if (!metrics || !ordering) throw std::runtime_error("cannot create metrics files in " + dir.string());
  metrics << kMetricsHeader << "\n" << std::flush;
  ordering << "epoch,mean_L_none,mean_L_ada,mean_L_full,none_above_ada,ada_above_full,boundary_equal\n";

  std::vector<train::EpochState> history;
  for (int t = 0; t < config.epochs; ++t) {
    const auto state = trainer.train_epoch(t);
    history.push_back(state);
    metrics << metrics_row(state) << "\n" << std::flush;
    const auto diag = train::loss_ordering_diagnostic(state);
    ordering << loss_ordering_row(diag) << "\n" << std::flush;
    if (progress) {
      *progress << "epoch " << t + 1 << "/" << config.epochs << "  m=" << real(state.mean_magnitude)
                << "  L_ada=" << real(state.mean_l_ada) << "  train_acc=" << real(state.train_acc)
                << "  test_acc=" << real(state.test_acc) << "  " << real(state.wall_seconds) << "s"
                << (t > 0 && !diag.ordered() ? "  [loss ordering violated]" : "") << "\n"
                << std::flush;
    }
  }
  trainer.save_checkpoints(dir);
  return history;
}

double run_eval(const fs::path& checkpoint, const data::Dataset& dataset) {
  const auto records = num::load_checkpoint(checkpoint);
  const auto net = model::TargetNet::from_checkpoint(records);
  const auto stats = train::stats_from_checkpoint(records);
  data::validate(dataset);
  const auto& cfg = net.config();
  const auto& img = dataset.images.front();
  if (img.channels != cfg.channels || img.height != cfg.height || img.width != cfg.width ||
      dataset.classes > cfg.classes || stats.mean.size() != static_cast<std::size_t>(cfg.channels)) {
    throw num::CheckpointError("checkpoint expects " + std::to_string(cfg.channels) + "x" +
                               std::to_string(cfg.height) + "x" + std::to_string(cfg.width) + " images and " +
                               std::to_string(cfg.classes) + " classes; dataset does not match");
  }
  return train::evaluate(net, dataset, stats);
}

double run_eval(const fs::path& checkpoint, const fs::path& data_dir, data::Format format) {
  return run_eval(checkpoint, data::load_dataset(data_dir, format, data::Split::test));
}

void emit_plotdata(const fs::path& run_dir) {
  const fs::path source = run_dir / "metrics.csv";
  std::ifstream in(source, std::ios::binary);
  if (!in) throw std::runtime_error("no metrics.csv in " + run_dir.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError(source.string() + ": unexpected header");
  }
  const auto columns = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < columns.size(); ++i) col[columns[i]] = i;

  const std::vector<std::pair<std::string, std::vector<std::string>>> outputs = {
      {"magnitude.csv", {"epoch", "mean_magnitude"}},
      {"accuracy.csv", {"epoch", "train_acc", "test_acc"}},
      {"losses.csv", {"epoch", "mean_L_none", "mean_L_ada", "mean_L_full"}}};
  std::vector<std::string> text(outputs.size());
  for (std::size_t o = 0; o < outputs.size(); ++o) {
    for (std::size_t k = 0; k < outputs[o].second.size(); ++k) text[o] += (k ? "," : "") + outputs[o].second[k];
    text[o] += "\n";
  }
  std::size_t rows = 0, n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != columns.size()) {
      throw FormatError(source.string() + ":" + std::to_string(n) + ": expected " + std::to_string(columns.size()) +
                        " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t o = 0; o < outputs.size(); ++o) {
      for (std::size_t k = 0; k < outputs[o].second.size(); ++k) {
        text[o] += (k ? "," : "") + fields[col.at(outputs[o].second[k])];
      }
      text[o] += "\n";
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(source.string() + ": no epoch rows");
  for (std::size_t o = 0; o < outputs.size(); ++o) write_file(run_dir / outputs[o].first, text[o]);
}

}  // namespace adaaug::cli
