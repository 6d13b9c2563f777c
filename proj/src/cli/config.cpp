#include "adaaug/config.hpp"

#include "adaaug/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace adaaug::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Entry {
  std::string value;
  int line = 0;
};

using Table = std::map<std::string, Entry>;  // "section.key"

[[noreturn]] void bad_value(const std::string& key, const Entry& e, const char* expected) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + key + " = '" + e.value + "' is not " + expected);
}

template <typename T>
T parse_integer(const std::string& key, const Entry& e) {
  T v{};
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) bad_value(key, e, "an integer in range");
  return v;
}

double parse_real(const std::string& key, const Entry& e) {
  double v = 0.0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) bad_value(key, e, "a finite real");
  return v;
}

bool parse_bool(const std::string& key, const Entry& e) {
  if (e.value == "true") return true;
  if (e.value == "false") return false;
  bad_value(key, e, "true or false");
}

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "data.path",         "data.format",       "data.subset",         "data.subset_seed",
      "data.evaluate_test", "data.pad_flip",     "model.features",      "model.conv1_filters",
      "model.conv2_filters", "optim.lr",         "optim.momentum",      "optim.weight_decay",
      "optim.schedule",    "optim.milestones",  "optim.decay_factor",  "policy.gamma",
      "policy.sigma",      "policy.actor_lr",   "policy.critic_lr",    "policy.hidden1",
      "policy.hidden2",    "policy.lambda_schedule", "train.epochs",   "train.batch_size",
      "train.mode",        "train.fixed_m",     "train.random_per_epoch", "train.seed",
      "output.dir"};
  return keys;
}

Table read_table(std::istream& in) {
  Table table;
  std::string section, raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty() || text.front() == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    if (section.empty()) throw ConfigError("line " + std::to_string(line) + ": key outside any section");
    const std::string key = section + "." + trim(std::string_view(text).substr(0, eq));
    if (!known_keys().count(key)) throw ConfigError("line " + std::to_string(line) + ": unknown key " + key);
    if (table.count(key)) throw ConfigError("line " + std::to_string(line) + ": duplicate key " + key);
    table[key] = {trim(std::string_view(text).substr(eq + 1)), line};
  }
  return table;
}

}  // namespace

train::TrainConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  const Table table = read_table(in);
  train::TrainConfig c;
  auto get = [&](const char* key) -> const Entry* {
    auto it = table.find(key);
    return it == table.end() ? nullptr : &it->second;
  };
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  if (auto e = get("data.path")) c.data_path = resolve(e->value);
  if (auto e = get("data.format")) {
    auto f = data::format_from_name(e->value);
    if (!f) bad_value("data.format", *e, "mnist-idx or cifar10-binary");
    c.format = *f;
  }
  if (auto e = get("data.subset")) {
    if (e->value != "none") c.subset = parse_integer<std::size_t>("data.subset", *e);
  }
  if (auto e = get("data.subset_seed")) c.subset_seed = parse_integer<std::uint64_t>("data.subset_seed", *e);
  if (auto e = get("data.evaluate_test")) c.evaluate_test = parse_bool("data.evaluate_test", *e);
  if (auto e = get("data.pad_flip")) c.pad_flip = parse_bool("data.pad_flip", *e);

  if (auto e = get("model.features")) c.features = parse_integer<int>("model.features", *e);
  if (auto e = get("model.conv1_filters")) c.conv1_filters = parse_integer<int>("model.conv1_filters", *e);
  if (auto e = get("model.conv2_filters")) c.conv2_filters = parse_integer<int>("model.conv2_filters", *e);

  if (auto e = get("optim.lr")) c.lr = parse_real("optim.lr", *e);
  if (auto e = get("optim.momentum")) c.momentum = parse_real("optim.momentum", *e);
  if (auto e = get("optim.weight_decay")) c.weight_decay = parse_real("optim.weight_decay", *e);
  if (auto e = get("optim.schedule")) {
    if (e->value == "cosine") c.schedule = num::ScheduleKind::cosine;
    else if (e->value == "multi-step") c.schedule = num::ScheduleKind::multi_step;
    else bad_value("optim.schedule", *e, "cosine or multi-step");
  }
  if (auto e = get("optim.milestones")) {
    std::stringstream ss(e->value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) continue;
      c.milestones.push_back(parse_integer<int>("optim.milestones", Entry{t, e->line}));
    }
  }
  if (auto e = get("optim.decay_factor")) c.decay_factor = parse_real("optim.decay_factor", *e);

  if (auto e = get("policy.gamma")) c.policy.gamma = parse_real("policy.gamma", *e);
  if (auto e = get("policy.sigma")) c.policy.sigma = parse_real("policy.sigma", *e);
  if (auto e = get("policy.actor_lr")) c.policy.actor_lr = parse_real("policy.actor_lr", *e);
  if (auto e = get("policy.critic_lr")) c.policy.critic_lr = parse_real("policy.critic_lr", *e);
  if (auto e = get("policy.hidden1")) c.policy.hidden1 = parse_integer<int>("policy.hidden1", *e);
  if (auto e = get("policy.hidden2")) c.policy.hidden2 = parse_integer<int>("policy.hidden2", *e);
  if (auto e = get("policy.lambda_schedule")) {
    auto s = train::lambda_schedule_from_name(e->value);
    if (!s) bad_value("policy.lambda_schedule", *e, "linear, cosine or step");
    c.lambda_schedule = *s;
  }

  if (auto e = get("train.epochs")) c.epochs = parse_integer<int>("train.epochs", *e);
  if (auto e = get("train.batch_size")) c.batch_size = parse_integer<std::size_t>("train.batch_size", *e);
  if (auto e = get("train.mode")) {
    auto m = train::mode_from_name(e->value);
    if (!m) bad_value("train.mode", *e, "adaaugment, baseline-none, fixed-m, random-m, linear-m or sine-m");
    c.mode = *m;
  }
  if (auto e = get("train.fixed_m")) c.fixed_m = parse_real("train.fixed_m", *e);
  if (auto e = get("train.random_per_epoch")) c.random_per_epoch = parse_bool("train.random_per_epoch", *e);
  if (auto e = get("train.seed")) c.seed = parse_integer<std::uint64_t>("train.seed", *e);

  if (auto e = get("output.dir")) c.out_dir = resolve(e->value);
  return c;
}

train::TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return parse_config(in, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const train::TrainConfig& c) {
  std::ostringstream o;
  auto flag = [](bool b) { return b ? "true" : "false"; };
  o << "[data]\n"
    << "path = " << c.data_path.string() << "\n"
    << "format = " << data::format_name(c.format) << "\n"
    << "subset = " << (c.subset ? std::to_string(*c.subset) : std::string("none")) << "\n"
    << "subset_seed = " << c.subset_seed << "\n"
    << "evaluate_test = " << flag(c.evaluate_test) << "\n"
    << "pad_flip = " << flag(c.pad_flip) << "\n\n";
  o << "[model]\n"
    << "features = " << c.features << "\n"
    << "conv1_filters = " << c.conv1_filters << "\n"
    << "conv2_filters = " << c.conv2_filters << "\n\n";
  o << "[optim]\n"
    << "lr = " << real(c.lr) << "\n"
    << "momentum = " << real(c.momentum) << "\n"
    << "weight_decay = " << real(c.weight_decay) << "\n"
    << "schedule = " << (c.schedule == num::ScheduleKind::cosine ? "cosine" : "multi-step") << "\n"
    << "milestones =";
  for (std::size_t i = 0; i < c.milestones.size(); ++i) o << (i ? ", " : " ") << c.milestones[i];
  o << "\n"
    << "decay_factor = " << real(c.decay_factor) << "\n\n";
  o << "[policy]\n"
    << "gamma = " << real(c.policy.gamma) << "\n"
    << "sigma = " << real(c.policy.sigma) << "\n"
    << "actor_lr = " << real(c.policy.actor_lr) << "\n"
    << "critic_lr = " << real(c.policy.critic_lr) << "\n"
    << "hidden1 = " << c.policy.hidden1 << "\n"
    << "hidden2 = " << c.policy.hidden2 << "\n"
    << "lambda_schedule = " << train::lambda_schedule_name(c.lambda_schedule) << "\n\n";
  o << "[train]\n"
    << "epochs = " << c.epochs << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "mode = " << train::mode_name(c.mode) << "\n"
    << "fixed_m = " << real(c.fixed_m) << "\n"
    << "random_per_epoch = " << flag(c.random_per_epoch) << "\n"
    << "seed = " << c.seed << "\n\n";
  o << "[output]\n"
    << "dir = " << c.out_dir.string() << "\n";
  return o.str();
}

std::string manifest_text(const train::TrainConfig& config) {
  std::ostringstream o;
  o << "# adaaug run manifest\n"
    << "# adaaug " << kVersion << ", compiler " << __VERSION__ << ", C++ " << __cplusplus << "\n"
    << "# replay: adaaug train --config <this file> --out <dir>\n\n"
    << serialize_config(config);
  return o.str();
}

}  // namespace adaaug::cli
