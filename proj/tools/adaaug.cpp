// adaaug: train, eval, analyze-dunn, plotdata.
// Exit status: 0 success, 1 usage or configuration error, 2 runtime error.

#include "adaaug/config.hpp"
#include "adaaug/dunn.hpp"
#include "adaaug/errors.hpp"
#include "adaaug/run.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

void print_real(double v) { std::printf("%.17g\n", v); }

}  // namespace

int main(int argc, char** argv) {
  using namespace adaaug;

  CLI::App app{"AdaAugment: per-sample adaptive augmentation magnitudes learned by an actor-critic policy"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kVersion);

  std::string config_path, out_dir, checkpoint, data_dir, format_name = "mnist-idx", embeddings, labels;
  std::optional<std::uint64_t> seed;

  auto* train = app.add_subcommand("train", "run T epochs and write metrics, manifest and checkpoints");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--seed", seed, "override train.seed");
  train->add_option("--out", out_dir, "override output.dir");

  auto* eval = app.add_subcommand("eval", "test accuracy of a target checkpoint");
  eval->add_option("--checkpoint", checkpoint, "target.ckpt written by train")->required();
  auto* eval_data = eval->add_option("--data", data_dir, "dataset directory");
  eval->add_option("--format", format_name, "mnist-idx or cifar10-binary");
  auto* eval_config = eval->add_option("--config", config_path, "take data path and format from a config");
  eval_data->excludes(eval_config);

  auto* dunn = app.add_subcommand("analyze-dunn", "Dunn index of labelled embeddings");
  dunn->add_option("embeddings", embeddings, "CSV, one embedding per line")->required();
  dunn->add_option("labels", labels, "one integer label per line")->required();

  auto* plot = app.add_subcommand("plotdata", "per-epoch series CSVs from a run directory");
  plot->add_option("--out", out_dir, "run directory holding metrics.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*train) {
      auto config = cli::load_config(config_path);
      if (seed) config.seed = *seed;
      if (!out_dir.empty()) config.out_dir = out_dir;
      config.validate();
      cli::run_train(config, &std::cerr);
      std::cout << "wrote " << std::filesystem::absolute(config.out_dir).string() << "\n";
    } else if (*eval) {
      data::Format format;
      std::filesystem::path dir = data_dir;
      if (!config_path.empty()) {
        const auto config = cli::load_config(config_path);
        dir = config.data_path;
        format = config.format;
      } else {
        auto f = data::format_from_name(format_name);
        if (!f) throw ConfigError("unknown format " + format_name);
        format = *f;
      }
      if (dir.empty()) throw ConfigError("eval needs --data or --config");
      print_real(cli::run_eval(checkpoint, dir, format));
    } else if (*dunn) {
      print_real(cli::dunn_index_files(embeddings, labels));
    } else if (*plot) {
      cli::emit_plotdata(out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return 0;
}
