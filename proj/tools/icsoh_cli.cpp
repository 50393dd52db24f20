// icsoh: battery SOH estimation from incremental-capacity features.
#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "icsoh/error.hpp"
#include "icsoh/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Battery SOH estimation: IC features, PCA, PSO-tuned BiLSTM, AdaBoost.R2"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> train_fraction;
  std::string out_dir;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--train-fraction", train_fraction, "chronological training share in (0, 1)");
  app.add_option("--out", out_dir, "output directory");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "parse or generate cycling data"},
      {"features", "IC curves, indicators, Pearson screening and PCA"},
      {"train", "PSO hyperparameter search and AdaBoost ensemble"},
      {"predict", "predict SOH for the test cycles"},
      {"eval", "predict and compute metrics"},
      {"synth", "write a synthetic cycling CSV"},
      {"all", "ingest, features, train and eval"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    icsoh::PipelineConfig cfg = config_path.empty() ? icsoh::PipelineConfig{} : icsoh::load_pipeline_config(config_path);
    if (seed) cfg.seed = *seed;
    if (train_fraction) cfg.train_fraction = *train_fraction;
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    const std::string command = app.get_subcommands().front()->get_name();
    std::string summary;
    if (command == "ingest") summary = icsoh::cmd_ingest(cfg);
    else if (command == "features") summary = icsoh::cmd_features(cfg);
    else if (command == "train") summary = icsoh::cmd_train(cfg);
    else if (command == "predict") summary = icsoh::cmd_predict(cfg);
    else if (command == "eval") summary = icsoh::cmd_eval(cfg);
    else if (command == "synth") summary = icsoh::cmd_synth(cfg);
    else summary = icsoh::cmd_all(cfg);
    std::cout << summary;
    return kOk;
  } catch (const icsoh::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const icsoh::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const icsoh::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
