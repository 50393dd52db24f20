#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"
#include "icsoh/pipeline.hpp"

using namespace icsoh;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("icsoh_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Tiny training budget; these tests check plumbing, not accuracy.
PipelineConfig quick_config(const fs::path& out) {
  PipelineConfig cfg;
  cfg.out_dir = out.string();
  cfg.train.max_epochs = 2;
  cfg.pso.population = 2;
  cfg.pso.max_iterations = 1;
  cfg.pso_budget_epochs = 1;
  cfg.search.hidden_lo = 2;
  cfg.search.hidden_hi = 3;
  cfg.ensemble_count = 2;
  cfg.baseline_hidden = 3;
  cfg.seed = 5;
  return cfg;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(csv::read_file(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ICSOH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Shared 900-cycle run through ingest and features.
const fs::path& full_run_dir() {
  static const fs::path dir = [] {
    auto d = scratch("full");
    const auto cfg = quick_config(d);
    cmd_ingest(cfg);
    cmd_features(cfg);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("config: parse, comments, round trip and hash") {
  const auto cfg = parse_pipeline_config(
      "# comment\n"
      "train_fraction = 0.6   # trailing\n"
      "drop_list = mps, pf\n"
      "input_mode = pca_only\n"
      "hidden_hi = 64\n"
      "seed = 18446744073709551615\n");
  CHECK(cfg.train_fraction == 0.6);
  CHECK(cfg.drop_list == std::vector<std::string>{"mps", "pf"});
  CHECK(cfg.input_mode == InputMode::PcaOnly);
  CHECK(cfg.search.hidden_hi == 64);
  CHECK(cfg.seed == 18446744073709551615ull);

  const auto back = parse_pipeline_config(pipeline_config_to_text(cfg));
  CHECK(pipeline_config_to_text(back) == pipeline_config_to_text(cfg));
  CHECK(config_hash(back) == config_hash(cfg));
  CHECK(config_hash(cfg).size() == 16);

  auto moved = cfg;
  moved.out_dir = "elsewhere";
  CHECK(config_hash(moved) == config_hash(cfg));
  moved.seed = 1;
  CHECK(config_hash(moved) != config_hash(cfg));
  CHECK(parse_pipeline_config("drop_list = none\n").drop_list.empty());
}

TEST_CASE("config: unknown, duplicate and malformed keys") {
  CHECK_THROWS_WITH_AS(parse_pipeline_config("hiden_hi = 3\n"), doctest::Contains("hiden_hi"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("seed 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("max_epochs = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("input_mode = both\n"), ConfigError);
  CHECK_THROWS_AS(load_pipeline_config("/nonexistent/icsoh.cfg"), ConfigError);
}

TEST_CASE("config: validation") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.train_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  cfg.pca_dims = 10;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  cfg.drop_list = {"bogus"};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  CHECK(cfg.input_mode == InputMode::PcaPlusCommon);
  CHECK(cfg.pca_dims == 3);
  CHECK(cfg.ensemble_count == 10);
  CHECK(cfg.baseline_hidden == 60);
  CHECK(cfg.baseline_lr == 0.01);
}

TEST_CASE("windows: counts and chronology") {
  CHECK(train_count(900, 0.5) == 450);
  CHECK(train_count(900, 0.7) == 630);
  CHECK(train_count(7, 0.5) == 3);
  Eigen::MatrixXd inputs(10, 2);
  std::vector<double> targets(10);
  for (int i = 0; i < 10; ++i) {
    inputs.row(i) << i, -i;
    targets[i] = 0.1 * i;
  }
  const auto pairs = make_windows(inputs, targets, 4, 8, 5);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].sequence(0, 0) == 0.0);
  CHECK(pairs[0].sequence(4, 0) == 4.0);
  CHECK(pairs[3].target == targets[7]);
  CHECK_THROWS_AS(window_at(inputs, 3, 5), DataError);
  CHECK_THROWS_AS(window_at(inputs, 10, 5), DataError);
}

TEST_CASE("predictions: a perfect stub scores zero on every metric") {
  Eigen::MatrixXd inputs(12, 1);
  std::vector<double> soh(12);
  std::vector<int> cycles(12);
  for (int i = 0; i < 12; ++i) {
    inputs(i, 0) = 1.0 - 0.01 * i;
    soh[i] = inputs(i, 0);
    cycles[i] = i + 1;
  }
  const Predictor perfect = [](std::span<const Sequence> seqs) {
    std::vector<double> out;
    for (const auto& s : seqs) out.push_back(s(s.rows() - 1, 0));
    return out;
  };
  const auto table = predict_test(inputs, cycles, soh, 6, 3, {{"ensemble", perfect}, {"baseline", perfect}});
  CHECK(table.cycles.front() == 7);
  CHECK(table.cycles.size() == 6);
  const auto rows = metric_rows(table, "synthetic", split_label(0.5));
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.split == "50%");
    CHECK(r.report.rmse == 0.0);
    CHECK(r.report.mae == 0.0);
    CHECK(r.report.mse == 0.0);
    CHECK(*r.report.mape_percent == 0.0);
  }
  const auto csv_text = serialize_predictions_csv(table);
  CHECK(csv_text.rfind("cycle,true_soh,baseline_soh,ensemble_soh\n", 0) == 0);
}

TEST_CASE("ingest: synthetic summary and missing dataset path") {
  const auto dir = full_run_dir();
  const auto cap = lines_of(dir / "capacity_soh.csv");
  CHECK(cap.size() == 901);
  CHECK(cap.front() == "cycle,capacity_Ah,soh");

  auto cfg = quick_config(scratch("ingest"));
  cfg.synth.n_cycles = 30;
  CHECK(cmd_ingest(cfg).find("30 cycles") != std::string::npos);
  cfg.dataset_path = "/nonexistent/cs2_35.csv";
  CHECK_THROWS_WITH_AS(cmd_ingest(cfg), doctest::Contains("/nonexistent/cs2_35.csv"), DataError);
}

TEST_CASE("features: reports and provenance") {
  const auto dir = full_run_dir();
  const auto pear = lines_of(dir / "pearson.csv");
  REQUIRE(pear.size() == 14);
  std::set<std::string> dropped;
  for (std::size_t i = 1; i < pear.size(); ++i) {
    const auto f = csv::split_line(pear[i]);
    if (f[3] == "no") dropped.insert(f[0]);
    if (f[0] == "area") CHECK(std::stod(f[2]) > 0.9);
  }
  CHECK(dropped == std::set<std::string>{"mps", "pf", "cf", "kur"});

  const auto report = lines_of(dir / "pca_report.csv");
  double total = 0.0;
  for (std::size_t i = 1; i < report.size(); ++i) total += std::stod(csv::split_line(report[i])[2]);
  CHECK(std::abs(total - 100.0) < 1e-9);

  const auto model = nlohmann::json::parse(csv::read_file(dir / "pca_model.json"));
  CHECK(model.at("provenance").at("fitted_on") == "train");
  CHECK(model.at("provenance").at("n_train") == 450);
  const int last_train = model.at("provenance").at("last_train_cycle");
  const auto pcs = lines_of(dir / "pca_features.csv");
  int min_test = 1 << 30;
  for (std::size_t i = 1; i < pcs.size(); ++i) {
    const auto f = csv::split_line(pcs[i]);
    if (f[1] == "test") min_test = std::min(min_test, std::stoi(f[0]));
  }
  CHECK(last_train < min_test);

  const auto table = parse_feature_table_csv(csv::read_file(dir / "features.csv"));
  CHECK(table.size() == 900);
  CHECK(serialize_feature_table_csv(table) == csv::read_file(dir / "features.csv"));
}

TEST_CASE("features: model statistics come from the training rows only") {
  const auto dir = full_run_dir();
  const auto table = parse_feature_table_csv(csv::read_file(dir / "features.csv"));
  auto cfg = quick_config(dir);
  const auto model = fit_feature_model(table, cfg);
  CHECK(model.n_train == 450);
  // Changing a test row leaves the fitted model untouched.
  auto altered = table;
  altered.his[800].area *= 3.0;
  altered.common[800].ccct_s += 1000.0;
  const auto again = fit_feature_model(altered, cfg);
  CHECK(again.pca.mean == model.pca.mean);
  CHECK(again.pca.components == model.pca.components);
  CHECK(again.score_scale == model.score_scale);
  CHECK(again.common_ranges[0].max == model.common_ranges[0].max);

  const Eigen::MatrixXd inputs = model_inputs(model, table);
  CHECK(inputs.cols() == 6);
  CHECK(inputs.topRows(450).leftCols(3).cwiseAbs().maxCoeff() <= 0.5 + 1e-12);
  cfg.input_mode = InputMode::PcaOnly;
  CHECK(model_inputs(fit_feature_model(table, cfg), table).cols() == 3);

  const auto back = feature_model_from_json(feature_model_to_json(model, cfg));
  CHECK(back.pca.components == model.pca.components);
  CHECK(back.score_scale == model.score_scale);

  cfg.train_fraction = 0.004;
  CHECK_THROWS_AS(fit_feature_model(table, cfg), DataError);
}

TEST_CASE("train: pair count, determinism and eval outputs") {
  const auto dir = full_run_dir();
  const auto cfg = quick_config(dir);
  const auto summary = cmd_train(cfg);
  CHECK(summary.find("446 pairs") != std::string::npos);
  const auto pre = nlohmann::json::parse(csv::read_file(dir / "preprocessing.json"));
  CHECK(pre.at("training_pairs") == 446);
  CHECK(pre.at("config_hash") == config_hash(cfg));
  const auto manifest1 = csv::read_file(dir / "model" / "manifest.json");
  const auto learner1 = csv::read_file(dir / "model" / "learner_00.json");
  cmd_train(cfg);
  CHECK(csv::read_file(dir / "model" / "manifest.json") == manifest1);
  CHECK(csv::read_file(dir / "model" / "learner_00.json") == learner1);

  cmd_eval(cfg);
  const auto preds = lines_of(dir / "predictions.csv");
  CHECK(preds.size() == 451);
  CHECK(preds.front() == "cycle,true_soh,baseline_soh,ensemble_soh");
  const auto metrics = lines_of(dir / "metrics.csv");
  REQUIRE(metrics.size() == 3);
  CHECK(metrics[1].rfind("synthetic,50%,baseline,", 0) == 0);
  CHECK(metrics[2].rfind("synthetic,50%,ensemble,", 0) == 0);

  const auto first = csv::read_file(dir / "predictions.csv");
  cmd_predict(cfg);
  CHECK(csv::read_file(dir / "predictions.csv") == first);

  auto other = cfg;
  other.train_fraction = 0.6;
  CHECK_THROWS_AS(cmd_train(other), ConfigError);
}

TEST_CASE("commands need their inputs") {
  const auto cfg = quick_config(scratch("empty"));
  CHECK_THROWS_WITH_AS(cmd_features(cfg), doctest::Contains("dataset.csv"), DataError);
  CHECK_THROWS_AS(cmd_train(cfg), DataError);
  CHECK_THROWS_AS(cmd_eval(cfg), DataError);
}

TEST_CASE("cli: exit codes") {
  const auto dir = scratch("cli");
  std::ofstream(dir / "bad.cfg") << "no_such_key = 1\n";
  std::ofstream(dir / "small.cfg") << "synth_n_cycles = 30\n";
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("ingest --config " + (dir / "bad.cfg").string()) == 1);
  CHECK(run_cli("ingest --train-fraction 1.5 --out " + dir.string()) == 1);
  CHECK(run_cli("train --out " + (dir / "nothing").string()) == 2);
  CHECK(run_cli("ingest --config " + (dir / "small.cfg").string() + " --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "dataset.csv"));
  std::ofstream(dir / "missing.cfg") << "dataset_path = /nonexistent/file.csv\n";
  CHECK(run_cli("ingest --config " + (dir / "missing.cfg").string() + " --out " + dir.string()) == 2);
  CHECK(run_cli("synth --out " + dir.string() + " --config " + (dir / "small.cfg").string()) == 0);
  CHECK(fs::exists(dir / "synth_dataset.csv"));
}
