#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icsoh/boost.hpp"
#include "icsoh/cycling_data.hpp"
#include "icsoh/feature_bank.hpp"
#include "icsoh/ic_analysis.hpp"
#include "icsoh/metrics.hpp"
#include "icsoh/pca.hpp"
#include "icsoh/swarm.hpp"
#include "icsoh/synth.hpp"
#include "icsoh/trainer.hpp"

namespace icsoh {

enum class InputMode { PcaOnly, PcaPlusCommon };

struct PipelineConfig {
  // Data source: an export path, or the synthetic generator when empty.
  std::string dataset_path;
  CsvSchema schema;
  IngestOptions ingest;
  SynthConfig synth;

  double grid_step_V = kDefaultGridStepV;
  SgConfig sg;
  IndicatorSettings indicators;
  std::vector<std::string> drop_list = kDefaultDropList;
  int pca_dims = 3;
  InputMode input_mode = InputMode::PcaPlusCommon;

  TrainConfig train;
  PsoConfig pso;
  SearchSpace search;
  int pso_budget_epochs = 60;
  int ensemble_count = 10;
  int baseline_hidden = 60;
  double baseline_lr = 0.01;

  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool dump_ic_curves = false;

  void validate() const;
};

/// Flat `key = value` text; '#' starts a comment. Unknown keys, duplicate
/// keys and malformed values throw ConfigError.
PipelineConfig parse_pipeline_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Canonical text of every key (sorted), parseable by parse_pipeline_config.
std::string pipeline_config_to_text(const PipelineConfig& cfg);

/// FNV-1a of the canonical text without the output directory, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

std::string_view to_string(InputMode mode);

/// Chronological split: the first floor(fraction * n) cycles train.
std::size_t train_count(std::size_t n_cycles, double train_fraction);

/// Sequence ending at row `end` (inclusive) of `inputs`, `window` rows long.
Sequence window_at(const Eigen::MatrixXd& inputs, std::size_t end, int window);

/// Pairs whose window ends at rows [first_end, last_end).
std::vector<SequencePair> make_windows(const Eigen::MatrixXd& inputs, std::span<const double> targets,
                                       std::size_t first_end, std::size_t last_end, int window);

/// Per-cycle indicator table.
struct FeatureTable {
  std::vector<int> cycles;
  std::vector<HiVector> his;
  std::vector<CommonHis> common;
  std::vector<double> capacity_Ah;
  std::vector<double> soh;
  std::vector<std::string> notes;

  [[nodiscard]] std::size_t size() const { return cycles.size(); }
};

/// IC curve, smoothing and indicators for every cycle. Cycles whose curve
/// cannot be built are left out and noted. Missing common HIs are carried
/// forward from the previous cycle.
FeatureTable compute_feature_table(const CyclingDataset& dataset, const PipelineConfig& cfg,
                                   std::vector<IcCurve>* smoothed_curves = nullptr);

std::string serialize_feature_table_csv(const FeatureTable& table);
FeatureTable parse_feature_table_csv(std::string_view text);

/// Everything fitted on the training rows that turns indicators into model
/// inputs.
struct FeatureModel {
  FeatureSelection selection;  // computed on training rows
  PcaModel pca;
  /// PCA scores are divided by this (twice the largest training |score|),
  /// keeping training inputs inside [-0.5, 0.5] without clamping.
  double score_scale = 1.0;
  std::array<MinMaxRange, 3> common_ranges{};
  InputMode input_mode = InputMode::PcaPlusCommon;
  std::size_t n_train = 0;
  int last_train_cycle = 0;
};

FeatureModel fit_feature_model(const FeatureTable& table, const PipelineConfig& cfg);

/// Unscaled PCA scores of every cycle.
Eigen::MatrixXd pca_scores(const FeatureModel& model, const FeatureTable& table);

/// Rows = cycles, columns = scaled PCA scores (+ normalized CCCT/CVCT/CCDT).
Eigen::MatrixXd model_inputs(const FeatureModel& model, const FeatureTable& table);

nlohmann::json feature_model_to_json(const FeatureModel& model, const PipelineConfig& cfg);
FeatureModel feature_model_from_json(const nlohmann::json& j);

struct TrainedModels {
  EnsembleModel ensemble;
  BiLstmNetwork baseline;
  PsoResult pso;
  std::size_t training_pairs = 0;
};

/// PSO over (hidden, lr) on a chronological 80/20 split of the training
/// pairs, then AdaBoost.R2 on all of them, plus the fixed baseline.
TrainedModels train_models(const Eigen::MatrixXd& inputs, std::span<const double> soh, std::size_t n_train,
                           const PipelineConfig& cfg);

using Predictor = std::function<std::vector<double>(std::span<const Sequence>)>;

struct PredictionTable {
  std::vector<int> cycles;
  std::vector<double> truth;
  std::map<std::string, std::vector<double>> predicted;  // model name -> values
};

/// Predicts every test cycle (rows n_train..end) with each named predictor.
PredictionTable predict_test(const Eigen::MatrixXd& inputs, std::span<const int> cycles,
                             std::span<const double> soh, std::size_t n_train, int window,
                             const std::map<std::string, Predictor>& predictors);

std::string serialize_predictions_csv(const PredictionTable& table);
std::vector<MetricRow> metric_rows(const PredictionTable& table, const std::string& battery,
                                   const std::string& split);
std::string split_label(double train_fraction);

// Subcommands. Each reads its inputs from and writes its outputs to
// cfg.out_dir, and returns a short human-readable summary.
std::string cmd_synth(const PipelineConfig& cfg);
std::string cmd_ingest(const PipelineConfig& cfg);
std::string cmd_features(const PipelineConfig& cfg);
std::string cmd_train(const PipelineConfig& cfg);
std::string cmd_predict(const PipelineConfig& cfg);
std::string cmd_eval(const PipelineConfig& cfg);
std::string cmd_all(const PipelineConfig& cfg);

}  // namespace icsoh
