#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "icsoh/bilstm.hpp"
#include "icsoh/trainer.hpp"

namespace icsoh {

/// One AdaBoost.R2 round as seen by the weak-learner seam: given the
/// bootstrap indices into the training set and the round number, train a
/// learner and return its predictions on the full training set.
using BoostRoundFn =
    std::function<std::vector<double>(std::span<const std::size_t> resample, int round, std::uint64_t seed)>;

struct BoostRound {
  int round = 0;
  double average_loss = 0.0;
  double beta = 0.0;
  double learner_weight = 0.0;
  bool accepted = false;
  std::vector<double> sample_weights_after;
};

struct BoostTrace {
  std::vector<BoostRound> rounds;
  std::vector<int> accepted_rounds;    // indices into rounds
  std::vector<double> learner_weights; // one per accepted round
  bool fallback = false;               // every round rejected
  std::vector<std::string> warnings;
};

inline constexpr double kPerfectLearnerWeight = 23.025850929940457;  // ln(1e10)

/// AdaBoost.R2 with linear loss on `targets`. Runs up to `count` rounds;
/// stops early on an average loss >= 0.5 (round discarded) or < 1e-10.
BoostTrace adaboost_r2(std::span<const double> targets, int count, std::uint64_t seed,
                       const BoostRoundFn& round_fn);

/// Sort predictions and return the first whose cumulative weight reaches
/// half the total.
double weighted_median(std::span<const double> predictions, std::span<const double> weights);

struct EnsembleModel {
  std::vector<BiLstmNetwork> learners;
  std::vector<double> learner_weights;
  int count = 10;
  std::vector<std::string> warnings;
};

EnsembleModel adaboost_fit(std::span<const SequencePair> train_pairs, int hidden, double lr, int count,
                           std::uint64_t seed, const TrainConfig& train_cfg);

double ensemble_predict(const EnsembleModel& model, const Sequence& sequence);
std::vector<double> ensemble_predict_all(const EnsembleModel& model, std::span<const Sequence> sequences);

/// Writes learner_XX.json files plus manifest.json into `dir`.
void save_ensemble(const EnsembleModel& model, const std::filesystem::path& dir, const std::string& config_hash);
EnsembleModel load_ensemble(const std::filesystem::path& dir, std::string* config_hash = nullptr);

}  // namespace icsoh
