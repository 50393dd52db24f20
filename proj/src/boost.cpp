#include "icsoh/boost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"

namespace icsoh {

namespace {

constexpr double kPerfectLoss = 1e-10;

std::uint64_t round_seed(std::uint64_t seed, int round) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(round), 0xb0057u};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

BoostTrace adaboost_r2(std::span<const double> targets, int count, std::uint64_t seed,
                       const BoostRoundFn& round_fn) {
  if (count < 1) throw ConfigError("ensemble count must be at least 1");
  const std::size_t n = targets.size();
  if (n == 0) throw DataError("boosting needs training samples");

  BoostTrace trace;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> resample(n);

  for (int t = 0; t < count; ++t) {
    std::discrete_distribution<std::size_t> draw(w.begin(), w.end());
    for (auto& idx : resample) idx = draw(rng);
    const auto predictions = round_fn(resample, t, round_seed(seed, t));
    if (predictions.size() != n) throw DataError("weak learner returned wrong prediction count");

    std::vector<double> err(n);
    double max_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = std::abs(predictions[i] - targets[i]);
      if (!std::isfinite(err[i])) err[i] = std::numeric_limits<double>::infinity();
      max_err = std::max(max_err, err[i]);
    }
    BoostRound round;
    round.round = t;
    std::vector<double> loss(n, 0.0);
    if (std::isinf(max_err)) {
      round.average_loss = 1.0;
    } else if (max_err > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        loss[i] = err[i] / max_err;
        round.average_loss += w[i] * loss[i];
      }
    }

    if (round.average_loss >= 0.5) {
      round.accepted = false;
      round.sample_weights_after = w;
      trace.rounds.push_back(std::move(round));
      break;
    }
    round.accepted = true;
    if (round.average_loss < kPerfectLoss) {
      round.beta = 0.0;
      round.learner_weight = kPerfectLearnerWeight;
      round.sample_weights_after = w;
      trace.accepted_rounds.push_back(static_cast<int>(trace.rounds.size()));
      trace.learner_weights.push_back(round.learner_weight);
      trace.rounds.push_back(std::move(round));
      break;
    }
    round.beta = round.average_loss / (1.0 - round.average_loss);
    round.learner_weight = std::log(1.0 / round.beta);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::pow(round.beta, 1.0 - loss[i]);
      total += w[i];
    }
    for (auto& wi : w) wi /= total;
    round.sample_weights_after = w;
    trace.accepted_rounds.push_back(static_cast<int>(trace.rounds.size()));
    trace.learner_weights.push_back(round.learner_weight);
    trace.rounds.push_back(std::move(round));
  }

  if (trace.accepted_rounds.empty()) {
    trace.fallback = true;
    trace.accepted_rounds.push_back(0);
    trace.learner_weights.push_back(1.0);
    trace.warnings.push_back("every boosting round was rejected (average loss >= 0.5); "
                             "keeping the first learner alone");
  }
  return trace;
}

double weighted_median(std::span<const double> predictions, std::span<const double> weights) {
  if (predictions.empty() || predictions.size() != weights.size()) {
    throw ConfigError("weighted_median: need matching non-empty inputs");
  }
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });
  const double half = 0.5 * std::accumulate(weights.begin(), weights.end(), 0.0);
  double cumulative = 0.0;
  for (auto k : order) {
    cumulative += weights[k];
    if (cumulative >= half) return predictions[k];
  }
  return predictions[order.back()];
}

EnsembleModel adaboost_fit(std::span<const SequencePair> train_pairs, int hidden, double lr, int count,
                           std::uint64_t seed, const TrainConfig& train_cfg) {
  if (train_pairs.empty()) throw DataError("boosting needs training pairs");
  std::vector<double> targets;
  std::vector<Sequence> sequences;
  for (const auto& p : train_pairs) {
    targets.push_back(p.target);
    sequences.push_back(p.sequence);
  }

  std::vector<BiLstmNetwork> trained;
  const auto round_fn = [&](std::span<const std::size_t> resample, int, std::uint64_t learner_seed) {
    std::vector<SequencePair> sample;
    sample.reserve(resample.size());
    for (auto idx : resample) sample.push_back(train_pairs[idx]);
    TrainConfig cfg = train_cfg;
    cfg.seed = learner_seed;
    try {
      trained.push_back(train_bilstm(sample, cfg, hidden, lr).network);
    } catch (const NumericalError&) {
      // A diverged learner scores maximal loss and is discarded by R2.
      trained.push_back(initial_network(sample, cfg, hidden));
      return std::vector<double>(targets.size(), std::numeric_limits<double>::infinity());
    }
    return bilstm_predict_all(trained.back(), sequences);
  };
  const BoostTrace trace = adaboost_r2(targets, count, seed, round_fn);

  EnsembleModel model;
  model.count = count;
  model.warnings = trace.warnings;
  for (std::size_t k = 0; k < trace.accepted_rounds.size(); ++k) {
    model.learners.push_back(trained[static_cast<std::size_t>(trace.accepted_rounds[k])]);
    model.learner_weights.push_back(trace.learner_weights[k]);
  }
  return model;
}

double ensemble_predict(const EnsembleModel& model, const Sequence& sequence) {
  if (model.learners.empty()) throw ConfigError("ensemble has no learners");
  std::vector<double> preds;
  preds.reserve(model.learners.size());
  for (const auto& net : model.learners) preds.push_back(bilstm_predict(net, sequence));
  return weighted_median(preds, model.learner_weights);
}

std::vector<double> ensemble_predict_all(const EnsembleModel& model, std::span<const Sequence> sequences) {
  if (model.learners.empty()) throw ConfigError("ensemble has no learners");
  std::vector<std::vector<double>> per_learner;
  for (const auto& net : model.learners) per_learner.push_back(bilstm_predict_all(net, sequences));
  std::vector<double> out(sequences.size());
  std::vector<double> preds(model.learners.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    for (std::size_t k = 0; k < preds.size(); ++k) preds[k] = per_learner[k][i];
    out[i] = weighted_median(preds, model.learner_weights);
  }
  return out;
}

void save_ensemble(const EnsembleModel& model, const std::filesystem::path& dir, const std::string& config_hash) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "icsoh-ensemble";
  manifest["version"] = 1;
  manifest["count"] = model.count;
  manifest["config_hash"] = config_hash;
  manifest["learner_weights"] = model.learner_weights;
  manifest["warnings"] = model.warnings;
  auto files = nlohmann::json::array();
  for (std::size_t k = 0; k < model.learners.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "learner_%02zu.json", k);
    csv::write_file_atomic(dir / name, network_to_json(model.learners[k]).dump() + "\n");
    files.push_back(name);
  }
  manifest["learners"] = files;
  csv::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

EnsembleModel load_ensemble(const std::filesystem::path& dir, std::string* config_hash) {
  const auto manifest = nlohmann::json::parse(csv::read_file(dir / "manifest.json"));
  if (manifest.value("format", "") != "icsoh-ensemble") throw DataError("not an ensemble manifest");
  EnsembleModel model;
  model.count = manifest.at("count").get<int>();
  model.learner_weights = manifest.at("learner_weights").get<std::vector<double>>();
  model.warnings = manifest.value("warnings", std::vector<std::string>{});
  for (const auto& file : manifest.at("learners")) {
    model.learners.push_back(
        network_from_json(nlohmann::json::parse(csv::read_file(dir / file.get<std::string>()))));
  }
  if (model.learners.size() != model.learner_weights.size()) {
    throw DataError("ensemble manifest: learner/weight count mismatch");
  }
  if (config_hash) *config_hash = manifest.value("config_hash", "");
  return model;
}

}  // namespace icsoh
