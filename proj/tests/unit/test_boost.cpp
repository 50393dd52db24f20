#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "icsoh/boost.hpp"
#include "icsoh/error.hpp"

using namespace icsoh;

namespace {

BoostRoundFn constant_stubs(std::vector<double> constants, std::size_t n) {
  return [constants, n](std::span<const std::size_t> resample, int round, std::uint64_t) {
    CHECK(resample.size() == n);
    for (auto idx : resample) CHECK(idx < n);
    return std::vector<double>(n, constants.at(static_cast<std::size_t>(round)));
  };
}

std::vector<SequencePair> pairs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<SequencePair> out;
  for (int i = 0; i < n; ++i) {
    Sequence s(3, 2);
    for (int t = 0; t < 3; ++t) {
      s(t, 0) = u(rng);
      s(t, 1) = u(rng);
    }
    out.push_back({s, 0.8 + 0.1 * s(2, 1)});
  }
  return out;
}

}  // namespace

TEST_CASE("r2: a round with average loss 1/4") {
  const std::vector<double> t{1, 1, 1, 1.4};
  const auto trace = adaboost_r2(t, 1, 0, constant_stubs({1.0}, 4));
  REQUIRE(trace.rounds.size() == 1);
  const auto& r = trace.rounds[0];
  CHECK(r.accepted);
  CHECK(std::abs(r.average_loss - 0.25) < 1e-12);
  CHECK(std::abs(r.beta - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(r.learner_weight - std::log(3.0)) < 1e-12);
  const double expected[] = {1.0 / 6, 1.0 / 6, 1.0 / 6, 0.5};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(r.sample_weights_after[i] - expected[i]) < 1e-12);
}

TEST_CASE("r2: hand-executed schedule with constant stubs") {
  // Targets 0,1,2,4. Stubs predict 1, 1, then 2.5.
  const std::vector<double> t{0, 1, 2, 4};
  const auto trace = adaboost_r2(t, 5, 17, constant_stubs({1.0, 1.0, 2.5, 0.0, 0.0}, 4));

  // Rounds 0 and 1: errors 1,0,1,3 so losses 1/3, 0, 1/3, 1.
  const double l[] = {1.0 / 3, 0.0, 1.0 / 3, 1.0};
  double w[] = {0.25, 0.25, 0.25, 0.25};
  double betas[2], averages[2];
  for (int round = 0; round < 2; ++round) {
    double avg = 0.0;
    for (int i = 0; i < 4; ++i) avg += w[i] * l[i];
    const double beta = avg / (1.0 - avg);
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
      w[i] *= std::pow(beta, 1.0 - l[i]);
      total += w[i];
    }
    for (double& x : w) x /= total;
    averages[round] = avg;
    betas[round] = beta;
  }
  CHECK(averages[0] == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
  CHECK(betas[0] == doctest::Approx(5.0 / 7.0).epsilon(1e-15));

  REQUIRE(trace.rounds.size() == 3);
  for (int round = 0; round < 2; ++round) {
    const auto& r = trace.rounds[round];
    CHECK(r.accepted);
    CHECK(std::abs(r.average_loss - averages[round]) < 1e-12);
    CHECK(std::abs(r.beta - betas[round]) < 1e-12);
    CHECK(std::abs(r.learner_weight - std::log(1.0 / betas[round])) < 1e-12);
  }
  for (int i = 0; i < 4; ++i) CHECK(std::abs(trace.rounds[1].sample_weights_after[i] - w[i]) < 1e-12);

  // Round 2: errors 2.5, 1.5, 0.5, 1.5, losses 1, 0.6, 0.2, 0.6. Symmetric
  // weights (w0 = w2) give an average of exactly 0.6, so it is discarded.
  const auto& last = trace.rounds[2];
  CHECK_FALSE(last.accepted);
  CHECK(std::abs(last.average_loss - 0.6) < 1e-12);
  CHECK(trace.accepted_rounds == std::vector<int>{0, 1});
  REQUIRE(trace.learner_weights.size() == 2);
  CHECK(std::abs(trace.learner_weights[1] - std::log(1.0 / betas[1])) < 1e-12);
  CHECK_FALSE(trace.fallback);
}

TEST_CASE("r2: sample weights stay normalized and positive") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(30);
  for (auto& x : t) x = u(rng);
  const auto noisy = [&](std::span<const std::size_t>, int, std::uint64_t) {
    std::vector<double> p(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = t[i] + 0.1 * (u(rng) - 0.5);
    return p;
  };
  const auto trace = adaboost_r2(t, 10, 3, noisy);
  for (const auto& r : trace.rounds) {
    const double sum = std::accumulate(r.sample_weights_after.begin(), r.sample_weights_after.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (double w : r.sample_weights_after) CHECK(w > 0.0);
  }
  for (double w : trace.learner_weights) {
    CHECK(std::isfinite(w));
    CHECK(w > 0.0);
  }
}

TEST_CASE("r2: perfect learner stops, hopeless learners fall back") {
  const std::vector<double> t{0.5, 0.7, 0.9};
  const auto perfect = adaboost_r2(t, 10, 0, [&](std::span<const std::size_t>, int, std::uint64_t) { return t; });
  CHECK(perfect.rounds.size() == 1);
  CHECK(perfect.learner_weights == std::vector<double>{kPerfectLearnerWeight});

  const auto bad = adaboost_r2(t, 10, 0, constant_stubs(std::vector<double>(10, 0.9), 3));
  CHECK(bad.rounds.size() == 1);
  CHECK(bad.fallback);
  CHECK(bad.accepted_rounds == std::vector<int>{0});
  CHECK_FALSE(bad.warnings.empty());

  CHECK_THROWS_AS(adaboost_r2(t, 0, 0, constant_stubs({1.0}, 3)), ConfigError);
}

TEST_CASE("weighted median: hand cases") {
  const std::vector<double> p3{0.9, 0.7, 0.8}, eq{1, 1, 1};
  CHECK(weighted_median(p3, eq) == 0.8);
  const std::vector<double> p2{0.7, 0.9}, w2{10, 0.1};
  CHECK(weighted_median(p2, w2) == 0.7);
  const std::vector<double> same{0.42, 0.42, 0.42}, w3{0.1, 2, 5};
  CHECK(weighted_median(same, w3) == 0.42);
  CHECK_THROWS_AS(weighted_median(std::vector<double>{}, std::vector<double>{}), ConfigError);
}

TEST_CASE("weighted median: bounds and permutation invariance on random ensembles") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + trial % 10;
    std::vector<double> p(k), w(k);
    for (int i = 0; i < k; ++i) {
      p[i] = u(rng);
      w[i] = 0.01 + u(rng);
    }
    const double m = weighted_median(p, w);
    CHECK(m >= *std::min_element(p.begin(), p.end()));
    CHECK(m <= *std::max_element(p.begin(), p.end()));
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> pp(k), ww(k);
    for (int i = 0; i < k; ++i) {
      pp[i] = p[order[i]];
      ww[i] = w[order[i]];
    }
    CHECK(weighted_median(pp, ww) == m);
  }
}

TEST_CASE("ensemble: one learner equals that learner") {
  const auto data = pairs(30, 5);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  const auto model = adaboost_fit(data, 4, 0.01, 1, 8, cfg);
  REQUIRE(model.learners.size() == 1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Sequence> inputs;
  for (int i = 0; i < 100; ++i) {
    Sequence s(3, 2);
    for (int r = 0; r < 3; ++r) s.row(r) << u(rng), u(rng);
    inputs.push_back(s);
  }
  const auto ens = ensemble_predict_all(model, inputs);
  const auto single = bilstm_predict_all(model.learners[0], inputs);
  CHECK(ens == single);
  CHECK(ensemble_predict(model, inputs[3]) == bilstm_predict(model.learners[0], inputs[3]));
}

TEST_CASE("ensemble: identical learners and persistence") {
  EnsembleModel m;
  auto net = BiLstmNetwork::initialize(2, 3, 2);
  net.head_bias = 0.6;
  m.learners = {net, net, net};
  m.learner_weights = {0.5, 1.0, 2.0};
  m.count = 3;
  Sequence s = Sequence::Constant(3, 2, 0.25);
  CHECK(ensemble_predict(m, s) == bilstm_predict(net, s));

  const auto dir = std::filesystem::temp_directory_path() / "icsoh_unit_ensemble";
  std::filesystem::remove_all(dir);
  save_ensemble(m, dir, "abc123");
  std::string hash;
  const auto back = load_ensemble(dir, &hash);
  CHECK(hash == "abc123");
  CHECK(back.learner_weights == m.learner_weights);
  REQUIRE(back.learners.size() == 3);
  CHECK(back.learners[1] == net);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_ensemble(dir), DataError);
  CHECK_THROWS_AS(ensemble_predict(EnsembleModel{}, s), ConfigError);
}

TEST_CASE("ensemble: fit is deterministic and weights are positive") {
  const auto data = pairs(25, 9);
  TrainConfig cfg;
  cfg.max_epochs = 4;
  const auto a = adaboost_fit(data, 3, 0.02, 4, 11, cfg);
  const auto b = adaboost_fit(data, 3, 0.02, 4, 11, cfg);
  CHECK(a.learner_weights == b.learner_weights);
  CHECK(a.learners.size() == a.learner_weights.size());
  for (std::size_t k = 0; k < a.learners.size(); ++k) CHECK(a.learners[k] == b.learners[k]);
  for (double w : a.learner_weights) CHECK(w > 0.0);
}
