#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icsoh/bilstm.hpp"
#include "icsoh/trainer.hpp"

namespace icsoh {

struct PsoConfig {
  int population = 20;
  double c1 = 1.2;
  double c2 = 1.8;
  double inertia_start = 1.1;
  double inertia_end = 0.2;
  int max_iterations = 10;
  /// Velocity bound as a fraction of each axis range.
  double velocity_clamp = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  /// Inertia for a zero-based iteration, decreasing linearly.
  [[nodiscard]] double inertia_at(int iteration) const;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> pbest_position;
  double pbest_fitness = std::numeric_limits<double>::infinity();
};

struct SwarmEvaluation {
  int iteration = 0;
  int particle = 0;
  std::vector<double> position;
  double fitness = 0.0;
};

struct SwarmResult {
  std::vector<double> best_position;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<double> trace;  // global best fitness after each iteration
  std::vector<SwarmEvaluation> evaluations;
  std::vector<Particle> final_particles;
};

using BoxObjective = std::function<double(std::span<const double>)>;

/// Canonical global-best PSO on a box. Iteration 0 evaluates the initial
/// swarm; each later iteration applies
///   v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x),  x <- x + v
/// with velocities clamped to velocity_clamp * range and positions clamped
/// to the box. Each particle draws from its own random stream.
/// `initial` replaces the random initial swarm (positions and velocities).
SwarmResult minimize_box(const BoxObjective& objective, std::span<const double> lower,
                         std::span<const double> upper, const PsoConfig& cfg,
                         std::optional<std::vector<Particle>> initial = std::nullopt);

/// Hidden-unit count and learning-rate ranges; lr is searched in log10.
struct SearchSpace {
  int hidden_lo = 16;
  int hidden_hi = 128;
  double lr_lo = 1e-4;
  double lr_hi = 1e-1;

  void validate() const;
};

struct HyperEvaluation {
  int iteration = 0;
  int particle = 0;
  int hidden = 0;
  double lr = 0.0;
  double fitness = 0.0;
};

struct PsoResult {
  int best_hidden = 0;
  double best_lr = 0.0;
  double best_fitness = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  std::vector<HyperEvaluation> evaluations;
};

using HyperObjective = std::function<double(int hidden, double lr)>;

PsoResult pso_optimize(const HyperObjective& objective, const SearchSpace& space, const PsoConfig& cfg);

/// CSV: iteration,particle,hidden,lr,fitness.
std::string serialize_pso_trace_csv(const PsoResult& result);

/// Validation RMSE of a BiLSTM trained for `budget_epochs`; +inf when
/// training fails numerically.
double fitness_of_config(int hidden, double lr, std::span<const SequencePair> train_pairs,
                         std::span<const SequencePair> val_pairs, int budget_epochs,
                         const TrainConfig& base);

}  // namespace icsoh
