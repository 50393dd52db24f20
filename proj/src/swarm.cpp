#include "icsoh/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"

namespace icsoh {

void PsoConfig::validate() const {
  if (population < 1) throw ConfigError("PSO population must be at least 1");
  if (max_iterations < 1) throw ConfigError("PSO needs at least one iteration");
  if (!(c1 >= 0.0 && c2 >= 0.0)) throw ConfigError("PSO acceleration constants must be non-negative");
  if (!(inertia_start >= inertia_end && inertia_end > 0.0)) {
    throw ConfigError("PSO inertia must satisfy start >= end > 0");
  }
  if (!(velocity_clamp > 0.0)) throw ConfigError("PSO velocity clamp must be positive");
}

double PsoConfig::inertia_at(int iteration) const {
  if (max_iterations <= 1) return inertia_start;
  const double t = static_cast<double>(iteration) / static_cast<double>(max_iterations - 1);
  return inertia_start - (inertia_start - inertia_end) * std::clamp(t, 0.0, 1.0);
}

SwarmResult minimize_box(const BoxObjective& objective, std::span<const double> lower,
                         std::span<const double> upper, const PsoConfig& cfg,
                         std::optional<std::vector<Particle>> initial) {
  cfg.validate();
  const std::size_t dims = lower.size();
  if (upper.size() != dims || dims == 0) throw ConfigError("PSO bounds must be non-empty and matched");
  std::vector<double> vmax(dims);
  bool degenerate = true;
  for (std::size_t k = 0; k < dims; ++k) {
    if (upper[k] < lower[k]) throw ConfigError("PSO bound lower > upper");
    vmax[k] = cfg.velocity_clamp * (upper[k] - lower[k]);
    degenerate = degenerate && upper[k] == lower[k];
  }

  const auto eval = [&](std::span<const double> x) {
    const double f = objective(x);
    return std::isnan(f) ? std::numeric_limits<double>::infinity() : f;
  };

  SwarmResult result;
  if (degenerate) {
    result.best_position.assign(lower.begin(), lower.end());
    result.best_fitness = eval(result.best_position);
    result.trace.push_back(result.best_fitness);
    result.evaluations.push_back({0, 0, result.best_position, result.best_fitness});
    return result;
  }

  const auto pop = initial ? initial->size() : static_cast<std::size_t>(cfg.population);
  std::vector<std::mt19937_64> streams;
  streams.reserve(pop);
  for (std::size_t p = 0; p < pop; ++p) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(p)};
    streams.emplace_back(seq);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Particle> swarm;
  if (initial) {
    swarm = std::move(*initial);
    for (auto& particle : swarm) {
      if (particle.position.size() != dims || particle.velocity.size() != dims) {
        throw ConfigError("initial particle dimension mismatch");
      }
    }
  } else {
    swarm.resize(pop);
    for (std::size_t p = 0; p < pop; ++p) {
      auto& rng = streams[p];
      auto& particle = swarm[p];
      particle.position.resize(dims);
      particle.velocity.resize(dims);
      for (std::size_t k = 0; k < dims; ++k) {
        particle.position[k] = lower[k] + unit(rng) * (upper[k] - lower[k]);
        particle.velocity[k] = (2.0 * unit(rng) - 1.0) * vmax[k];
      }
    }
  }

  std::vector<double> gbest;
  double gbest_fitness = std::numeric_limits<double>::infinity();
  const auto evaluate_swarm = [&](int iteration) {
    for (std::size_t p = 0; p < swarm.size(); ++p) {
      auto& particle = swarm[p];
      const double f = eval(particle.position);
      result.evaluations.push_back({iteration, static_cast<int>(p), particle.position, f});
      if (particle.pbest_position.empty() || f < particle.pbest_fitness) {
        particle.pbest_fitness = f;
        particle.pbest_position = particle.position;
      }
    }
    for (const auto& particle : swarm) {
      if (gbest.empty() || particle.pbest_fitness < gbest_fitness) {
        gbest_fitness = particle.pbest_fitness;
        gbest = particle.pbest_position;
      }
    }
    result.trace.push_back(gbest_fitness);
  };

  evaluate_swarm(0);
  for (int it = 1; it < cfg.max_iterations; ++it) {
    const double w = cfg.inertia_at(it);
    for (std::size_t p = 0; p < swarm.size(); ++p) {
      auto& particle = swarm[p];
      auto& rng = streams[p % streams.size()];
      for (std::size_t k = 0; k < dims; ++k) {
        const double r1 = unit(rng), r2 = unit(rng);
        double v = w * particle.velocity[k] +
                   cfg.c1 * r1 * (particle.pbest_position[k] - particle.position[k]) +
                   cfg.c2 * r2 * (gbest[k] - particle.position[k]);
        v = std::clamp(v, -vmax[k], vmax[k]);
        particle.velocity[k] = v;
        particle.position[k] = std::clamp(particle.position[k] + v, lower[k], upper[k]);
      }
    }
    evaluate_swarm(it);
  }

  result.best_position = gbest;
  result.best_fitness = gbest_fitness;
  result.final_particles = std::move(swarm);
  return result;
}

void SearchSpace::validate() const {
  if (hidden_lo < 1 || hidden_hi < hidden_lo) throw ConfigError("hidden-unit range must satisfy 1 <= lo <= hi");
  if (!(lr_lo > 0.0 && lr_hi >= lr_lo)) throw ConfigError("learning-rate range must satisfy 0 < lo <= hi");
}

PsoResult pso_optimize(const HyperObjective& objective, const SearchSpace& space, const PsoConfig& cfg) {
  space.validate();
  const std::vector<double> lower{static_cast<double>(space.hidden_lo), std::log10(space.lr_lo)};
  const std::vector<double> upper{static_cast<double>(space.hidden_hi), std::log10(space.lr_hi)};
  const auto decode_hidden = [&](double x) {
    return std::clamp(static_cast<int>(std::lround(x)), space.hidden_lo, space.hidden_hi);
  };
  const auto decode_lr = [&](double x) { return std::clamp(std::pow(10.0, x), space.lr_lo, space.lr_hi); };

  const SwarmResult swarm = minimize_box(
      [&](std::span<const double> x) { return objective(decode_hidden(x[0]), decode_lr(x[1])); }, lower,
      upper, cfg);

  PsoResult out;
  out.best_hidden = decode_hidden(swarm.best_position[0]);
  out.best_lr = decode_lr(swarm.best_position[1]);
  out.best_fitness = swarm.best_fitness;
  out.trace = swarm.trace;
  for (const auto& e : swarm.evaluations) {
    out.evaluations.push_back({e.iteration, e.particle, decode_hidden(e.position[0]), decode_lr(e.position[1]),
                               e.fitness});
  }
  return out;
}

std::string serialize_pso_trace_csv(const PsoResult& result) {
  std::string out = "iteration,particle,hidden,lr,fitness\n";
  for (const auto& e : result.evaluations) {
    out += std::to_string(e.iteration) + ',' + std::to_string(e.particle) + ',' + std::to_string(e.hidden) +
           ',' + csv::format_double(e.lr) + ',' + csv::format_double(e.fitness) + '\n';
  }
  return out;
}

double fitness_of_config(int hidden, double lr, std::span<const SequencePair> train_pairs,
                         std::span<const SequencePair> val_pairs, int budget_epochs,
                         const TrainConfig& base) {
  if (val_pairs.empty()) throw DataError("fitness needs a non-empty validation set");
  TrainConfig cfg = base;
  cfg.max_epochs = budget_epochs;
  try {
    const TrainResult trained = train_bilstm(train_pairs, cfg, hidden, lr);
    double sq = 0.0;
    for (const auto& pair : val_pairs) {
      const double e = bilstm_predict(trained.network, pair.sequence) - pair.target;
      sq += e * e;
    }
    const double rmse = std::sqrt(sq / static_cast<double>(val_pairs.size()));
    return std::isfinite(rmse) ? rmse : std::numeric_limits<double>::infinity();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace icsoh
