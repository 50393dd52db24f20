#include "icsoh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "icsoh/error.hpp"

namespace icsoh {

namespace {

constexpr double kLogisticShare = 0.6;  // fraction of capacity released around the plateau
constexpr double kTopOfDischargeV = 4.15;
constexpr double kRestS = 300.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Discharged fraction F(V) in [0, 1]; decreasing in V, F(top) = 0, F(cut) = 1.
struct DischargeShape {
  double mid_V;
  double width_V;
  double top_V;
  double cut_V;

  [[nodiscard]] double fraction(double v) const {
    const double lo = logistic((mid_V - top_V) / width_V);
    const double hi = logistic((mid_V - cut_V) / width_V);
    const double plateau = (logistic((mid_V - v) / width_V) - lo) / (hi - lo);
    const double linear = (top_V - v) / (top_V - cut_V);
    return kLogisticShare * plateau + (1.0 - kLogisticShare) * linear;
  }

  [[nodiscard]] double voltage_at(double target) const {
    double lo = cut_V, hi = top_V;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (fraction(mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }
};

double plateau_width(double soh) { return 0.05 + 0.06 * std::max(0.0, 1.0 - soh); }

// Appends samples over [start, start + duration] (endpoint included) and
// returns the time of the last sample.
template <class Fn>
double emit_segment(std::vector<Sample>& out, double start, double duration, double period, StepKind kind,
                    Fn&& profile) {
  const auto steps = static_cast<long long>(std::floor(duration / period));
  for (long long j = 0; j <= steps; ++j) {
    const double local = static_cast<double>(j) * period;
    if (duration - local < 1e-9 * std::max(1.0, duration) && j > 0) break;
    const auto [current, voltage] = profile(local);
    out.push_back({start + local, current, voltage, kind});
  }
  const auto [current, voltage] = profile(duration);
  out.push_back({start + duration, current, voltage, kind});
  return start + duration;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_cycles < 20) throw ConfigError("synthetic data needs at least 20 cycles");
  if (!(nominal_Ah > 0.0)) throw ConfigError("nominal capacity must be positive");
  for (double f : {fade_linear, fade_accel_rate, recovery_magnitude, noise_sigma}) {
    if (!(f >= 0.0 && f <= 0.05)) throw ConfigError("synthetic fade/recovery/noise fractions must lie in [0, 0.05]");
  }
  // An onset past the last cycle simply means no accelerated fade.
  if (fade_accel_onset < 0) throw ConfigError("fade_accel_onset must be non-negative");
  if (recovery_every < 0) throw ConfigError("recovery_every must be non-negative");
  if (!(discharge_current_A > 0.0 && charge_current_A > cv_cutoff_current_A && cv_cutoff_current_A > 0.0)) {
    throw ConfigError("synthetic currents must satisfy charge > cv cutoff > 0 and discharge > 0");
  }
  if (!(sample_period_s > 0.0)) throw ConfigError("sample period must be positive");
}

std::vector<double> synth_capacity_trajectory(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> cap(static_cast<std::size_t>(cfg.n_cycles));
  for (int k = 0; k < cfg.n_cycles; ++k) {
    double c = cfg.nominal_Ah * cfg.initial_soh * std::pow(1.0 - cfg.fade_linear, k);
    if (k > cfg.fade_accel_onset) c *= std::pow(1.0 - cfg.fade_accel_rate, k - cfg.fade_accel_onset);
    if (cfg.recovery_every > 0 && k >= cfg.recovery_every) {
      c *= 1.0 + cfg.recovery_magnitude * std::exp(-static_cast<double>(k % cfg.recovery_every) / 5.0);
    }
    const double eps = gauss(rng);
    if (cfg.noise_sigma > 0.0) c *= 1.0 + cfg.noise_sigma * eps;
    cap[static_cast<std::size_t>(k)] = c;
  }
  return cap;
}

double synth_peak_voltage(double soh) { return 3.86 - 0.5 * std::max(0.0, 1.0 - soh); }

CyclingDataset generate_dataset(const SynthConfig& cfg) {
  const auto capacity = synth_capacity_trajectory(cfg);
  std::vector<CycleRecord> cycles;
  cycles.reserve(capacity.size());
  double clock = 0.0;
  const double slow_period = 3.0 * cfg.sample_period_s;

  for (std::size_t k = 0; k < capacity.size(); ++k) {
    const double cap = capacity[k];
    const double soh = cap / cfg.nominal_Ah;
    CycleRecord cycle;
    cycle.cycle_index = static_cast<int>(k) + 1;
    auto& s = cycle.samples;
    const double relaxed_V = cfg.discharge_cutoff_V + 0.3;

    // Rest, then CC charge up to the cut-off voltage.
    clock = emit_segment(s, clock, 60.0, 60.0, StepKind::Rest,
                         [&](double) { return std::pair{0.0, relaxed_V}; }) + slow_period;
    const double cc_share = std::clamp(0.85 - 0.3 * (1.0 - soh), 0.3, 0.95);
    const double cc_time = cc_share * cap * 3600.0 / cfg.charge_current_A;
    clock = emit_segment(s, clock, cc_time, slow_period, StepKind::CcCharge, [&](double t) {
              const double u = t / cc_time;
              return std::pair{cfg.charge_current_A, relaxed_V + (cfg.charge_cutoff_V - relaxed_V) * std::sqrt(u)};
            }) + slow_period;

    // CV hold with exponentially decaying current.
    const double cv_charge_As = (1.0 - cc_share) * cap * 3600.0;
    const double ratio = cfg.cv_cutoff_current_A / cfg.charge_current_A;
    const double tau = cv_charge_As / (cfg.charge_current_A * (1.0 - ratio));
    const double cv_time = tau * std::log(1.0 / ratio);
    clock = emit_segment(s, clock, cv_time, slow_period, StepKind::CvCharge, [&](double t) {
              return std::pair{cfg.charge_current_A * std::exp(-t / tau), cfg.charge_cutoff_V};
            }) + slow_period;

    clock = emit_segment(s, clock, kRestS, 60.0, StepKind::Rest, [&](double) {
              return std::pair{0.0, kTopOfDischargeV + 0.02};
            }) + cfg.sample_period_s;

    // Constant-current discharge following the shape's V(q).
    const DischargeShape shape{synth_peak_voltage(soh), plateau_width(soh), kTopOfDischargeV,
                               cfg.discharge_cutoff_V};
    const double dis_time = cap * 3600.0 / cfg.discharge_current_A;
    clock = emit_segment(s, clock, dis_time, cfg.sample_period_s, StepKind::CcDischarge, [&](double t) {
              const double frac = std::clamp(t / dis_time, 0.0, 1.0);
              return std::pair{-cfg.discharge_current_A, shape.voltage_at(frac)};
            }) + 60.0;
    cycles.push_back(std::move(cycle));
  }

  IngestOptions options;
  options.battery_id = "synthetic";
  options.nominal_capacity_Ah = cfg.nominal_Ah;
  options.inference.charge_cutoff_V = cfg.charge_cutoff_V;
  CyclingDataset ds = build_dataset(std::move(cycles), options);
  if (ds.cycles.size() != capacity.size()) throw DataError("synthetic generator produced implausible cycles");
  return ds;
}

}  // namespace icsoh
