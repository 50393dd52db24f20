#pragma once

#include <cstdint>
#include <vector>

#include "icsoh/cycling_data.hpp"

namespace icsoh {

/// Deterministic synthetic CC/CV cycling data with a single-peak discharge
/// IC curve that drifts to lower voltage as capacity fades.
struct SynthConfig {
  int n_cycles = 900;
  double nominal_Ah = 1.1;
  double fade_linear = 0.00025;     // per-cycle fraction
  int fade_accel_onset = 600;       // cycle index where accelerated fade begins
  double fade_accel_rate = 0.0006;  // extra per-cycle fraction after onset
  int recovery_every = 0;           // 0 disables recovery bumps
  double recovery_magnitude = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // Electrical profile.
  double initial_soh = 1.0;
  double discharge_current_A = 1.0;
  double charge_current_A = 0.55;
  double cv_cutoff_current_A = 0.05;
  double charge_cutoff_V = 4.2;
  double discharge_cutoff_V = 2.7;
  double sample_period_s = 10.0;

  void validate() const;
};

/// Capacity trajectory in Ah, one entry per cycle.
std::vector<double> synth_capacity_trajectory(const SynthConfig& cfg);

/// Midpoint voltage of the discharge plateau (IC peak) for a given SOH.
double synth_peak_voltage(double soh);

CyclingDataset generate_dataset(const SynthConfig& cfg);

}  // namespace icsoh
