#pragma once

#include <span>
#include <string>
#include <vector>

#include "icsoh/cycling_data.hpp"

namespace icsoh {

/// Discharge incremental-capacity curve on a uniform voltage grid.
///
/// The gridded voltage span [lo, lo + n*step] is split into n cells; entry j
/// holds |dQ/dV| over cell j and is located at the cell centre, so
/// sum(ic) * step equals the charge discharged across the span.
struct IcCurve {
  int cycle_index = 0;
  double grid_step_V = 0.0;
  std::vector<double> voltage_grid_V;  // ascending cell centres
  std::vector<double> ic_AhPerV;

  [[nodiscard]] std::size_t size() const { return ic_AhPerV.size(); }
  [[nodiscard]] double span_lo_V() const { return voltage_grid_V.front() - 0.5 * grid_step_V; }
  [[nodiscard]] double span_hi_V() const { return voltage_grid_V.back() + 0.5 * grid_step_V; }
};

struct SgConfig {
  int window = 9;
  int poly_order = 3;

  void validate() const;
};

inline constexpr double kDefaultGridStepV = 0.005;

/// Differentiates cumulative discharged capacity against a monotone
/// (running-minimum) voltage envelope on a grid anchored at multiples of
/// `grid_step_V`.
IcCurve compute_ic_curve(const CycleRecord& cycle, double grid_step_V = kDefaultGridStepV);

/// Least-squares polynomial smoothing evaluated at each window centre.
/// The first and last (window-1)/2 points are evaluated on the polynomial
/// fitted to the first/last full window.
std::vector<double> savitzky_golay_smooth(std::span<const double> values, const SgConfig& cfg = {});

/// Convolution weights of the centre-point smoother (length = window).
std::vector<double> savitzky_golay_coefficients(const SgConfig& cfg);

/// Returns a copy of `curve` with smoothed IC values.
IcCurve smooth_curve(const IcCurve& curve, const SgConfig& cfg = {});

struct Peak {
  double position_V = 0.0;
  double value_AhPerV = 0.0;
};

/// Global maximum of the curve inside [search_lo_V, search_hi_V]; ties go to
/// the lower voltage.
Peak detect_peak(const IcCurve& curve, double search_lo_V = 3.6, double search_hi_V = 4.0);

/// Long-format dump: cycle,voltage_V,ic_AhPerV.
std::string serialize_ic_curves_csv(std::span<const IcCurve> curves);

}  // namespace icsoh
