#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icsoh/ic_analysis.hpp"

namespace icsoh {

struct AreaConfig {
  double upper_offset_V = 0.42;
  double lower_offset_V = -0.38;
};

/// Fixed-voltage pair for the IC difference indicator. The defaults are the
/// 3.70 V / 3.10 V pair; the other candidate pairs are listed in
/// kIcDifferenceCandidates.
struct DiffConfig {
  double position3_V = 3.70;
  double position2_V = 3.10;
};

inline constexpr std::array<DiffConfig, 6> kIcDifferenceCandidates{{
    {3.90, 3.40},
    {3.80, 3.20},
    {3.74, 3.16},
    {3.70, 3.10},
    {3.68, 3.12},
    {3.52, 3.48},
}};

/// The 13 IC-derived indicators of one cycle.
struct HiVector {
  int cycle_index = 0;
  double area = 0.0;  // Ah
  double a4 = 0.0;    // Ah/V
  double cf = 0.0;
  double pf = 0.0;
  double mf = 0.0;
  double wf = 0.0;
  double kur = 0.0;
  double dmv = 0.0;  // Ah/V
  double p = 0.0;    // Ah/V
  double mps = 0.0;  // Ah/V^2
  double ppv = 0.0;  // Ah/V^2
  double arc = 0.0;  // Ah/V^2
  double pcv = 0.0;  // V

  static constexpr std::size_t kCount = 13;
  static const std::array<std::string_view, kCount>& names();
  [[nodiscard]] std::array<double, kCount> values() const;
};

struct DimensionlessHis {
  double cf = 0.0;
  double pf = 0.0;
  double mf = 0.0;
  double wf = 0.0;
  double kur = 0.0;
};

struct ShapeHis {
  double dmv = 0.0;
  double p = 0.0;
  double mps = 0.0;
  double ppv = 0.0;
  double arc = 0.0;
  double pcv = 0.0;
};

/// Trapezoidal integral of the IC curve over
/// [position1 + lower_offset, position1 + upper_offset], clipped to the
/// curve's voltage span. Values are held constant across the outer half
/// cells, so integrating the whole span recovers sum(ic) * step.
double area_hi(const IcCurve& curve, double position1_V, const AreaConfig& cfg = {});

/// Linearly interpolated IC value at `voltage_V`.
double interpolate_ic(const IcCurve& curve, double voltage_V);

double ic_difference(const IcCurve& curve, const DiffConfig& cfg = {});

DimensionlessHis dimensionless_his(std::span<const double> ic_values);

ShapeHis shape_his(const IcCurve& curve, const IcCurve& first_cycle_curve);

/// Sample Pearson correlation coefficient.
double pearson(std::span<const double> x, std::span<const double> y);

struct IndicatorSettings {
  AreaConfig area;
  DiffConfig diff;
  double peak_search_lo_V = 3.6;
  double peak_search_hi_V = 4.0;
};

/// All 13 indicators of a smoothed curve. `first_cycle_curve` anchors DMV.
HiVector compute_his(const IcCurve& smoothed, const IcCurve& first_cycle_curve,
                     const IndicatorSettings& settings = {});

inline const std::vector<std::string> kDefaultDropList{"mps", "pf", "cf", "kur"};

struct FeatureSelection {
  std::vector<std::string> columns;  // kept indicator names, canonical order
  Eigen::MatrixXd matrix;            // cycles x columns
  std::vector<std::pair<std::string, double>> pearson_vs_capacity;  // all 13
};

FeatureSelection select_features(std::span<const HiVector> his, std::span<const double> capacity,
                                 const std::vector<std::string>& drop_list = kDefaultDropList);

}  // namespace icsoh
