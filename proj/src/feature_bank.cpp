#include "icsoh/feature_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"

namespace icsoh {

namespace {

void require_curve(const IcCurve& curve) {
  if (curve.size() < 2 || curve.voltage_grid_V.size() != curve.size()) {
    throw DataError("IC curve needs at least two grid points");
  }
}

}  // namespace

const std::array<std::string_view, HiVector::kCount>& HiVector::names() {
  static const std::array<std::string_view, kCount> kNames{
      "area", "a4", "cf", "pf", "mf", "wf", "kur", "dmv", "p", "mps", "ppv", "arc", "pcv"};
  return kNames;
}

std::array<double, HiVector::kCount> HiVector::values() const {
  return {area, a4, cf, pf, mf, wf, kur, dmv, p, mps, ppv, arc, pcv};
}

double area_hi(const IcCurve& curve, double position1_V, const AreaConfig& cfg) {
  require_curve(curve);
  if (!(cfg.upper_offset_V > cfg.lower_offset_V)) {
    throw ConfigError("area upper offset must exceed the lower offset");
  }
  const double lo = std::max(position1_V + cfg.lower_offset_V, curve.span_lo_V());
  const double hi = std::min(position1_V + cfg.upper_offset_V, curve.span_hi_V());
  if (!(hi > lo)) throw DataError("area bounds do not overlap the IC curve");

  // Piecewise-linear profile including the flat outer half cells.
  std::vector<double> xs, ys;
  xs.reserve(curve.size() + 2);
  ys.reserve(curve.size() + 2);
  xs.push_back(curve.span_lo_V());
  ys.push_back(curve.ic_AhPerV.front());
  xs.insert(xs.end(), curve.voltage_grid_V.begin(), curve.voltage_grid_V.end());
  ys.insert(ys.end(), curve.ic_AhPerV.begin(), curve.ic_AhPerV.end());
  xs.push_back(curve.span_hi_V());
  ys.push_back(curve.ic_AhPerV.back());

  double total = 0.0;
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double x0 = xs[j], x1 = xs[j + 1];
    const double a = std::max(x0, lo), b = std::min(x1, hi);
    if (!(b > a) || !(x1 > x0)) continue;
    const double slope = (ys[j + 1] - ys[j]) / (x1 - x0);
    const double ya = ys[j] + slope * (a - x0);
    const double yb = ys[j] + slope * (b - x0);
    total += 0.5 * (ya + yb) * (b - a);
  }
  return total;
}

double interpolate_ic(const IcCurve& curve, double voltage_V) {
  require_curve(curve);
  const auto& g = curve.voltage_grid_V;
  const double tol = 1e-9;
  if (voltage_V < g.front() - tol || voltage_V > g.back() + tol) {
    throw DataError("voltage " + csv::format_double(voltage_V) + " V outside the IC grid span");
  }
  const double v = std::clamp(voltage_V, g.front(), g.back());
  auto it = std::upper_bound(g.begin(), g.end(), v);
  if (it == g.end()) return curve.ic_AhPerV.back();
  const auto j = static_cast<std::size_t>(it - g.begin());
  if (j == 0) return curve.ic_AhPerV.front();
  const double t = (v - g[j - 1]) / (g[j] - g[j - 1]);
  return curve.ic_AhPerV[j - 1] + t * (curve.ic_AhPerV[j] - curve.ic_AhPerV[j - 1]);
}

double ic_difference(const IcCurve& curve, const DiffConfig& cfg) {
  return interpolate_ic(curve, cfg.position3_V) - interpolate_ic(curve, cfg.position2_V);
}

DimensionlessHis dimensionless_his(std::span<const double> a) {
  if (a.empty()) throw DataError("dimensionless indicators need a non-empty sequence");
  const auto n = static_cast<double>(a.size());
  double peak = 0.0, sum_abs = 0.0, sum_sqrt = 0.0, sum_sq = 0.0, sum_4 = 0.0;
  for (double v : a) {
    const double m = std::abs(v);
    peak = std::max(peak, m);
    sum_abs += m;
    sum_sqrt += std::sqrt(m);
    sum_sq += v * v;
    sum_4 += v * v * v * v;
  }
  if (peak == 0.0) throw DataError("dimensionless indicators undefined for an all-zero sequence");
  const double rms = std::sqrt(sum_sq / n);
  const double mean_abs = sum_abs / n;
  const double mean_sqrt = sum_sqrt / n;
  const double mean_sq = sum_sq / n;
  DimensionlessHis out;
  out.cf = peak / rms;
  out.pf = peak / mean_abs;
  out.mf = peak / (mean_sqrt * mean_sqrt);
  out.wf = rms / mean_abs;
  out.kur = (sum_4 / n) / (mean_sq * mean_sq) - 3.0;
  return out;
}

ShapeHis shape_his(const IcCurve& curve, const IcCurve& first_cycle_curve) {
  if (curve.size() == 0 || first_cycle_curve.size() == 0) {
    throw DataError("shape indicators need non-empty curves");
  }
  const auto& ic = curve.ic_AhPerV;
  ShapeHis out;
  std::size_t arg = 0;
  for (std::size_t j = 1; j < ic.size(); ++j) {
    if (ic[j] > ic[arg]) arg = j;
  }
  out.p = ic[arg];
  out.pcv = curve.voltage_grid_V[arg];
  out.ppv = out.p / out.pcv;

  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.dmv = mean(ic) - mean(first_cycle_curve.ic_AhPerV);

  if (ic.size() >= 2) {
    double max_slope = -std::numeric_limits<double>::infinity();
    double sum_abs_slope = 0.0;
    for (std::size_t j = 0; j + 1 < ic.size(); ++j) {
      const double slope = (ic[j + 1] - ic[j]) / curve.grid_step_V;
      max_slope = std::max(max_slope, slope);
      sum_abs_slope += std::abs(slope);
    }
    out.mps = max_slope;
    out.arc = sum_abs_slope / static_cast<double>(ic.size() - 1);
  }
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  if (x.size() < 3) throw DataError("pearson: need at least 3 samples");
  // Extended-precision sums so that collinear data rounds to exactly +-1.
  using Wide = long double;
  const auto n = static_cast<Wide>(x.size());
  const Wide mx = std::accumulate(x.begin(), x.end(), Wide{0}) / n;
  const Wide my = std::accumulate(y.begin(), y.end(), Wide{0}) / n;
  Wide sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Wide dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw DataError("pearson: zero variance");
  return std::clamp(static_cast<double>(sxy / std::sqrt(sxx * syy)), -1.0, 1.0);
}

HiVector compute_his(const IcCurve& smoothed, const IcCurve& first_cycle_curve,
                     const IndicatorSettings& settings) {
  HiVector h;
  h.cycle_index = smoothed.cycle_index;
  const Peak peak = detect_peak(smoothed, settings.peak_search_lo_V, settings.peak_search_hi_V);
  h.area = area_hi(smoothed, peak.position_V, settings.area);
  h.a4 = ic_difference(smoothed, settings.diff);
  const auto dl = dimensionless_his(smoothed.ic_AhPerV);
  h.cf = dl.cf;
  h.pf = dl.pf;
  h.mf = dl.mf;
  h.wf = dl.wf;
  h.kur = dl.kur;
  const auto sh = shape_his(smoothed, first_cycle_curve);
  h.dmv = sh.dmv;
  h.p = sh.p;
  h.mps = sh.mps;
  h.ppv = sh.ppv;
  h.arc = sh.arc;
  h.pcv = sh.pcv;
  return h;
}

FeatureSelection select_features(std::span<const HiVector> his, std::span<const double> capacity,
                                 const std::vector<std::string>& drop_list) {
  const auto& names = HiVector::names();
  for (const auto& d : drop_list) {
    if (std::find(names.begin(), names.end(), d) == names.end()) {
      throw ConfigError("unknown feature name in drop list: " + d);
    }
  }
  if (his.size() != capacity.size()) throw DataError("select_features: length mismatch");

  FeatureSelection out;
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (std::find(drop_list.begin(), drop_list.end(), names[k]) == drop_list.end()) {
      kept.push_back(k);
      out.columns.emplace_back(names[k]);
    }
  }
  out.matrix.resize(static_cast<Eigen::Index>(his.size()), static_cast<Eigen::Index>(kept.size()));
  std::vector<std::vector<double>> columns(names.size(), std::vector<double>(his.size()));
  for (std::size_t i = 0; i < his.size(); ++i) {
    const auto v = his[i].values();
    for (std::size_t k = 0; k < names.size(); ++k) columns[k][i] = v[k];
    for (std::size_t c = 0; c < kept.size(); ++c) {
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v[kept[c]];
    }
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    double r = std::numeric_limits<double>::quiet_NaN();
    try {
      r = pearson(columns[k], capacity);
    } catch (const DataError&) {
      // Constant indicator: correlation undefined, reported as NaN.
    }
    out.pearson_vs_capacity.emplace_back(std::string(names[k]), r);
  }
  return out;
}

}  // namespace icsoh
