#include "icsoh/ic_analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"

namespace icsoh {

namespace {

constexpr double kGridSnap = 1e-9;

// Design matrix of the local polynomial, abscissae centred on the window.
Eigen::MatrixXd vandermonde(int window, int order) {
  const int half = window / 2;
  Eigen::MatrixXd a(window, order + 1);
  for (int i = 0; i < window; ++i) {
    double p = 1.0;
    for (int j = 0; j <= order; ++j) {
      a(i, j) = p;
      p *= static_cast<double>(i - half);
    }
  }
  return a;
}

}  // namespace

void SgConfig::validate() const {
  if (window <= 0 || window % 2 == 0) throw ConfigError("SG window must be a positive odd integer");
  if (poly_order < 0 || poly_order >= window) {
    throw ConfigError("SG polynomial order must lie in [0, window)");
  }
}

IcCurve compute_ic_curve(const CycleRecord& cycle, double grid_step_V) {
  if (!(grid_step_V > 0.0)) throw ConfigError("grid step must be positive");

  // Longest contiguous discharge run.
  const auto& s = cycle.samples;
  std::size_t best_first = 0, best_len = 0;
  for (std::size_t i = 0; i < s.size();) {
    if (s[i].step != StepKind::CcDischarge) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && s[j].step == StepKind::CcDischarge) ++j;
    if (j - i > best_len) {
      best_first = i;
      best_len = j - i;
    }
    i = j;
  }
  if (best_len == 0) {
    throw DataError("cycle " + std::to_string(cycle.cycle_index) + ": zero discharge samples");
  }

  std::vector<double> charge(best_len, 0.0);
  std::vector<double> envelope(best_len, 0.0);
  for (std::size_t k = 0; k < best_len; ++k) {
    const auto& cur = s[best_first + k];
    if (k == 0) {
      envelope[k] = cur.voltage_V;
      continue;
    }
    const auto& prev = s[best_first + k - 1];
    charge[k] = charge[k - 1] + 0.5 * (std::abs(prev.current_A) + std::abs(cur.current_A)) *
                                    (cur.time_s - prev.time_s) / 3600.0;
    envelope[k] = std::min(envelope[k - 1], cur.voltage_V);
  }

  const double v_max = envelope.front();
  const double v_min = envelope.back();
  if (v_max - v_min < 5.0 * grid_step_V) {
    throw DataError("cycle " + std::to_string(cycle.cycle_index) +
                    ": discharge voltage span too small for the IC grid");
  }
  const auto i_hi = static_cast<long long>(std::floor(v_max / grid_step_V + kGridSnap));
  const auto i_lo = static_cast<long long>(std::ceil(v_min / grid_step_V - kGridSnap));
  const auto n_nodes = static_cast<std::size_t>(i_hi - i_lo + 1);

  // Q at each node, walking the grid downwards alongside the envelope.
  std::vector<double> node_charge(n_nodes, 0.0);
  std::size_t k = 0;
  for (std::size_t m = 0; m < n_nodes; ++m) {
    const std::size_t node = n_nodes - 1 - m;
    const double v = std::clamp(static_cast<double>(i_lo + static_cast<long long>(node)) * grid_step_V,
                                v_min, v_max);
    while (k < best_len && envelope[k] > v) ++k;
    if (k >= best_len) {
      node_charge[node] = charge.back();
    } else if (k == 0 || envelope[k] == v) {
      node_charge[node] = charge[k];
    } else {
      const double frac = (envelope[k - 1] - v) / (envelope[k - 1] - envelope[k]);
      node_charge[node] = charge[k - 1] + frac * (charge[k] - charge[k - 1]);
    }
  }

  IcCurve curve;
  curve.cycle_index = cycle.cycle_index;
  curve.grid_step_V = grid_step_V;
  curve.voltage_grid_V.reserve(n_nodes - 1);
  curve.ic_AhPerV.reserve(n_nodes - 1);
  for (std::size_t j = 0; j + 1 < n_nodes; ++j) {
    curve.voltage_grid_V.push_back((static_cast<double>(i_lo + static_cast<long long>(j)) + 0.5) *
                                   grid_step_V);
    curve.ic_AhPerV.push_back(std::abs(node_charge[j] - node_charge[j + 1]) / grid_step_V);
  }
  return curve;
}

std::vector<double> savitzky_golay_coefficients(const SgConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd a = vandermonde(cfg.window, cfg.poly_order);
  const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
  // Value at the centre is the constant term of the fit.
  std::vector<double> c(static_cast<std::size_t>(cfg.window));
  for (int i = 0; i < cfg.window; ++i) c[static_cast<std::size_t>(i)] = pinv(0, i);
  return c;
}

std::vector<double> savitzky_golay_smooth(std::span<const double> values, const SgConfig& cfg) {
  cfg.validate();
  const auto w = static_cast<std::size_t>(cfg.window);
  if (values.size() < w) throw DataError("sequence shorter than the SG window");
  const std::size_t half = w / 2;
  const Eigen::MatrixXd a = vandermonde(cfg.window, cfg.poly_order);
  const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();

  std::vector<double> out(values.size());
  for (std::size_t i = half; i + half < values.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w; ++j) acc += pinv(0, static_cast<Eigen::Index>(j)) * values[i - half + j];
    out[i] = acc;
  }

  // Edges: evaluate the end windows' polynomials away from their centres.
  const auto fit_window = [&](std::size_t first) {
    Eigen::VectorXd y(cfg.window);
    for (std::size_t j = 0; j < w; ++j) y(static_cast<Eigen::Index>(j)) = values[first + j];
    return Eigen::VectorXd(pinv * y);
  };
  const Eigen::VectorXd head = fit_window(0);
  const Eigen::VectorXd tail = fit_window(values.size() - w);
  for (std::size_t j = 0; j < half; ++j) {
    out[j] = a.row(static_cast<Eigen::Index>(j)).dot(head);
    out[values.size() - half + j] = a.row(static_cast<Eigen::Index>(half + 1 + j)).dot(tail);
  }
  return out;
}

IcCurve smooth_curve(const IcCurve& curve, const SgConfig& cfg) {
  IcCurve out = curve;
  out.ic_AhPerV = savitzky_golay_smooth(curve.ic_AhPerV, cfg);
  return out;
}

Peak detect_peak(const IcCurve& curve, double search_lo_V, double search_hi_V) {
  const double tol = 1e-9 * std::max(1.0, std::abs(search_hi_V));
  std::size_t count = 0;
  Peak best;
  bool found = false;
  for (std::size_t j = 0; j < curve.size(); ++j) {
    const double v = curve.voltage_grid_V[j];
    if (v < search_lo_V - tol || v > search_hi_V + tol) continue;
    ++count;
    if (!found || curve.ic_AhPerV[j] > best.value_AhPerV) {
      best = {v, curve.ic_AhPerV[j]};
      found = true;
    }
  }
  if (count < 3) {
    throw DataError("peak search window [" + csv::format_double(search_lo_V) + ", " +
                    csv::format_double(search_hi_V) + "] V covers fewer than 3 grid points");
  }
  return best;
}

std::string serialize_ic_curves_csv(std::span<const IcCurve> curves) {
  std::string out = "cycle,voltage_V,ic_AhPerV\n";
  for (const auto& c : curves) {
    const auto idx = std::to_string(c.cycle_index);
    for (std::size_t j = 0; j < c.size(); ++j) {
      out += idx + ',' + csv::format_double(c.voltage_grid_V[j]) + ',' +
             csv::format_double(c.ic_AhPerV[j]) + '\n';
    }
  }
  return out;
}

}  // namespace icsoh
