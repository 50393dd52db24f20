#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace icsoh {

struct MetricReport {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> mape_percent;  // absent when some truth value is zero
  double mse = 0.0;
  std::size_t n = 0;
};

MetricReport compute_metrics(std::span<const double> truth, std::span<const double> predicted);

struct MetricRow {
  std::string battery;
  std::string split;
  std::string model;
  MetricReport report;
};

/// CSV with columns battery,split,model,mse,rmse,mape_percent,mae; an
/// unavailable MAPE is written as NA.
std::string serialize_metrics_csv(std::span<const MetricRow> rows);

}  // namespace icsoh
