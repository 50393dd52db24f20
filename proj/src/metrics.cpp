#include "icsoh/metrics.hpp"

#include <cmath>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"

namespace icsoh {

MetricReport compute_metrics(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size()) throw DataError("metrics: length mismatch");
  if (truth.empty()) throw DataError("metrics: no samples");
  MetricReport r;
  r.n = truth.size();
  const auto n = static_cast<double>(r.n);
  double sq = 0.0, abs_sum = 0.0, pct = 0.0;
  bool zero_truth = false;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - predicted[i];
    sq += e * e;
    abs_sum += std::abs(e);
    if (truth[i] == 0.0) {
      zero_truth = true;
    } else {
      pct += std::abs(e / truth[i]);
    }
  }
  r.mse = sq / n;
  r.rmse = std::sqrt(r.mse);
  r.mae = abs_sum / n;
  if (!zero_truth) r.mape_percent = pct / n * 100.0;
  return r;
}

std::string serialize_metrics_csv(std::span<const MetricRow> rows) {
  std::string out = "battery,split,model,mse,rmse,mape_percent,mae\n";
  for (const auto& row : rows) {
    const auto& m = row.report;
    out += row.battery + ',' + row.split + ',' + row.model + ',' + csv::format_double(m.mse) + ',' +
           csv::format_double(m.rmse) + ',' + (m.mape_percent ? csv::format_double(*m.mape_percent) : "NA") +
           ',' + csv::format_double(m.mae) + '\n';
  }
  return out;
}

}  // namespace icsoh
