#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icsoh {

enum class StepKind { CcCharge, CvCharge, CcDischarge, Rest, Other };

std::string_view to_string(StepKind kind);
std::optional<StepKind> step_kind_from_string(std::string_view name);

struct Sample {
  double time_s = 0.0;
  double current_A = 0.0;  // discharge is negative
  double voltage_V = 0.0;
  StepKind step = StepKind::Other;

  bool operator==(const Sample&) const = default;
};

struct CycleRecord {
  int cycle_index = 0;
  std::vector<Sample> samples;

  bool operator==(const CycleRecord&) const = default;
};

struct CyclingDataset {
  std::string battery_id;
  double nominal_capacity_Ah = 1.1;
  std::vector<CycleRecord> cycles;
  std::vector<double> capacities_Ah;
  std::vector<double> soh;

  bool operator==(const CyclingDataset&) const = default;
};

struct CommonHis {
  double ccct_s = 0.0;
  double cvct_s = 0.0;
  double ccdt_s = 0.0;
  bool missing_cc_charge = false;
  bool missing_cv_charge = false;
  bool missing_cc_discharge = false;

  [[nodiscard]] bool any_missing() const {
    return missing_cc_charge || missing_cv_charge || missing_cc_discharge;
  }
};

/// Maps logical columns onto header names of an input CSV. When `step` is
/// empty the step kinds are inferred from current and voltage.
struct CsvSchema {
  std::string cycle = "cycle";
  std::string time = "time_s";
  std::string current = "current_A";
  std::string voltage = "voltage_V";
  std::string step = "step";
  /// Raw step labels (e.g. Arbin step indices) mapped onto step kinds.
  /// Canonical names (cc_charge, ...) are always accepted.
  std::map<std::string, StepKind> step_labels;
};

/// Thresholds for labelling samples when the export carries no step column.
struct StepInferenceConfig {
  double charge_cutoff_V = 4.2;
  double cv_band_V = 0.005;
  double plateau_tolerance = 0.02;
  double rest_current_A = 1e-3;
};

struct IngestOptions {
  std::string battery_id = "battery";
  double nominal_capacity_Ah = 1.1;
  StepInferenceConfig inference;
  /// Cycles whose capacity leaves [low, high] x nominal are dropped.
  double drop_above_fraction = 1.2;
  double drop_below_fraction = 0.1;
};

struct ParseReport {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
  std::vector<std::string> messages;

  [[nodiscard]] std::string to_text() const;
};

struct ParseResult {
  CyclingDataset dataset;
  ParseReport report;
};

ParseResult parse_cycling_csv(const std::filesystem::path& path, const CsvSchema& schema,
                              const IngestOptions& options = {});

/// Same as parse_cycling_csv but reads from an in-memory buffer.
ParseResult parse_cycling_csv_text(std::string_view text, const CsvSchema& schema,
                                   const IngestOptions& options = {});

/// Canonical CSV: cycle,time_s,current_A,voltage_V,step.
std::string serialize_dataset_csv(const CyclingDataset& dataset);

/// Labels every sample of a cycle from its current/voltage trace.
void infer_step_kinds(CycleRecord& cycle, const StepInferenceConfig& cfg);

/// Trapezoidal integral of |I| dt over consecutive cc_discharge samples, in Ah.
double compute_cycle_capacity(const CycleRecord& cycle);

double compute_soh(double reality_Ah, double nominal_Ah);

CommonHis extract_common_his(const CycleRecord& cycle);

/// Assembles a dataset from cycles: computes capacity/SOH and drops cycles
/// without a discharge or with implausible capacity (noted in `report`).
CyclingDataset build_dataset(std::vector<CycleRecord> cycles, const IngestOptions& options,
                             ParseReport* report = nullptr);

struct MinMaxRange {
  double min = 0.0;
  double max = 1.0;
};

struct NormalizedValues {
  std::vector<double> values;
  MinMaxRange range;
};

/// Min-max scaling. A supplied range is applied as-is and results are
/// clamped to [0, 1]; otherwise the range is fitted from `values`.
NormalizedValues normalize_minmax(std::span<const double> values,
                                  std::optional<MinMaxRange> fit_range = std::nullopt);

std::vector<double> denormalize_minmax(std::span<const double> values, MinMaxRange range);

}  // namespace icsoh
