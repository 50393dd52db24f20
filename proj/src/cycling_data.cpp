#include "icsoh/cycling_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"

namespace icsoh {

namespace {

constexpr std::size_t kMaxReportedRows = 20;

struct Segment {
  std::size_t first = 0;
  std::size_t last = 0;
};

// Longest run of consecutive samples with the given step kind.
std::optional<Segment> longest_segment(const CycleRecord& cycle, StepKind kind) {
  std::optional<Segment> best;
  const auto& s = cycle.samples;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i].step != kind) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1].step == kind) ++j;
    const double duration = s[j].time_s - s[i].time_s;
    if (!best || duration > s[best->last].time_s - s[best->first].time_s) best = Segment{i, j};
    i = j + 1;
  }
  return best;
}

void add_message(ParseReport* report, std::string message) {
  if (report) report->messages.push_back(std::move(message));
}

}  // namespace

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::CcCharge: return "cc_charge";
    case StepKind::CvCharge: return "cv_charge";
    case StepKind::CcDischarge: return "cc_discharge";
    case StepKind::Rest: return "rest";
    case StepKind::Other: return "other";
  }
  return "other";
}

std::optional<StepKind> step_kind_from_string(std::string_view name) {
  for (auto kind : {StepKind::CcCharge, StepKind::CvCharge, StepKind::CcDischarge, StepKind::Rest,
                    StepKind::Other}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string ParseReport::to_text() const {
  std::ostringstream out;
  out << "rows_read " << rows_read << '\n';
  out << "rows_skipped " << rows_skipped << '\n';
  for (const auto& m : messages) out << m << '\n';
  return out.str();
}

void infer_step_kinds(CycleRecord& cycle, const StepInferenceConfig& cfg) {
  double max_charge = 0.0;
  double max_discharge = 0.0;
  for (const auto& s : cycle.samples) {
    max_charge = std::max(max_charge, s.current_A);
    max_discharge = std::max(max_discharge, -s.current_A);
  }
  for (auto& s : cycle.samples) {
    const double i = s.current_A;
    if (std::abs(i) <= cfg.rest_current_A) {
      s.step = StepKind::Rest;
    } else if (i > 0.0) {
      const bool on_plateau = std::abs(i - max_charge) <= cfg.plateau_tolerance * max_charge;
      const bool at_cutoff = std::abs(s.voltage_V - cfg.charge_cutoff_V) <= cfg.cv_band_V;
      if (on_plateau && s.voltage_V <= cfg.charge_cutoff_V + cfg.cv_band_V) {
        s.step = StepKind::CcCharge;
      } else if (at_cutoff) {
        s.step = StepKind::CvCharge;
      } else {
        s.step = StepKind::Other;
      }
    } else {
      const bool on_plateau = std::abs(-i - max_discharge) <= cfg.plateau_tolerance * max_discharge;
      s.step = on_plateau ? StepKind::CcDischarge : StepKind::Other;
    }
  }
}

double compute_cycle_capacity(const CycleRecord& cycle) {
  const auto& s = cycle.samples;
  bool any = false;
  double amp_seconds = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k].step != StepKind::CcDischarge) continue;
    any = true;
    if (k + 1 < s.size() && s[k + 1].step == StepKind::CcDischarge) {
      amp_seconds += 0.5 * (std::abs(s[k].current_A) + std::abs(s[k + 1].current_A)) *
                     (s[k + 1].time_s - s[k].time_s);
    }
  }
  if (!any) {
    throw DataError("cycle " + std::to_string(cycle.cycle_index) + " has no discharge segment");
  }
  return amp_seconds / 3600.0;
}

double compute_soh(double reality_Ah, double nominal_Ah) {
  if (!(nominal_Ah > 0.0)) throw ConfigError("nominal capacity must be positive");
  return reality_Ah / nominal_Ah;
}

CommonHis extract_common_his(const CycleRecord& cycle) {
  CommonHis his;
  const auto duration = [&](StepKind kind, bool& missing) {
    const auto seg = longest_segment(cycle, kind);
    missing = !seg.has_value();
    return seg ? cycle.samples[seg->last].time_s - cycle.samples[seg->first].time_s : 0.0;
  };
  his.ccct_s = duration(StepKind::CcCharge, his.missing_cc_charge);
  his.cvct_s = duration(StepKind::CvCharge, his.missing_cv_charge);
  his.ccdt_s = duration(StepKind::CcDischarge, his.missing_cc_discharge);
  return his;
}

CyclingDataset build_dataset(std::vector<CycleRecord> cycles, const IngestOptions& options,
                             ParseReport* report) {
  if (!(options.nominal_capacity_Ah > 0.0)) throw ConfigError("nominal capacity must be positive");
  CyclingDataset ds;
  ds.battery_id = options.battery_id;
  ds.nominal_capacity_Ah = options.nominal_capacity_Ah;
  const double hi = options.drop_above_fraction * options.nominal_capacity_Ah;
  const double lo = options.drop_below_fraction * options.nominal_capacity_Ah;
  for (auto& cycle : cycles) {
    const bool has_discharge =
        std::any_of(cycle.samples.begin(), cycle.samples.end(),
                    [](const Sample& s) { return s.step == StepKind::CcDischarge; });
    if (!has_discharge) {
      add_message(report, "dropped cycle " + std::to_string(cycle.cycle_index) +
                              ": no discharge segment");
      continue;
    }
    const double cap = compute_cycle_capacity(cycle);
    if (cap > hi || cap < lo) {
      add_message(report, "dropped cycle " + std::to_string(cycle.cycle_index) + ": capacity " +
                              csv::format_double(cap) + " Ah outside plausible range");
      continue;
    }
    ds.capacities_Ah.push_back(cap);
    ds.soh.push_back(compute_soh(cap, options.nominal_capacity_Ah));
    ds.cycles.push_back(std::move(cycle));
  }
  return ds;
}

ParseResult parse_cycling_csv_text(std::string_view text, const CsvSchema& schema,
                                   const IngestOptions& options) {
  ParseResult result;
  auto& report = result.report;

  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    pos = end + 1;
  }
  if (lines.empty()) throw DataError("zero usable cycles (empty input)");

  const auto header = csv::split_line(lines.front());
  const auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    if (name.empty()) return std::nullopt;
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_cycle = *column(schema.cycle);
  const auto c_time = *column(schema.time);
  const auto c_current = *column(schema.current);
  const auto c_voltage = *column(schema.voltage);
  const auto c_step = column(schema.step);
  const std::size_t min_fields =
      std::max({c_cycle, c_time, c_current, c_voltage, c_step.value_or(0)}) + 1;

  std::map<int, std::vector<Sample>> grouped;
  std::size_t unknown_labels = 0;
  const auto skip = [&](std::size_t line_no, const std::string& why) {
    ++report.rows_skipped;
    if (report.rows_skipped <= kMaxReportedRows) {
      report.messages.push_back("skipped line " + std::to_string(line_no) + ": " + why);
    }
  };
  for (std::size_t li = 1; li < lines.size(); ++li) {
    ++report.rows_read;
    const auto fields = csv::split_line(lines[li]);
    const std::size_t line_no = li + 1;
    if (fields.size() < min_fields) {
      skip(line_no, "too few fields");
      continue;
    }
    long long cycle_index = 0;
    Sample s;
    if (!csv::parse_int(fields[c_cycle], cycle_index) || cycle_index <= 0) {
      skip(line_no, "bad cycle index");
      continue;
    }
    if (!csv::parse_double(fields[c_time], s.time_s)) {
      skip(line_no, "bad time");
      continue;
    }
    if (!csv::parse_double(fields[c_current], s.current_A)) {
      skip(line_no, "bad current");
      continue;
    }
    if (!csv::parse_double(fields[c_voltage], s.voltage_V) || s.voltage_V < 0.0 ||
        s.voltage_V > 10.0) {
      skip(line_no, "bad voltage");
      continue;
    }
    if (c_step) {
      const auto& label = fields[*c_step];
      if (auto it = schema.step_labels.find(label); it != schema.step_labels.end()) {
        s.step = it->second;
      } else if (auto kind = step_kind_from_string(label)) {
        s.step = *kind;
      } else {
        s.step = StepKind::Other;
        ++unknown_labels;
      }
    }
    grouped[static_cast<int>(cycle_index)].push_back(s);
  }
  if (report.rows_skipped > kMaxReportedRows) {
    report.messages.push_back("... " + std::to_string(report.rows_skipped - kMaxReportedRows) +
                              " further skipped rows not listed");
  }
  if (unknown_labels > 0) {
    report.messages.push_back(std::to_string(unknown_labels) +
                              " rows had unrecognised step labels (treated as other)");
  }

  std::vector<CycleRecord> cycles;
  cycles.reserve(grouped.size());
  for (auto& [index, samples] : grouped) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const Sample& a, const Sample& b) { return a.time_s < b.time_s; });
    const auto dup = std::unique(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
      return a.time_s == b.time_s;
    });
    if (dup != samples.end()) {
      report.messages.push_back("cycle " + std::to_string(index) + ": removed " +
                                std::to_string(samples.end() - dup) + " duplicate timestamps");
      samples.erase(dup, samples.end());
    }
    CycleRecord cycle{index, std::move(samples)};
    if (!c_step) infer_step_kinds(cycle, options.inference);
    cycles.push_back(std::move(cycle));
  }

  result.dataset = build_dataset(std::move(cycles), options, &report);
  if (result.dataset.cycles.empty()) throw DataError("zero usable cycles");
  return result;
}

ParseResult parse_cycling_csv(const std::filesystem::path& path, const CsvSchema& schema,
                              const IngestOptions& options) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  const auto text = csv::read_file(path);
  return parse_cycling_csv_text(text, schema, options);
}

std::string serialize_dataset_csv(const CyclingDataset& dataset) {
  std::string out = "cycle,time_s,current_A,voltage_V,step\n";
  for (const auto& cycle : dataset.cycles) {
    const auto idx = std::to_string(cycle.cycle_index);
    for (const auto& s : cycle.samples) {
      out += idx;
      out += ',';
      out += csv::format_double(s.time_s);
      out += ',';
      out += csv::format_double(s.current_A);
      out += ',';
      out += csv::format_double(s.voltage_V);
      out += ',';
      out += to_string(s.step);
      out += '\n';
    }
  }
  return out;
}

NormalizedValues normalize_minmax(std::span<const double> values,
                                  std::optional<MinMaxRange> fit_range) {
  NormalizedValues out;
  if (fit_range) {
    out.range = *fit_range;
  } else {
    if (values.empty()) throw ConfigError("normalize_minmax: no values to fit a range");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    out.range = {*mn, *mx};
  }
  const double span = out.range.max - out.range.min;
  if (!(span > 0.0)) throw ConfigError("normalize_minmax: degenerate range (all values equal)");
  out.values.reserve(values.size());
  for (double v : values) {
    double x = (v - out.range.min) / span;
    if (fit_range) x = std::clamp(x, 0.0, 1.0);
    out.values.push_back(x);
  }
  return out;
}

std::vector<double> denormalize_minmax(std::span<const double> values, MinMaxRange range) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(range.min + v * (range.max - range.min));
  return out;
}

}  // namespace icsoh
