#include "icsoh/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "icsoh/csv.hpp"
#include "icsoh/error.hpp"

namespace icsoh {

namespace fs = std::filesystem;

namespace {

// ---- config keys ------------------------------------------------------------

struct Key {
  std::string name;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <class Ref>
Key real_key(std::string name, Ref ref) {
  return {name,
          [name, ref](PipelineConfig& c, const std::string& v) {
            double x = 0.0;
            if (!csv::parse_double(v, x)) bad_value(name, v, "a real number");
            ref(c) = x;
          },
          [ref](const PipelineConfig& c) { return csv::format_double(ref(const_cast<PipelineConfig&>(c))); }};
}

template <class Ref>
Key int_key(std::string name, Ref ref) {
  return {name,
          [name, ref](PipelineConfig& c, const std::string& v) {
            long long x = 0;
            if (!csv::parse_int(v, x) || x < std::numeric_limits<int>::min() ||
                x > std::numeric_limits<int>::max()) {
              bad_value(name, v, "an integer");
            }
            ref(c) = static_cast<int>(x);
          },
          [ref](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

template <class Ref>
Key seed_key(std::string name, Ref ref) {
  return {name,
          [name, ref](PipelineConfig& c, const std::string& v) {
            std::uint64_t x = 0;
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(name, v, "an unsigned integer");
            ref(c) = x;
          },
          [ref](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

template <class Ref>
Key string_key(std::string name, Ref ref) {
  return {name, [ref](PipelineConfig& c, const std::string& v) { ref(c) = v; },
          [ref](const PipelineConfig& c) { return ref(const_cast<PipelineConfig&>(c)); }};
}

template <class Ref>
Key bool_key(std::string name, Ref ref) {
  return {name,
          [name, ref](PipelineConfig& c, const std::string& v) {
            if (v == "true" || v == "1") {
              ref(c) = true;
            } else if (v == "false" || v == "0") {
              ref(c) = false;
            } else {
              bad_value(name, v, "true/false");
            }
          },
          [ref](const PipelineConfig& c) { return std::string(ref(const_cast<PipelineConfig&>(c)) ? "true" : "false"); }};
}

const std::vector<Key>& config_keys() {
  using C = PipelineConfig;
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(string_key("dataset_path", [](C& c) -> std::string& { return c.dataset_path; }));
    k.push_back(string_key("battery_id", [](C& c) -> std::string& { return c.ingest.battery_id; }));
    k.push_back(real_key("nominal_Ah", [](C& c) -> double& { return c.ingest.nominal_capacity_Ah; }));
    k.push_back(real_key("drop_above_fraction", [](C& c) -> double& { return c.ingest.drop_above_fraction; }));
    k.push_back(real_key("drop_below_fraction", [](C& c) -> double& { return c.ingest.drop_below_fraction; }));
    k.push_back(real_key("charge_cutoff_V", [](C& c) -> double& { return c.ingest.inference.charge_cutoff_V; }));
    k.push_back(string_key("cycle_column", [](C& c) -> std::string& { return c.schema.cycle; }));
    k.push_back(string_key("time_column", [](C& c) -> std::string& { return c.schema.time; }));
    k.push_back(string_key("current_column", [](C& c) -> std::string& { return c.schema.current; }));
    k.push_back(string_key("voltage_column", [](C& c) -> std::string& { return c.schema.voltage; }));
    k.push_back(string_key("step_column", [](C& c) -> std::string& { return c.schema.step; }));

    k.push_back(int_key("synth_n_cycles", [](C& c) -> int& { return c.synth.n_cycles; }));
    k.push_back(real_key("synth_nominal_Ah", [](C& c) -> double& { return c.synth.nominal_Ah; }));
    k.push_back(real_key("synth_fade_linear", [](C& c) -> double& { return c.synth.fade_linear; }));
    k.push_back(int_key("synth_fade_accel_onset", [](C& c) -> int& { return c.synth.fade_accel_onset; }));
    k.push_back(real_key("synth_fade_accel_rate", [](C& c) -> double& { return c.synth.fade_accel_rate; }));
    k.push_back(int_key("synth_recovery_every", [](C& c) -> int& { return c.synth.recovery_every; }));
    k.push_back(real_key("synth_recovery_magnitude", [](C& c) -> double& { return c.synth.recovery_magnitude; }));
    k.push_back(real_key("synth_noise_sigma", [](C& c) -> double& { return c.synth.noise_sigma; }));
    k.push_back(seed_key("synth_seed", [](C& c) -> std::uint64_t& { return c.synth.seed; }));
    k.push_back(real_key("synth_sample_period_s", [](C& c) -> double& { return c.synth.sample_period_s; }));

    k.push_back(real_key("grid_step_V", [](C& c) -> double& { return c.grid_step_V; }));
    k.push_back(int_key("sg_window", [](C& c) -> int& { return c.sg.window; }));
    k.push_back(int_key("sg_poly_order", [](C& c) -> int& { return c.sg.poly_order; }));
    k.push_back(real_key("area_upper_offset_V", [](C& c) -> double& { return c.indicators.area.upper_offset_V; }));
    k.push_back(real_key("area_lower_offset_V", [](C& c) -> double& { return c.indicators.area.lower_offset_V; }));
    k.push_back(real_key("diff_position3_V", [](C& c) -> double& { return c.indicators.diff.position3_V; }));
    k.push_back(real_key("diff_position2_V", [](C& c) -> double& { return c.indicators.diff.position2_V; }));
    k.push_back(real_key("peak_search_lo_V", [](C& c) -> double& { return c.indicators.peak_search_lo_V; }));
    k.push_back(real_key("peak_search_hi_V", [](C& c) -> double& { return c.indicators.peak_search_hi_V; }));
    k.push_back({"drop_list",
                 [](C& c, const std::string& v) {
                   c.drop_list.clear();
                   if (v == "none") return;
                   for (auto& name : csv::split_line(v)) {
                     if (!name.empty()) c.drop_list.push_back(name);
                   }
                 },
                 [](const C& c) {
                   if (c.drop_list.empty()) return std::string("none");
                   std::string out;
                   for (const auto& d : c.drop_list) out += (out.empty() ? "" : ",") + d;
                   return out;
                 }});
    k.push_back(int_key("pca_dims", [](C& c) -> int& { return c.pca_dims; }));
    k.push_back({"input_mode",
                 [](C& c, const std::string& v) {
                   if (v == "pca_only") {
                     c.input_mode = InputMode::PcaOnly;
                   } else if (v == "pca_plus_common") {
                     c.input_mode = InputMode::PcaPlusCommon;
                   } else {
                     bad_value("input_mode", v, "pca_only or pca_plus_common");
                   }
                 },
                 [](const C& c) { return std::string(to_string(c.input_mode)); }});

    k.push_back(int_key("window_length", [](C& c) -> int& { return c.train.window_length; }));
    k.push_back(int_key("max_epochs", [](C& c) -> int& { return c.train.max_epochs; }));
    k.push_back(int_key("batch_size", [](C& c) -> int& { return c.train.batch_size; }));
    k.push_back(int_key("lr_drop_period", [](C& c) -> int& { return c.train.lr_drop_period; }));
    k.push_back(real_key("lr_drop_factor", [](C& c) -> double& { return c.train.lr_drop_factor; }));
    k.push_back(real_key("clip_norm", [](C& c) -> double& { return c.train.clip_norm; }));

    k.push_back(int_key("pso_population", [](C& c) -> int& { return c.pso.population; }));
    k.push_back(real_key("pso_c1", [](C& c) -> double& { return c.pso.c1; }));
    k.push_back(real_key("pso_c2", [](C& c) -> double& { return c.pso.c2; }));
    k.push_back(real_key("pso_inertia_start", [](C& c) -> double& { return c.pso.inertia_start; }));
    k.push_back(real_key("pso_inertia_end", [](C& c) -> double& { return c.pso.inertia_end; }));
    k.push_back(int_key("pso_max_iterations", [](C& c) -> int& { return c.pso.max_iterations; }));
    k.push_back(real_key("pso_velocity_clamp", [](C& c) -> double& { return c.pso.velocity_clamp; }));
    k.push_back(int_key("pso_budget_epochs", [](C& c) -> int& { return c.pso_budget_epochs; }));
    k.push_back(int_key("hidden_lo", [](C& c) -> int& { return c.search.hidden_lo; }));
    k.push_back(int_key("hidden_hi", [](C& c) -> int& { return c.search.hidden_hi; }));
    k.push_back(real_key("lr_lo", [](C& c) -> double& { return c.search.lr_lo; }));
    k.push_back(real_key("lr_hi", [](C& c) -> double& { return c.search.lr_hi; }));

    k.push_back(int_key("ensemble_count", [](C& c) -> int& { return c.ensemble_count; }));
    k.push_back(int_key("baseline_hidden", [](C& c) -> int& { return c.baseline_hidden; }));
    k.push_back(real_key("baseline_lr", [](C& c) -> double& { return c.baseline_lr; }));
    k.push_back(real_key("train_fraction", [](C& c) -> double& { return c.train_fraction; }));
    k.push_back(seed_key("seed", [](C& c) -> std::uint64_t& { return c.seed; }));
    k.push_back(string_key("out_dir", [](C& c) -> std::string& { return c.out_dir; }));
    k.push_back(bool_key("dump_ic_curves", [](C& c) -> bool& { return c.dump_ic_curves; }));
    std::sort(k.begin(), k.end(), [](const Key& a, const Key& b) { return a.name < b.name; });
    return k;
  }();
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// ---- small helpers ----------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

constexpr std::uint32_t kStreamPso = 1;
constexpr std::uint32_t kStreamFitness = 2;
constexpr std::uint32_t kStreamEnsemble = 3;
constexpr std::uint32_t kStreamBaseline = 4;

std::string format_real(double v) { return std::isfinite(v) ? csv::format_double(v) : (std::isnan(v) ? "NaN" : (v > 0 ? "inf" : "-inf")); }

CyclingDataset load_ingested(const PipelineConfig& cfg) {
  const fs::path path = fs::path(cfg.out_dir) / "dataset.csv";
  if (!fs::exists(path)) throw DataError("missing file: " + path.string() + " (run ingest first)");
  CsvSchema schema;  // canonical columns
  IngestOptions options = cfg.ingest;
  if (cfg.dataset_path.empty()) {
    options.battery_id = "synthetic";
    options.nominal_capacity_Ah = cfg.synth.nominal_Ah;
  }
  return parse_cycling_csv(path, schema, options).dataset;
}

CyclingDataset acquire_dataset(const PipelineConfig& cfg, ParseReport& report) {
  if (cfg.dataset_path.empty()) {
    auto ds = generate_dataset(cfg.synth);
    report.messages.push_back("synthetic dataset, seed " + std::to_string(cfg.synth.seed));
    return ds;
  }
  auto result = parse_cycling_csv(cfg.dataset_path, cfg.schema, cfg.ingest);
  report = std::move(result.report);
  return std::move(result.dataset);
}

FeatureTable load_feature_table(const PipelineConfig& cfg) {
  const fs::path path = fs::path(cfg.out_dir) / "features.csv";
  if (!fs::exists(path)) throw DataError("missing file: " + path.string() + " (run features first)");
  return parse_feature_table_csv(csv::read_file(path));
}

nlohmann::json load_json(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing file: " + path.string());
  try {
    return nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string summarize_range(std::span<const double> v) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.4f-%.4f", *mn, *mx);
  return buf;
}

struct LoadedModels {
  FeatureModel features;
  EnsembleModel ensemble;
  BiLstmNetwork baseline;
  int window = 0;
  std::string stored_hash;
};

LoadedModels load_models(const PipelineConfig& cfg) {
  const fs::path out(cfg.out_dir);
  LoadedModels m;
  const auto pre = load_json(out / "preprocessing.json");
  m.features = feature_model_from_json(pre.at("features"));
  m.window = pre.at("window_length").get<int>();
  if (!fs::exists(out / "model" / "manifest.json")) {
    throw DataError("missing file: " + (out / "model" / "manifest.json").string() + " (run train first)");
  }
  m.ensemble = load_ensemble(out / "model", &m.stored_hash);
  m.baseline = network_from_json(load_json(out / "model" / "baseline.json"));
  return m;
}

PredictionTable predict_with_models(const LoadedModels& m, const FeatureTable& table) {
  const Eigen::MatrixXd inputs = model_inputs(m.features, table);
  const std::map<std::string, Predictor> predictors{
      {"ensemble", [&](std::span<const Sequence> s) { return ensemble_predict_all(m.ensemble, s); }},
      {"baseline", [&](std::span<const Sequence> s) { return bilstm_predict_all(m.baseline, s); }},
  };
  return predict_test(inputs, table.cycles, table.soh, m.features.n_train, m.window, predictors);
}

}  // namespace

// ---- config -------------------------------------------------------------------

std::string_view to_string(InputMode mode) {
  return mode == InputMode::PcaOnly ? "pca_only" : "pca_plus_common";
}

void PipelineConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (pca_dims < 1 || pca_dims > 9) throw ConfigError("pca_dims must lie in [1, 9]");
  const auto& names = HiVector::names();
  std::set<std::string> dropped;
  for (const auto& d : drop_list) {
    if (std::find(names.begin(), names.end(), d) == names.end()) {
      throw ConfigError("unknown feature name in drop_list: " + d);
    }
    dropped.insert(d);
  }
  if (static_cast<std::size_t>(pca_dims) > names.size() - dropped.size()) {
    throw ConfigError("pca_dims exceeds the number of kept indicators");
  }
  if (!(grid_step_V > 0.0)) throw ConfigError("grid_step_V must be positive");
  sg.validate();
  train.validate();
  pso.validate();
  search.validate();
  if (pso_budget_epochs < 1) throw ConfigError("pso_budget_epochs must be at least 1");
  if (ensemble_count < 1) throw ConfigError("ensemble_count must be at least 1");
  if (baseline_hidden < 1 || !(baseline_lr > 0.0)) throw ConfigError("baseline needs hidden >= 1 and lr > 0");
  if (!(indicators.peak_search_lo_V < indicators.peak_search_hi_V)) {
    throw ConfigError("peak search window must satisfy lo < hi");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  if (dataset_path.empty()) synth.validate();
}

PipelineConfig parse_pipeline_config(std::string_view text, PipelineConfig base) {
  const auto& keys = config_keys();
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const Key& k) { return k.name == key; });
    if (it == keys.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
    it->set(base, value);
  }
  return base;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("missing config file: " + path.string());
  return parse_pipeline_config(csv::read_file(path));
}

std::string pipeline_config_to_text(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + '\n';
  return out;
}

std::string config_hash(const PipelineConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& k : config_keys()) {
    if (k.name == "out_dir") continue;
    for (unsigned char ch : k.name + "=" + k.get(cfg) + "\n") {
      h ^= ch;
      h *= 0x100000001b3ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- windows --------------------------------------------------------------------

std::size_t train_count(std::size_t n_cycles, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n_cycles)));
}

Sequence window_at(const Eigen::MatrixXd& inputs, std::size_t end, int window) {
  if (window < 1) throw ConfigError("window length must be at least 1");
  const auto w = static_cast<std::size_t>(window);
  if (end + 1 < w || end >= static_cast<std::size_t>(inputs.rows())) {
    throw DataError("window ending at row " + std::to_string(end) + " does not fit the input table");
  }
  return inputs.middleRows(static_cast<Eigen::Index>(end + 1 - w), window);
}

std::vector<SequencePair> make_windows(const Eigen::MatrixXd& inputs, std::span<const double> targets,
                                       std::size_t first_end, std::size_t last_end, int window) {
  if (targets.size() != static_cast<std::size_t>(inputs.rows())) throw DataError("window targets/inputs mismatch");
  std::vector<SequencePair> pairs;
  for (std::size_t end = first_end; end < last_end; ++end) pairs.push_back({window_at(inputs, end, window), targets[end]});
  return pairs;
}

// ---- features -------------------------------------------------------------------

FeatureTable compute_feature_table(const CyclingDataset& dataset, const PipelineConfig& cfg,
                                   std::vector<IcCurve>* smoothed_curves) {
  FeatureTable table;
  std::optional<IcCurve> first;
  std::optional<CommonHis> last_common;
  for (std::size_t i = 0; i < dataset.cycles.size(); ++i) {
    const auto& cycle = dataset.cycles[i];
    HiVector his;
    IcCurve smoothed;
    try {
      smoothed = smooth_curve(compute_ic_curve(cycle, cfg.grid_step_V), cfg.sg);
      if (!first) first = smoothed;
      his = compute_his(smoothed, *first, cfg.indicators);
    } catch (const DataError& e) {
      table.notes.push_back("skipped cycle " + std::to_string(cycle.cycle_index) + ": " + e.what());
      continue;
    }
    CommonHis common = extract_common_his(cycle);
    if (common.any_missing()) {
      if (!last_common) {
        table.notes.push_back("skipped cycle " + std::to_string(cycle.cycle_index) +
                              ": missing charge/discharge step and nothing to carry forward");
        continue;
      }
      if (common.missing_cc_charge) common.ccct_s = last_common->ccct_s;
      if (common.missing_cv_charge) common.cvct_s = last_common->cvct_s;
      if (common.missing_cc_discharge) common.ccdt_s = last_common->ccdt_s;
      table.notes.push_back("cycle " + std::to_string(cycle.cycle_index) +
                            ": missing step durations carried forward");
    }
    last_common = common;
    table.cycles.push_back(cycle.cycle_index);
    table.his.push_back(his);
    table.common.push_back(common);
    table.capacity_Ah.push_back(dataset.capacities_Ah[i]);
    table.soh.push_back(dataset.soh[i]);
    if (smoothed_curves) smoothed_curves->push_back(std::move(smoothed));
  }
  if (table.size() == 0) throw DataError("no cycle produced a usable IC curve");
  return table;
}

std::string serialize_feature_table_csv(const FeatureTable& table) {
  std::string out = "cycle";
  for (auto name : HiVector::names()) out += "," + std::string(name);
  out += ",ccct_s,cvct_s,ccdt_s,capacity_Ah,soh\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += std::to_string(table.cycles[i]);
    for (double v : table.his[i].values()) out += "," + format_real(v);
    const auto& c = table.common[i];
    out += "," + csv::format_double(c.ccct_s) + "," + csv::format_double(c.cvct_s) + "," +
           csv::format_double(c.ccdt_s) + "," + csv::format_double(table.capacity_Ah[i]) + "," +
           csv::format_double(table.soh[i]) + "\n";
  }
  return out;
}

FeatureTable parse_feature_table_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw DataError("features table is empty");
  const auto header = csv::split_line(line);
  const auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("features table: missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_cycle = column("cycle");
  std::array<std::size_t, HiVector::kCount> c_his{};
  for (std::size_t k = 0; k < HiVector::kCount; ++k) c_his[k] = column(HiVector::names()[k]);
  const std::size_t c_ccct = column("ccct_s"), c_cvct = column("cvct_s"), c_ccdt = column("ccdt_s");
  const std::size_t c_cap = column("capacity_Ah"), c_soh = column("soh");

  FeatureTable table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = csv::split_line(line);
    const auto num = [&](std::size_t idx) {
      double v = 0.0;
      if (idx >= f.size()) throw DataError("features table line " + std::to_string(line_no) + ": too few fields");
      if (f[idx] == "NaN") return std::numeric_limits<double>::quiet_NaN();
      if (!csv::parse_double(f[idx], v)) {
        throw DataError("features table line " + std::to_string(line_no) + ": bad number '" + f[idx] + "'");
      }
      return v;
    };
    long long cyc = 0;
    if (c_cycle >= f.size() || !csv::parse_int(f[c_cycle], cyc)) {
      throw DataError("features table line " + std::to_string(line_no) + ": bad cycle index");
    }
    std::array<double, HiVector::kCount> v{};
    for (std::size_t k = 0; k < HiVector::kCount; ++k) v[k] = num(c_his[k]);
    HiVector h;
    h.cycle_index = static_cast<int>(cyc);
    h.area = v[0], h.a4 = v[1], h.cf = v[2], h.pf = v[3], h.mf = v[4], h.wf = v[5], h.kur = v[6];
    h.dmv = v[7], h.p = v[8], h.mps = v[9], h.ppv = v[10], h.arc = v[11], h.pcv = v[12];
    CommonHis common;
    common.ccct_s = num(c_ccct);
    common.cvct_s = num(c_cvct);
    common.ccdt_s = num(c_ccdt);
    table.cycles.push_back(h.cycle_index);
    table.his.push_back(h);
    table.common.push_back(common);
    table.capacity_Ah.push_back(num(c_cap));
    table.soh.push_back(num(c_soh));
  }
  if (table.size() == 0) throw DataError("features table has no rows");
  return table;
}

FeatureModel fit_feature_model(const FeatureTable& table, const PipelineConfig& cfg) {
  const std::size_t n = table.size();
  const std::size_t n_train = train_count(n, cfg.train_fraction);
  const auto window = static_cast<std::size_t>(cfg.train.window_length);
  if (n_train < window) {
    throw DataError("training portion has " + std::to_string(n_train) + " cycles; need at least " +
                    std::to_string(window) + " for one window");
  }
  if (n_train >= n) throw DataError("train_fraction leaves no test cycles");

  FeatureModel model;
  model.n_train = n_train;
  model.last_train_cycle = table.cycles[n_train - 1];
  model.input_mode = cfg.input_mode;
  const std::span<const HiVector> his(table.his.data(), n_train);
  const std::span<const double> cap(table.capacity_Ah.data(), n_train);
  model.selection = select_features(his, cap, cfg.drop_list);
  model.pca = pca_fit(model.selection.matrix, cfg.pca_dims, model.selection.columns);
  const double max_score = pca_transform(model.pca, model.selection.matrix).cwiseAbs().maxCoeff();
  model.score_scale = max_score > 0.0 ? 2.0 * max_score : 1.0;

  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> column;
    for (std::size_t i = 0; i < n_train; ++i) {
      const auto& c = table.common[i];
      column.push_back(k == 0 ? c.ccct_s : (k == 1 ? c.cvct_s : c.ccdt_s));
    }
    const auto [mn, mx] = std::minmax_element(column.begin(), column.end());
    // A constant duration carries no information; map it to 0.
    model.common_ranges[k] = {*mn, *mx > *mn ? *mx : *mn + 1.0};
  }
  return model;
}

Eigen::MatrixXd pca_scores(const FeatureModel& model, const FeatureTable& table) {
  const auto& names = HiVector::names();
  const auto& kept = model.pca.feature_names;
  std::vector<std::size_t> index;
  for (const auto& name : kept) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("feature model refers to unknown indicator '" + name + "'");
    index.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  const auto n = static_cast<Eigen::Index>(table.size());
  Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(index.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto v = table.his[static_cast<std::size_t>(i)].values();
    for (std::size_t c = 0; c < index.size(); ++c) raw(i, static_cast<Eigen::Index>(c)) = v[index[c]];
  }
  if (!raw.allFinite()) throw DataError("indicator table contains non-finite values");
  return pca_transform(model.pca, raw);
}

Eigen::MatrixXd model_inputs(const FeatureModel& model, const FeatureTable& table) {
  const Eigen::MatrixXd pcs = pca_scores(model, table) / model.score_scale;
  const auto n = static_cast<Eigen::Index>(table.size());
  if (model.input_mode == InputMode::PcaOnly) return pcs;

  Eigen::MatrixXd out(n, pcs.cols() + 3);
  out.leftCols(pcs.cols()) = pcs;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> column;
    for (const auto& c : table.common) column.push_back(k == 0 ? c.ccct_s : (k == 1 ? c.cvct_s : c.ccdt_s));
    const auto scaled = normalize_minmax(column, model.common_ranges[k]).values;
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, pcs.cols() + static_cast<Eigen::Index>(k)) = scaled[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

nlohmann::json feature_model_to_json(const FeatureModel& model, const PipelineConfig& cfg) {
  nlohmann::json j;
  j["format"] = "icsoh-features";
  j["version"] = 1;
  j["input_mode"] = std::string(to_string(model.input_mode));
  j["pca"] = pca_to_json(model.pca);
  auto pear = nlohmann::json::array();
  for (const auto& [name, r] : model.selection.pearson_vs_capacity) {
    pear.push_back({{"indicator", name}, {"pearson", std::isfinite(r) ? nlohmann::json(r) : nlohmann::json()}});
  }
  j["pearson"] = pear;
  auto ranges = nlohmann::json::array();
  for (const auto& r : model.common_ranges) ranges.push_back({r.min, r.max});
  j["common_ranges"] = ranges;
  j["score_scale"] = model.score_scale;
  j["provenance"] = {{"fitted_on", "train"},
                     {"n_train", model.n_train},
                     {"last_train_cycle", model.last_train_cycle},
                     {"train_fraction", cfg.train_fraction},
                     {"config_hash", config_hash(cfg)}};
  return j;
}

FeatureModel feature_model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "icsoh-features") throw DataError("not a feature model");
  FeatureModel m;
  const auto mode = j.at("input_mode").get<std::string>();
  if (mode != "pca_only" && mode != "pca_plus_common") throw DataError("unknown input_mode '" + mode + "'");
  m.input_mode = mode == "pca_only" ? InputMode::PcaOnly : InputMode::PcaPlusCommon;
  m.pca = pca_from_json(j.at("pca"));
  m.selection.columns = m.pca.feature_names;
  for (const auto& p : j.at("pearson")) {
    const auto& r = p.at("pearson");
    m.selection.pearson_vs_capacity.emplace_back(p.at("indicator").get<std::string>(),
                                                 r.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                             : r.get<double>());
  }
  m.score_scale = j.at("score_scale").get<double>();
  if (!(m.score_scale > 0.0)) throw DataError("feature model: score_scale must be positive");
  const auto& ranges = j.at("common_ranges");
  if (ranges.size() != 3) throw DataError("feature model: expected 3 common ranges");
  for (std::size_t k = 0; k < 3; ++k) m.common_ranges[k] = {ranges[k][0].get<double>(), ranges[k][1].get<double>()};
  const auto& prov = j.at("provenance");
  m.n_train = prov.at("n_train").get<std::size_t>();
  m.last_train_cycle = prov.at("last_train_cycle").get<int>();
  return m;
}

// ---- training and prediction ------------------------------------------------------

TrainedModels train_models(const Eigen::MatrixXd& inputs, std::span<const double> soh, std::size_t n_train,
                           const PipelineConfig& cfg) {
  const int window = cfg.train.window_length;
  if (n_train < static_cast<std::size_t>(window)) {
    throw DataError("training portion has " + std::to_string(n_train) + " cycles; need at least " +
                    std::to_string(window) + " for one window");
  }
  TrainedModels out;
  const auto pairs = make_windows(inputs, soh, static_cast<std::size_t>(window - 1), n_train, window);
  out.training_pairs = pairs.size();
  if (pairs.size() < 2) throw DataError("need at least 2 training windows for the PSO validation split");

  const auto n_fit = std::max<std::size_t>(1, pairs.size() * 4 / 5);
  const std::span<const SequencePair> fit(pairs.data(), n_fit);
  const std::span<const SequencePair> val(pairs.data() + n_fit, pairs.size() - n_fit);

  TrainConfig fitness_cfg = cfg.train;
  fitness_cfg.seed = derive_seed(cfg.seed, kStreamFitness);
  PsoConfig pso = cfg.pso;
  pso.seed = derive_seed(cfg.seed, kStreamPso);
  out.pso = pso_optimize(
      [&](int hidden, double lr) { return fitness_of_config(hidden, lr, fit, val, cfg.pso_budget_epochs, fitness_cfg); },
      cfg.search, pso);
  if (!std::isfinite(out.pso.best_fitness)) throw NumericalError("every PSO candidate diverged");

  out.ensemble = adaboost_fit(pairs, out.pso.best_hidden, out.pso.best_lr, cfg.ensemble_count,
                              derive_seed(cfg.seed, kStreamEnsemble), cfg.train);

  TrainConfig baseline_cfg = cfg.train;
  baseline_cfg.seed = derive_seed(cfg.seed, kStreamBaseline);
  out.baseline = train_bilstm(pairs, baseline_cfg, cfg.baseline_hidden, cfg.baseline_lr).network;
  return out;
}

PredictionTable predict_test(const Eigen::MatrixXd& inputs, std::span<const int> cycles,
                             std::span<const double> soh, std::size_t n_train, int window,
                             const std::map<std::string, Predictor>& predictors) {
  const auto n = static_cast<std::size_t>(inputs.rows());
  if (cycles.size() != n || soh.size() != n) throw DataError("prediction inputs have mismatched lengths");
  if (n_train >= n) throw DataError("no test cycles to predict");
  std::vector<Sequence> sequences;
  PredictionTable table;
  for (std::size_t i = n_train; i < n; ++i) {
    sequences.push_back(window_at(inputs, i, window));
    table.cycles.push_back(cycles[i]);
    table.truth.push_back(soh[i]);
  }
  for (const auto& [name, predict] : predictors) {
    auto values = predict(sequences);
    if (values.size() != sequences.size()) throw DataError("predictor '" + name + "' returned wrong count");
    table.predicted[name] = std::move(values);
  }
  return table;
}

std::string serialize_predictions_csv(const PredictionTable& table) {
  std::string out = "cycle,true_soh";
  for (const auto& [name, _] : table.predicted) out += "," + name + "_soh";
  out += '\n';
  for (std::size_t i = 0; i < table.cycles.size(); ++i) {
    out += std::to_string(table.cycles[i]) + "," + csv::format_double(table.truth[i]);
    for (const auto& [_, values] : table.predicted) out += "," + format_real(values[i]);
    out += '\n';
  }
  return out;
}

std::vector<MetricRow> metric_rows(const PredictionTable& table, const std::string& battery,
                                   const std::string& split) {
  std::vector<MetricRow> rows;
  for (const auto& [name, values] : table.predicted) {
    rows.push_back({battery, split, name, compute_metrics(table.truth, values)});
  }
  return rows;
}

std::string split_label(double train_fraction) { return csv::format_double(train_fraction * 100.0) + "%"; }

// ---- subcommands --------------------------------------------------------------------

std::string cmd_synth(const PipelineConfig& cfg) {
  cfg.synth.validate();
  const auto ds = generate_dataset(cfg.synth);
  fs::create_directories(cfg.out_dir);
  const fs::path path = fs::path(cfg.out_dir) / "synth_dataset.csv";
  csv::write_file_atomic(path, serialize_dataset_csv(ds));
  return "synthetic: " + std::to_string(ds.cycles.size()) + " cycles written to " + path.string() + "\n";
}

std::string cmd_ingest(const PipelineConfig& cfg) {
  cfg.validate();
  ParseReport report;
  const auto ds = acquire_dataset(cfg, report);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  csv::write_file_atomic(out / "dataset.csv", serialize_dataset_csv(ds));
  std::string cap = "cycle,capacity_Ah,soh\n";
  for (std::size_t i = 0; i < ds.cycles.size(); ++i) {
    cap += std::to_string(ds.cycles[i].cycle_index) + "," + csv::format_double(ds.capacities_Ah[i]) + "," +
           csv::format_double(ds.soh[i]) + "\n";
  }
  csv::write_file_atomic(out / "capacity_soh.csv", cap);
  csv::write_file_atomic(out / "parse_report.txt", report.to_text());
  return "battery " + ds.battery_id + ": " + std::to_string(ds.cycles.size()) + " cycles, capacity " +
         summarize_range(ds.capacities_Ah) + " Ah\n";
}

std::string cmd_features(const PipelineConfig& cfg) {
  cfg.validate();
  const auto ds = load_ingested(cfg);
  std::vector<IcCurve> curves;
  const auto table = compute_feature_table(ds, cfg, cfg.dump_ic_curves ? &curves : nullptr);
  const auto model = fit_feature_model(table, cfg);
  const fs::path out(cfg.out_dir);

  if (cfg.dump_ic_curves) csv::write_file_atomic(out / "ic_curves.csv", serialize_ic_curves_csv(curves));
  csv::write_file_atomic(out / "features.csv", serialize_feature_table_csv(table));

  std::string pear = "indicator,pearson,abs_pearson,kept\n";
  for (const auto& [name, r] : model.selection.pearson_vs_capacity) {
    const bool kept = std::find(model.selection.columns.begin(), model.selection.columns.end(), name) !=
                      model.selection.columns.end();
    pear += name + "," + format_real(r) + "," + format_real(std::abs(r)) + "," + (kept ? "yes" : "no") + "\n";
  }
  csv::write_file_atomic(out / "pearson.csv", pear);
  csv::write_file_atomic(out / "pca_model.json", feature_model_to_json(model, cfg).dump(2) + "\n");

  std::string report = "component,eigenvalue,contribution_percent,cumulative_percent\n";
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < model.pca.eigenvalues.size(); ++k) {
    cumulative += model.pca.contribution_rates(k);
    report += std::to_string(k + 1) + "," + csv::format_double(model.pca.eigenvalues(k)) + "," +
              csv::format_double(100.0 * model.pca.contribution_rates(k)) + "," +
              csv::format_double(100.0 * cumulative) + "\n";
  }
  csv::write_file_atomic(out / "pca_report.csv", report);

  const Eigen::MatrixXd scores = pca_scores(model, table);
  std::string pcs = "cycle,portion";
  for (Eigen::Index k = 0; k < model.pca.dims(); ++k) pcs += ",pc" + std::to_string(k + 1);
  pcs += '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    pcs += std::to_string(table.cycles[i]) + (i < model.n_train ? ",train" : ",test");
    for (Eigen::Index k = 0; k < model.pca.dims(); ++k) {
      pcs += "," + csv::format_double(scores(static_cast<Eigen::Index>(i), k));
    }
    pcs += '\n';
  }
  csv::write_file_atomic(out / "pca_features.csv", pcs);

  std::string summary = "features: " + std::to_string(table.size()) + " cycles, kept";
  for (const auto& c : model.selection.columns) summary += " " + c;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "; first component %.2f%%\n", 100.0 * model.pca.contribution_rates(0));
  summary += buf;
  for (const auto& note : table.notes) summary += "  " + note + "\n";
  return summary;
}

std::string cmd_train(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path out(cfg.out_dir);
  const auto table = load_feature_table(cfg);
  const auto fm_json = load_json(out / "pca_model.json");
  const auto model = feature_model_from_json(fm_json);
  const double fitted_fraction = fm_json.at("provenance").at("train_fraction").get<double>();
  if (fitted_fraction != cfg.train_fraction || model.input_mode != cfg.input_mode) {
    throw ConfigError("features were fitted with train_fraction " + csv::format_double(fitted_fraction) +
                      " and input_mode " + std::string(to_string(model.input_mode)) + "; rerun features");
  }
  const Eigen::MatrixXd inputs = model_inputs(model, table);
  const auto trained = train_models(inputs, table.soh, model.n_train, cfg);

  const std::string hash = config_hash(cfg);
  save_ensemble(trained.ensemble, out / "model", hash);
  csv::write_file_atomic(out / "model" / "baseline.json", network_to_json(trained.baseline).dump() + "\n");
  csv::write_file_atomic(out / "pso_trace.csv", serialize_pso_trace_csv(trained.pso));

  nlohmann::json pre;
  pre["format"] = "icsoh-preprocessing";
  pre["version"] = 1;
  pre["config_hash"] = hash;
  pre["window_length"] = cfg.train.window_length;
  pre["input_dims"] = inputs.cols();
  pre["training_pairs"] = trained.training_pairs;
  pre["features"] = fm_json;
  pre["pso"] = {{"best_hidden", trained.pso.best_hidden},
                {"best_lr", trained.pso.best_lr},
                {"best_fitness", trained.pso.best_fitness},
                {"validation_split", "chronological 80/20 of training pairs"}};
  pre["baseline"] = {{"hidden", cfg.baseline_hidden}, {"lr", cfg.baseline_lr}};
  pre["provenance"] = {{"fitted_on", "train"},
                       {"n_train", model.n_train},
                       {"last_train_cycle", model.last_train_cycle}};
  csv::write_file_atomic(out / "preprocessing.json", pre.dump(2) + "\n");
  csv::write_file_atomic(out / "config.txt", pipeline_config_to_text(cfg));

  char buf[160];
  std::snprintf(buf, sizeof(buf), "train: %zu pairs, PSO best hidden %d lr %.3g (val RMSE %.4g), %zu learners\n",
                trained.training_pairs, trained.pso.best_hidden, trained.pso.best_lr, trained.pso.best_fitness,
                trained.ensemble.learners.size());
  std::string summary = buf;
  for (const auto& w : trained.ensemble.warnings) summary += "  warning: " + w + "\n";
  return summary;
}

std::string cmd_predict(const PipelineConfig& cfg) {
  cfg.validate();
  const auto table = load_feature_table(cfg);
  const auto models = load_models(cfg);
  const auto predictions = predict_with_models(models, table);
  csv::write_file_atomic(fs::path(cfg.out_dir) / "predictions.csv", serialize_predictions_csv(predictions));
  std::string summary = "predict: " + std::to_string(predictions.cycles.size()) + " test cycles\n";
  if (models.stored_hash != config_hash(cfg)) summary += "  note: model was trained under a different config hash\n";
  return summary;
}

std::string cmd_eval(const PipelineConfig& cfg) {
  cfg.validate();
  const auto table = load_feature_table(cfg);
  const auto models = load_models(cfg);
  const auto predictions = predict_with_models(models, table);
  const fs::path out(cfg.out_dir);
  csv::write_file_atomic(out / "predictions.csv", serialize_predictions_csv(predictions));
  const std::string battery = cfg.dataset_path.empty() ? "synthetic" : cfg.ingest.battery_id;
  const auto rows = metric_rows(predictions, battery, split_label(cfg.train_fraction));
  csv::write_file_atomic(out / "metrics.csv", serialize_metrics_csv(rows));
  std::string summary;
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s %s: RMSE %.5f MAE %.5f\n", r.split.c_str(), r.model.c_str(), r.report.rmse,
                  r.report.mae);
    summary += buf;
  }
  return summary;
}

std::string cmd_all(const PipelineConfig& cfg) {
  std::string summary = cmd_ingest(cfg);
  summary += cmd_features(cfg);
  summary += cmd_train(cfg);
  summary += cmd_eval(cfg);
  return summary;
}

}  // namespace icsoh
