#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "icsoh/csv.hpp"
#include "icsoh/cycling_data.hpp"
#include "icsoh/error.hpp"

using namespace icsoh;

namespace {

CycleRecord constant_discharge(double current, double duration, double dt) {
  CycleRecord c;
  c.cycle_index = 1;
  for (double t = 0.0; t <= duration + 1e-9; t += dt) {
    c.samples.push_back({t, -current, 4.0 - 1e-4 * t, StepKind::CcDischarge});
  }
  return c;
}

std::string discharge_csv(int rows, double dt, int bad_row = -1) {
  std::string s = "cycle,time_s,current_A,voltage_V,step\n";
  for (int r = 0; r < rows; ++r) {
    s += "1," + std::to_string(r * dt) + ",-1.0,";
    s += (r == bad_row) ? std::string("abc") : std::to_string(4.1 - 0.01 * r);
    s += ",cc_discharge\n";
  }
  return s;
}

}  // namespace

TEST_CASE("parse: three rows make one cycle of three samples") {
  const std::string text =
      "cycle,time_s,current_A,voltage_V,step\n"
      "1,0,-1.0,4.1,cc_discharge\n"
      "1,1800,-1.0,3.7,cc_discharge\n"
      "1,3600,-1.0,3.0,cc_discharge\n";
  const auto result = parse_cycling_csv_text(text, CsvSchema{});
  REQUIRE(result.dataset.cycles.size() == 1);
  CHECK(result.dataset.cycles[0].samples.size() == 3);
  CHECK(result.dataset.capacities_Ah[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parse: empty input has zero usable cycles") {
  CHECK_THROWS_WITH_AS(parse_cycling_csv_text("", CsvSchema{}), doctest::Contains("zero usable cycles"), DataError);
}

TEST_CASE("parse: one bad voltage among 100 rows is skipped and reported") {
  const auto result = parse_cycling_csv_text(discharge_csv(100, 36.0, 40), CsvSchema{});
  REQUIRE(result.dataset.cycles.size() == 1);
  CHECK(result.dataset.cycles[0].samples.size() == 99);
  CHECK(result.report.rows_skipped == 1);
  CHECK(result.report.rows_read == 100);
}

TEST_CASE("parse: missing mapped column and missing file") {
  CsvSchema schema;
  schema.voltage = "Voltage(V)";
  CHECK_THROWS_WITH_AS(parse_cycling_csv_text(discharge_csv(10, 360.0), schema),
                       doctest::Contains("Voltage(V)"), DataError);
  CHECK_THROWS_WITH_AS(parse_cycling_csv("/nonexistent/cs2_35.csv", CsvSchema{}),
                       doctest::Contains("/nonexistent/cs2_35.csv"), DataError);
}

TEST_CASE("parse: raw step labels map through the schema") {
  CsvSchema schema;
  schema.step = "Step_Index";
  schema.step_labels = {{"7", StepKind::CcDischarge}};
  std::string text = "cycle,time_s,current_A,voltage_V,Step_Index\n";
  for (int r = 0; r < 11; ++r) text += "3," + std::to_string(360 * r) + ",-1.0," + std::to_string(4.0 - 0.1 * r) + ",7\n";
  const auto result = parse_cycling_csv_text(text, schema);
  REQUIRE(result.dataset.cycles.size() == 1);
  CHECK(result.dataset.cycles[0].cycle_index == 3);
  CHECK(result.dataset.capacities_Ah[0] == doctest::Approx(1.0));
}

TEST_CASE("parse: implausible cycles are dropped with a note") {
  std::string text = discharge_csv(11, 360.0);  // 1 Ah
  text += "2,0,-1.0,4.0,cc_discharge\n2,10,-1.0,3.9,cc_discharge\n";  // tiny partial cycle
  const auto result = parse_cycling_csv_text(text, CsvSchema{});
  CHECK(result.dataset.cycles.size() == 1);
  bool noted = false;
  for (const auto& m : result.report.messages) noted = noted || m.find("dropped cycle 2") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("parse: serialize then parse is idempotent") {
  std::string text = discharge_csv(11, 360.0);
  for (int r = 0; r < 11; ++r) text += "2," + std::to_string(360 * r + 0.25) + ",-0.9," + std::to_string(4.05 - 0.1 * r) + ",cc_discharge\n";
  const auto first = parse_cycling_csv_text(text, CsvSchema{}).dataset;
  const auto second = parse_cycling_csv_text(serialize_dataset_csv(first), CsvSchema{}).dataset;
  CHECK(first == second);
  CHECK(first.cycles.size() == 2);
}

TEST_CASE("parse: step kinds are inferred when no step column exists") {
  CsvSchema schema;
  schema.step = "";
  std::string text = "cycle,time_s,current_A,voltage_V\n";
  double t = 0.0;
  for (int r = 0; r < 10; ++r, t += 100) text += "1," + std::to_string(t) + ",0.55," + std::to_string(3.5 + 0.07 * r) + "\n";
  for (int r = 0; r < 5; ++r, t += 100) text += "1," + std::to_string(t) + "," + std::to_string(0.4 - 0.07 * r) + ",4.2\n";
  for (int r = 0; r <= 36; ++r, t += 100) text += "1," + std::to_string(t) + ",-1.0," + std::to_string(4.1 - 0.03 * r) + "\n";
  const auto result = parse_cycling_csv_text(text, schema);
  REQUIRE(result.dataset.cycles.size() == 1);
  const auto his = extract_common_his(result.dataset.cycles[0]);
  CHECK(his.ccct_s == doctest::Approx(900.0));
  CHECK(his.cvct_s == doctest::Approx(400.0));
  CHECK(his.ccdt_s == doctest::Approx(3600.0));
  CHECK_FALSE(his.any_missing());
}

TEST_CASE("capacity: rectangles and piecewise current") {
  CHECK(compute_cycle_capacity(constant_discharge(1.0, 3600.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(compute_cycle_capacity(constant_discharge(1.0, 2520.0, 1.0)) == doctest::Approx(0.7).epsilon(1e-12));

  // 1 A up to t = 1800 s, 0.5 A afterwards, sampled every second. The one
  // trapezoid straddling the step contributes 0.75 A.s instead of 0.5.
  CycleRecord c;
  for (int t = 0; t <= 3600; ++t) {
    c.samples.push_back({double(t), t <= 1800 ? -1.0 : -0.5, 3.9, StepKind::CcDischarge});
  }
  CHECK(compute_cycle_capacity(c) == doctest::Approx(2700.25 / 3600.0).epsilon(1e-12));
  CHECK(std::abs(compute_cycle_capacity(c) - 0.75) < 1e-4);
}

TEST_CASE("capacity: invariant to uniform resampling of a constant segment") {
  const double coarse = compute_cycle_capacity(constant_discharge(0.8, 3000.0, 10.0));
  const double fine = compute_cycle_capacity(constant_discharge(0.8, 3000.0, 0.5));
  CHECK(std::abs(coarse - fine) <= 1e-9 * coarse);
}

TEST_CASE("capacity: no discharge segment is an error") {
  CycleRecord c;
  c.samples.push_back({0.0, 0.5, 3.8, StepKind::CcCharge});
  CHECK_THROWS_AS(compute_cycle_capacity(c), DataError);
}

TEST_CASE("soh: ratio to nominal") {
  CHECK(compute_soh(0.77, 1.1) == doctest::Approx(0.70).epsilon(1e-12));
  CHECK(compute_soh(1.1, 1.1) == 1.0);
  CHECK(compute_soh(0.55, 1.1) == 0.5);
  CHECK_THROWS_AS(compute_soh(1.0, 0.0), ConfigError);
}

TEST_CASE("soh and capacity share argmax and argmin") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 1.1);
  std::vector<double> cap(50), soh(50);
  for (int i = 0; i < 50; ++i) {
    cap[i] = u(rng);
    soh[i] = compute_soh(cap[i], 1.1);
  }
  CHECK(std::max_element(cap.begin(), cap.end()) - cap.begin() == std::max_element(soh.begin(), soh.end()) - soh.begin());
  CHECK(std::min_element(cap.begin(), cap.end()) - cap.begin() == std::min_element(soh.begin(), soh.end()) - soh.begin());
}

TEST_CASE("common HIs: durations and missing steps") {
  CycleRecord c;
  for (int t = 0; t <= 3000; t += 100) c.samples.push_back({double(t), 0.55, 3.9, StepKind::CcCharge});
  for (int t = 3100; t <= 6000; t += 100) c.samples.push_back({double(t), -1.0, 3.5, StepKind::CcDischarge});
  const auto his = extract_common_his(c);
  CHECK(his.ccct_s == 3000.0);
  CHECK(his.cvct_s == 0.0);
  CHECK(his.missing_cv_charge);
  CHECK_FALSE(his.missing_cc_charge);
  CHECK(his.ccdt_s == 2900.0);

  CycleRecord profile;
  double t = 0.0;
  for (; t <= 2500.0; t += 50.0) profile.samples.push_back({t, 0.55, 3.8, StepKind::CcCharge});
  const double cv0 = t;
  for (; t <= cv0 + 1400.0; t += 50.0) profile.samples.push_back({t, 0.2, 4.2, StepKind::CvCharge});
  const double d0 = t + 100.0;
  for (t = d0; t <= d0 + 3300.0; t += 50.0) profile.samples.push_back({t, -1.0, 3.6, StepKind::CcDischarge});
  const auto p = extract_common_his(profile);
  CHECK(p.ccct_s == doctest::Approx(2500.0));
  CHECK(p.cvct_s == doctest::Approx(1400.0));
  CHECK(p.ccdt_s == doctest::Approx(3300.0));
}

TEST_CASE("normalize_minmax: fitted, applied and clamped ranges") {
  const std::vector<double> a{2, 4, 6};
  const auto n = normalize_minmax(a);
  CHECK(n.values == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(n.range.min == 2.0);
  CHECK(n.range.max == 6.0);
  const std::vector<double> five{5}, twelve{12};
  CHECK(normalize_minmax(five, MinMaxRange{0, 10}).values[0] == 0.5);
  CHECK(normalize_minmax(twelve, MinMaxRange{0, 10}).values[0] == 1.0);
  const std::vector<double> flat{3, 3};
  CHECK_THROWS_AS(normalize_minmax(flat), ConfigError);
}

TEST_CASE("normalize then denormalize recovers the input") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(3.0, 2.0);
  std::vector<double> v(40);
  for (auto& x : v) x = g(rng);
  const auto n = normalize_minmax(v);
  const auto back = denormalize_minmax(n.values, n.range);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) <= 1e-12 * std::max(1.0, std::abs(v[i])));
}

TEST_CASE("csv helpers") {
  const auto f = csv::split_line(" a , \"b,c\" ,d");
  REQUIRE(f.size() == 3);
  CHECK(f[1] == "b,c");
  double d = 0;
  CHECK(csv::parse_double("1.5", d));
  CHECK_FALSE(csv::parse_double("1.5x", d));
  CHECK_FALSE(csv::parse_double("nan", d));
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125}) {
    double r = 0;
    REQUIRE(csv::parse_double(csv::format_double(v), r));
    CHECK(r == v);
  }
}
