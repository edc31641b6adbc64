#include "kinetic/csv.hpp"
#include "kinetic/experiments.hpp"
#include "helpers.hpp"

#include <json.hpp>

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace kinetic;
using testing_support::code_of;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("kinetic_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const KineticError& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  FAIL("expected a ConfigError");
  return {};
}

// Small decay scenario: n_v 100, 16 log-spaced times on [e, 300].
ScenarioConfig small_decay(int P, std::optional<double> power) {
  ScenarioConfig c = default_config();
  c.n_v = 100;
  c.P = P;
  c.initial.power = power;
  c.time.t_points = 16;
  c.kind = "decay";
  c.criteria.clear();
  return c;
}

}  // namespace

TEST_CASE("least squares by hand") {
  const LinearFit f = ols({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0});
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.slope_stderr == doctest::Approx(0.0));
  CHECK(f.points == 3);
  // Sxy = 7 and Sxx = 5 about the means (1.5, 1.5).
  const LinearFit g = ols({0.0, 1.0, 2.0, 3.0}, {-1.0, 2.0, 1.0, 4.0});
  CHECK(g.slope == doctest::Approx(1.4).epsilon(1e-14));
  CHECK(g.intercept == doctest::Approx(-0.6).epsilon(1e-14));
}

TEST_CASE("log-log slope of synthetic series") {
  const std::vector<double> t = logspace(30.0, 300.0, 20);
  std::vector<double> pw, lg, cst;
  for (double s : t) {
    pw.push_back(std::pow(s, -2.0));
    lg.push_back(std::log(s) / s);
    cst.push_back(3.5);
  }
  CHECK(std::abs(fit_loglog_slope(t, pw, 30.0, 300.0).slope + 2.0) <= 1e-12);
  CHECK(std::abs(fit_loglog_slope(t, cst, 30.0, 300.0).slope) <= 1e-12);
  // d log y / d log t = -1 + 1 / log t, so the fitted slope lies between its values at the window ends.
  const double s = fit_loglog_slope(t, lg, 30.0, 300.0).slope;
  CHECK(s >= -1.0 + 1.0 / std::log(300.0));
  CHECK(s <= -1.0 + 1.0 / std::log(30.0));
  CHECK(s > -1.0);
  CHECK(fit_loglog_slope(t, pw, 30.0, 300.0).points == 20);
}

// On [30, 300] the local slope of log(t) / t runs from -0.706 to -0.825.
TEST_CASE("log-corrected series fits a slope in (-1, -0.8)" * doctest::should_fail()) {
  const std::vector<double> t = logspace(30.0, 300.0, 20);
  std::vector<double> lg;
  for (double s : t) lg.push_back(std::log(s) / s);
  const double s = fit_loglog_slope(t, lg, 30.0, 300.0).slope;
  CHECK(s > -1.0);
  CHECK(s < -0.8);
}

TEST_CASE("fit window errors") {
  const std::vector<double> t = logspace(1.0, 1000.0, 30);
  std::vector<double> y(t.size(), 1.0);
  CHECK(code_of([&] { fit_loglog_slope(t, y, 500.0, 600.0); }) == ErrorCode::InsufficientPoints);
  y[25] = 0.0;
  CHECK(code_of([&] { fit_loglog_slope(t, y, 1.0, 1000.0); }) == ErrorCode::InvalidArgument);
  // A non-positive value outside the window is ignored.
  CHECK(fit_loglog_slope(t, y, 1.0, 100.0).points >= 5);
}

TEST_CASE("decay time grid carries the fit window endpoints") {
  TimeConfig tc;
  tc.t_points = 7;
  tc.fit_lo = 31.0;
  const std::vector<double> ts = decay_times(tc);
  CHECK(std::count(ts.begin(), ts.end(), 31.0) == 1);
  CHECK(std::count(ts.begin(), ts.end(), 300.0) == 1);
  CHECK(ts.front() == tc.t_min);
  for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] > ts[i - 1]);
  const std::vector<double> l = linspace(0.0, 1.0, 5);
  CHECK(l[2] == doctest::Approx(0.5));
}

TEST_CASE("configuration parsing names offending keys") {
  CHECK(config_error(R"({"kernel": {"alfa": 1}})").find("kernel.alfa") != std::string::npos);
  CHECK(config_error(R"({"bogus": 1})").find("bogus") != std::string::npos);
  CHECK(config_error(R"({"grid": {"n_v": "many"}})").find("grid.n_v") != std::string::npos);
  CHECK(config_error(R"({"kernel": {"type": "gaussian"}})").find("kernel.type") != std::string::npos);
  CHECK(config_error(R"({"acceptance": {"criteria": ["A13"]}})").find("A13") != std::string::npos);
  CHECK(config_error(R"({"grid": {"n_v": 101}})").find("grid.n_v") != std::string::npos);
  CHECK(!config_error("{not json").empty());
}

TEST_CASE("effective configuration round-trips and hashes") {
  const ScenarioConfig d = default_config();
  const ScenarioConfig c = parse_config(R"({"kernel": {"alpha": 0.25}, "grid": {"n_v": 200}, "seed": 11,
                                            "initial": {"power": 4}, "time": {"fit_window": [20, 200]}})");
  CHECK(c.kernel.alpha == 0.25);
  CHECK(c.n_v == 200);
  CHECK(c.seed == 11);
  CHECK(*c.initial.power == 4.0);
  CHECK(c.time.fit_lo == 20.0);
  CHECK(c.criteria == all_criteria());
  const std::string echo = config_to_json(c);
  CHECK(config_to_json(parse_config(echo)) == echo);
  CHECK(config_hash(parse_config(echo)) == config_hash(c));
  CHECK(config_hash(c) != config_hash(d));
  CHECK(config_hash(c).size() == 16);
  CHECK(config_hash(c).find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(config_to_json(parse_config("{}")) == config_to_json(d));
  // Every default is materialised in the echo.
  const auto doc = nlohmann::json::parse(echo);
  for (const char* key : {"kernel", "grid", "modes", "initial", "experiment", "time", "eta", "laplace", "mc",
                          "tolerances", "acceptance", "output", "seed", "threads"})
    CHECK(doc.contains(key));
}

TEST_CASE("configuration files") {
  const fs::path d = scratch_dir("config");
  fs::create_directories(d);
  {
    std::ofstream out(d / "c.json");
    out << R"({"modes": {"P": 0}})";
  }
  CHECK(load_config((d / "c.json").string()).P == 0);
  CHECK(code_of([&] { load_config((d / "missing.json").string()); }) == ErrorCode::ConfigError);
  fs::remove_all(d);
}

TEST_CASE("CSV output is RFC-4180 with CRLF line ends") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.5e-300) == "-2.5e-300");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_number(std::nan("")) == "nan");

  const fs::path d = scratch_dir("csv");
  const fs::path p = d / "nested" / "out.csv";
  {
    CsvWriter w(p.string(), {"name", "value", "count"});
    w.row({std::string("x, y"), 0.25, 3LL});
    w.row({std::string("q\"t"), -1e-5, -7LL});
    CHECK(code_of([&] { w.row({1.0}); }) == ErrorCode::InvalidArgument);
  }
  CHECK(slurp(p) == "name,value,count\r\n\"x, y\",0.25,3\r\n\"q\"\"t\",-1e-05,-7\r\n");
  const auto rows = read_csv(p.string());
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "x, y");
  CHECK(rows[2][0] == "q\"t");
  CHECK(rows[2][1] == "-1e-05");
  fs::remove_all(d);
}

TEST_CASE("initial field has unit mass and the cosine profile") {
  const Model m = testing_support::config_a(100);
  const StateField f = initial_field(m, 1, 2.0);
  CHECK(mass(m, f).real() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK((f.mode(1) - 0.5 * f.mode(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.mode(0).real().isApprox(m.sigma.array().pow(2.0).matrix() / m.sigma.array().pow(2.0).matrix().dot(m.w())));
  const StateField g = initial_field(m, 0, 2.0);
  CHECK(g.P == 0);
}

TEST_CASE("equilibrium initial data stays at distance zero") {
  // For the separable kernel Psi is uniform, which is sigma^0 with unit mass.
  const DecayReport r = run_decay(small_decay(0, 0.0));
  REQUIRE(!r.rows.empty());
  for (const auto& row : r.rows) CHECK(row.dist <= 1e-9);
  CHECK(r.n0 == 2);
  CHECK(r.predicted_exponent == -1.0);
}

TEST_CASE("velocity-only data relaxes monotonically") {
  const DecayReport r = run_decay(small_decay(0, std::nullopt));
  REQUIRE(r.rows.size() >= 16);
  for (size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].dist <= r.rows[i - 1].dist + 1e-6);
  for (size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(r.rows[i].dist >= 0.0);
    CHECK(r.eps[i] == doctest::Approx(r.rows[i].dist * (1.0 + r.rows[i].t)).epsilon(1e-12));
  }
  CHECK(r.fit.points >= 5);
  CHECK(r.eps_hi > 0.0);
  CHECK(r.config_hash == config_hash(small_decay(0, std::nullopt)));
}

TEST_CASE("unbounded initial data is rejected") {
  ScenarioConfig c = small_decay(1, std::nullopt);
  c.tolerances.unbounded_initial = 1e-3;
  CHECK(code_of([&] { run_decay(c); }) == ErrorCode::UnboundedInitialData);
}

TEST_CASE("suite creates the output directory and is byte-deterministic") {
  const fs::path d = scratch_dir("suite");
  ScenarioConfig c = small_decay(1, std::nullopt);
  const fs::path a = d / "a" / "deeper", b = d / "b";
  const SuiteResult ra = run_suite(c, a.string());
  const SuiteResult rb = run_suite(c, b.string());
  CHECK(ra.all_pass);
  CHECK(fs::exists(a / "effective_config.json"));
  CHECK(fs::exists(a / "manifest.json"));
  for (const char* file : {"decay.csv", "decay.json", "effective_config.json", "manifest.json"})
    CHECK(slurp(a / file) == slurp(b / file));
  CHECK(config_to_json(parse_config(slurp(a / "effective_config.json"))) == config_to_json(c));

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(c));
  REQUIRE(manifest["items"].size() == 2);
  for (const auto& item : manifest["items"]) {
    CHECK(item["status"] == "pass");
    for (const char* key : {"criterion_id", "status", "measured", "gate", "artifact_path"}) CHECK(item.contains(key));
  }
  CHECK(manifest["items"][1]["criterion_id"] == "decay");
  const auto rows = read_csv((a / "decay.csv").string());
  CHECK(rows.front() == std::vector<std::string>{"t", "dist_X0", "partial_sum_norm", "envelope", "remainder_norm", "eps"});
  CHECK(rows.size() == 1 + decay_times(c.time).size());
  fs::remove_all(d);
}
