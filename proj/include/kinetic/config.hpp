#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kinetic {

struct KernelConfig {
  std::string type = "separable";  // separable | perturbed | tabulated
  double alpha = 0.5;
  double beta = 0.0;
  std::string psi = "sign";  // sign | linear, perturbed only
  double vmax = 1.0;
  std::string table_path;
};

struct InitialConfig {
  std::string type = "cosine-times-g";
  std::string g = "sigma-power";
  std::optional<double> power;  // defaults to N0 once the model is built
};

struct TimeConfig {
  double t_min = 2.718281828459045;
  double t_max = 300.0;
  int t_points = 60;
  double fit_lo = 30.0;
  double fit_hi = 300.0;
  int n_partial = 3;
};

struct EtaConfig {
  int mode = 2;
  double min = 1.0;
  double max = 12.566370614359172;
  int steps = 64;
  std::vector<int> powers{2, 5};
  int trace_n = 10;
  int trace_deriv = 1;
};

struct LaplaceConfig {
  int n = 10;
  double t = 2.0;
  double eta_max = 200.0;
  double eps = 0.05;
  double tail_tol = 1e-3;
  int gauss_order = 8;
};

struct McConfig {
  long long particles = 100000;
  std::vector<double> times{5.0, 20.0, 80.0};
  int bins_x = 64;
  int bins_v = 64;
  int groups = 20;
  double stationary_t = 10.0;
};

struct ToleranceConfig {
  double term_tol = 1e-17;
  double unbounded_initial = 1e6;
};

struct ScenarioConfig {
  KernelConfig kernel;
  int n_v = 400;
  int P = 1;
  InitialConfig initial;
  std::string kind = "suite";  // suite | steady | decay | scan | laplace | mc
  TimeConfig time;
  EtaConfig eta;
  LaplaceConfig laplace;
  McConfig mc;
  ToleranceConfig tolerances;
  std::vector<std::string> criteria;  // acceptance items run by the suite
  std::string out_dir = "out";
  std::uint64_t seed = 7;
  int threads = 1;
};

std::vector<std::string> all_criteria();

// Defaults with every acceptance item enabled.
ScenarioConfig default_config();
// Parses one JSON document; unknown keys and type mismatches raise ConfigError naming the key.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
// Effective configuration with all defaults materialised; parse_config(to_json) reproduces it.
std::string config_to_json(const ScenarioConfig& cfg);
// FNV-1a 64 of the effective configuration, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace kinetic
