#pragma once

#include "kinetic/config.hpp"
#include "kinetic/dyson.hpp"
#include "kinetic/fit.hpp"
#include "kinetic/laplace.hpp"
#include "kinetic/montecarlo.hpp"

#include <string>
#include <vector>

namespace kinetic {

CollisionKernel kernel_from_config(const KernelConfig& k);
// Model with N0 attached.
Model scenario_model(const ScenarioConfig& cfg);
Model scenario_model(const ScenarioConfig& cfg, int n_v);
double initial_power(const ScenarioConfig& cfg, const Model& model);
// (1 + cos 2 pi x) g(v), g proportional to sigma^power with unit mass; P = 0 keeps only g.
StateField initial_field(const Model& model, int P, double power);
// Log-spaced grid on [t_min, t_max] with the fit-window endpoints inserted.
std::vector<double> decay_times(const TimeConfig& tc);
std::vector<double> linspace(double a, double b, int n);
std::vector<double> logspace(double a, double b, int n);

LinearFit fit_loglog_slope(const std::vector<double>& t, const std::vector<double>& y, double lo, double hi);

struct DecayReport {
  std::vector<RelaxationRow> rows;
  std::vector<double> envelope;  // partial_sum_norm (t / log t)^N0
  std::vector<double> eps;       // dist (1 + t)^(N0 - 1)
  LinearFit fit;
  double fit_lo = 0.0;
  double fit_hi = 0.0;
  int n0 = 0;
  double predicted_exponent = 0.0;  // -(N0 - 1)
  double eps_lo = 0.0;              // eps at fit_lo
  double eps_hi = 0.0;              // eps at fit_hi
  double initial_norm = 0.0;        // ||f0||_{X_N0}
  std::string config_hash;
  int n_v = 0;
  int P = 0;
};

DecayReport run_decay(const ScenarioConfig& cfg);
DecayReport run_decay(const ScenarioConfig& cfg, const Model& model, const Vec& psi);

struct SteadyState {
  Vec phi0;
  Vec psi;
  double mu_prime0 = 0.0;
};
SteadyState run_steady(const Model& model);

struct TraceRow {
  double eta = 0.0;
  double norm = 0.0;
  double norm_deriv = 0.0;
};
std::vector<TraceRow> run_trace(const ScenarioConfig& cfg, const Model& model, const Vec& psi);

struct ReconRow {
  std::string component;
  double reconstruction_norm = 0.0;
  double oracle_norm = 0.0;
  double distance = 0.0;
  double bromwich_distance = 0.0;
};
struct ReconReport {
  std::vector<ReconRow> rows;  // one per mode, then the total
  double distance = 0.0;
  double bromwich_distance = 0.0;
  double tolerance = 0.0;  // 1e-2 ||f||_{X_N0}
  double tail_estimate = 0.0;
  int nodes = 0;
};
ReconReport run_reconstruction(const ScenarioConfig& cfg, const Model& model, const Vec& psi);

struct McRow {
  double t = 0.0;
  double distance = 0.0;
  double error_bar = 0.0;
  double predicted = 0.0;
  double slack = 0.0;
  double binned_distance = 0.0;  // noise-free deterministic bin distance
  bool pass = false;
};
struct McCheck {
  std::vector<McRow> rows;
  MarginalTest stationarity;
  long long particles = 0;
  bool pass = false;
};
// MC dist(t) against the binomial expectation built from the deterministic field,
// plus the stationary-start velocity-marginal test.
McCheck run_mc_check(const ScenarioConfig& cfg);

// CSV writers; each returns the written path.
std::string write_steady_csv(const std::string& path, const Model& model, const SteadyState& s);
std::string write_decay_csv(const std::string& path, const DecayReport& r);
std::string write_decay_json(const std::string& path, const DecayReport& r);
std::string write_scan_csv(const std::string& path, const ScanResult& s);
std::string write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
std::string write_recon_csv(const std::string& path, const ReconReport& r);
std::string write_mc_csv(const std::string& path, const McCheck& m);
std::string write_ensemble_csv(const std::string& path, const Ensemble& e);

struct ManifestEntry {
  std::string criterion_id;
  std::string status;  // pass | fail | error
  double measured = 0.0;
  std::string gate;
  std::string artifact_path;
  std::string detail;
};

struct SuiteResult {
  std::vector<ManifestEntry> entries;  // artifacts first, then acceptance items
  std::string manifest_path;
  bool all_pass = true;
};

// Writes the effective config, the scenario artifacts selected by cfg.kind and the
// selected acceptance items into out_dir (created if missing), then manifest.json.
SuiteResult run_suite(const ScenarioConfig& cfg, const std::string& out_dir);
std::string write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries,
                           const std::string& hash);

}  // namespace kinetic
