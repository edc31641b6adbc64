// kinlab: command-line front end for the kinetic relaxation library.
#include "kinetic/csv.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/experiments.hpp"
#include "kinetic/spectral.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace kinetic;

namespace {

struct Globals {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool seed_set = false;
};

ScenarioConfig resolve(const Globals& g) {
  ScenarioConfig cfg = g.config.empty() ? default_config() : load_config(g.config);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed_set) cfg.seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  return cfg;
}

std::string output_path(const ScenarioConfig& cfg, const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) p = fs::path(cfg.out_dir) / p;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p.string();
}

std::vector<double> parse_eta_grid(const std::string& spec) {
  // min:max:steps
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(ErrorCode::ConfigError, "invalid --eta-grid '" + spec + "', expected min:max:steps");
    }
  }
  if (parts.size() != 3 || parts[2] < 1) fail(ErrorCode::ConfigError, "invalid --eta-grid '" + spec + "'");
  return {parts[0], parts[1], parts[2]};
}

Vec steady_psi(const Model& m) { return invariant_density(m, invariant_velocity_density(m)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic relaxation toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON scenario config");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { g.seed = s, g.seed_set = true; }, "random seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  auto* info = app.add_subcommand("model-info", "print grid, moments and N0");

  auto* steady = app.add_subcommand("steady", "invariant density table");
  std::string steady_out = "steady.csv";
  steady->add_option("--out", steady_out);

  auto* eig = app.add_subcommand("eig", "leading eigenvalue of M_lambda on mode 0");
  double lre = 0.0, lim = 0.0;
  eig->add_option("--lambda-re", lre);
  eig->add_option("--lambda-im", lim);

  auto* decay = app.add_subcommand("decay", "relaxation experiment");
  double tmax = -1.0;
  int tpoints = -1, npartial = -1;
  std::string decay_out = "decay.csv";
  decay->add_option("--tmax", tmax);
  decay->add_option("--tpoints", tpoints);
  decay->add_option("--n-partial", npartial);
  decay->add_option("--out", decay_out);

  auto* scan = app.add_subcommand("scan-norms", "norms of M_{i eta} powers");
  int smode = 2, ssteps = -1;
  double emin = 0.0, emax = 0.0;
  std::vector<int> powers;
  std::string scan_out = "scan.csv";
  auto* mode_opt = scan->add_option("--mode", smode);
  auto* emin_opt = scan->add_option("--eta-min", emin);
  auto* emax_opt = scan->add_option("--eta-max", emax);
  scan->add_option("--eta-steps", ssteps);
  scan->add_option("--powers", powers)->delimiter(',');
  scan->add_option("--out", scan_out);

  auto* lap = app.add_subcommand("laplace", "trace functions and inverse Laplace reconstruction");
  lap->require_subcommand(1);
  auto* recon = lap->add_subcommand("reconstruct", "S_{n+1}(t) f by quadrature on the imaginary axis");
  int rn = -1;
  double rt = -1.0, reta = -1.0;
  std::string recon_out = "recon.csv";
  recon->add_option("--n", rn);
  recon->add_option("--t", rt);
  recon->add_option("--eta-max", reta);
  recon->add_option("--out", recon_out);
  auto* trace = lap->add_subcommand("trace", "norms of Upsilon_n and its derivative");
  int tn = -1, tderiv = -1;
  std::string eta_grid, trace_out = "trace.csv";
  trace->add_option("--n", tn);
  trace->add_option("--deriv", tderiv);
  trace->add_option("--eta-grid", eta_grid, "min:max:steps");
  trace->add_option("--out", trace_out);

  auto* mc = app.add_subcommand("mc", "Monte Carlo cross-check");
  long long particles = -1;
  std::vector<double> mc_times;
  std::string mc_out = "mc.csv";
  mc->add_option("--particles", particles);
  mc->add_option("--t", mc_times)->delimiter(',');
  mc->add_option("--out", mc_out);

  auto* suite = app.add_subcommand("suite", "all artifacts and acceptance items from the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ScenarioConfig cfg = resolve(g);
    fs::create_directories(cfg.out_dir);
    if (info->parsed()) {
      const Model m = scenario_model(cfg);
      nlohmann::json doc = {{"n_v", m.size()},
                            {"vmax", m.grid.vmax},
                            {"sigma_sup", m.sigma_sup},
                            {"sigma_min", m.sigma.minCoeff()},
                            {"theta1_sup", theta(m, 1.0).sup},
                            {"theta2_sup", theta(m, 2.0).sup},
                            {"N0", m.n0 ? nlohmann::json(*m.n0) : nlohmann::json(nullptr)},
                            {"config_hash", config_hash(cfg)}};
      std::cout << doc.dump(2) << "\n";
    } else if (steady->parsed()) {
      const Model m = scenario_model(cfg);
      const SteadyState s = run_steady(m);
      std::cout << write_steady_csv(output_path(cfg, steady_out), m, s) << "\n";
    } else if (eig->parsed()) {
      const Model m = scenario_model(cfg);
      const cplx lambda(lre, lim);
      const Eigenpair ep = leading_eigenpair(m, lambda, 0);
      CVec ev = eigenvalues(M_op(m, lambda, 0).mat);
      std::vector<double> mags;
      for (Eigen::Index i = 0; i < ev.size(); ++i) mags.push_back(std::abs(ev[i]));
      std::sort(mags.rbegin(), mags.rend());
      const double gap = mags.size() > 1 ? mags[0] - mags[1] : 0.0;
      const double mp = mu_prime_zero(m, invariant_velocity_density(m));
      std::cout << "mu " << format_number(ep.mu.real()) << " " << format_number(ep.mu.imag()) << "\n"
                << "gap " << format_number(gap) << "\n"
                << "mu_prime0 " << format_number(mp) << "\n";
    } else if (decay->parsed()) {
      if (tmax > 0.0) cfg.time.t_max = tmax;
      if (tpoints > 0) cfg.time.t_points = tpoints;
      if (npartial >= 0) cfg.time.n_partial = npartial;
      cfg.time.fit_hi = std::min(cfg.time.fit_hi, cfg.time.t_max);
      const DecayReport r = run_decay(cfg);
      const std::string path = output_path(cfg, decay_out);
      write_decay_csv(path, r);
      write_decay_json(fs::path(path).replace_extension(".json").string(), r);
      std::cout << "slope " << format_number(r.fit.slope) << " +- " << format_number(r.fit.slope_stderr)
                << " predicted " << format_number(r.predicted_exponent) << "\n";
    } else if (scan->parsed()) {
      if (mode_opt->count()) cfg.eta.mode = smode;
      if (emin_opt->count()) cfg.eta.min = emin;
      if (emax_opt->count()) cfg.eta.max = emax;
      if (ssteps > 0) cfg.eta.steps = ssteps;
      if (!powers.empty()) cfg.eta.powers = powers;
      const Model m = scenario_model(cfg);
      const ScanResult s =
          norm_decay_scan(m, cfg.eta.mode, linspace(cfg.eta.min, cfg.eta.max, cfg.eta.steps), cfg.eta.powers,
                          cfg.threads);
      write_scan_csv(output_path(cfg, scan_out), s);
      std::cout << "envelope_constant " << format_number(s.envelope_constant) << "\n";
    } else if (recon->parsed()) {
      if (rn >= 0) cfg.laplace.n = rn;
      if (rt >= 0.0) cfg.laplace.t = rt;
      if (reta > 0.0) cfg.laplace.eta_max = reta;
      const Model m = scenario_model(cfg);
      const ReconReport r = run_reconstruction(cfg, m, steady_psi(m));
      write_recon_csv(output_path(cfg, recon_out), r);
      std::cout << "oracle_distance " << format_number(r.distance) << " bromwich_distance "
                << format_number(r.bromwich_distance) << " tolerance " << format_number(r.tolerance) << "\n";
    } else if (trace->parsed()) {
      if (tn >= 0) cfg.eta.trace_n = tn;
      if (tderiv >= 0) cfg.eta.trace_deriv = tderiv;
      if (!eta_grid.empty()) {
        const auto gr = parse_eta_grid(eta_grid);
        cfg.eta.min = gr[0];
        cfg.eta.max = gr[1];
        cfg.eta.steps = static_cast<int>(gr[2]);
      }
      const Model m = scenario_model(cfg);
      write_trace_csv(output_path(cfg, trace_out), run_trace(cfg, m, steady_psi(m)));
    } else if (mc->parsed()) {
      if (particles > 0) cfg.mc.particles = particles;
      if (!mc_times.empty()) cfg.mc.times = mc_times;
      const McCheck r = run_mc_check(cfg);
      write_mc_csv(output_path(cfg, mc_out), r);
      for (const auto& row : r.rows)
        std::cout << "t " << format_number(row.t) << " D " << format_number(row.distance) << " +- "
                  << format_number(row.error_bar) << " predicted " << format_number(row.predicted)
                  << (row.pass ? " PASS" : " FAIL") << "\n";
      std::cout << "stationarity " << (r.stationarity.pass ? "PASS" : "FAIL") << "\n";
      return r.pass ? 0 : 1;
    } else if (suite->parsed()) {
      const SuiteResult r = run_suite(cfg, cfg.out_dir);
      for (const auto& e : r.entries)
        std::cout << e.criterion_id << " " << (e.status == "pass" ? "PASS" : e.status == "fail" ? "FAIL" : "ERROR")
                  << " " << e.gate << (e.detail.empty() ? "" : " [" + e.detail + "]") << "\n";
      std::cout << "manifest " << r.manifest_path << "\n";
      return r.all_pass ? 0 : 1;
    }
  } catch (const KineticError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
