#include "kinetic/experiments.hpp"

#include "kinetic/acceptance.hpp"
#include "kinetic/csv.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/parallel.hpp"
#include "kinetic/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace kinetic {

namespace fs = std::filesystem;
using nlohmann::json;

CollisionKernel kernel_from_config(const KernelConfig& k) {
  if (k.type == "separable") return CollisionKernel::separable(k.alpha, k.vmax);
  if (k.type == "perturbed")
    return CollisionKernel::perturbed(k.alpha, k.beta, k.psi == "linear" ? PsiKind::Linear : PsiKind::Sign, k.vmax);
  if (k.type == "tabulated") return CollisionKernel::tabulated(CollisionKernel::load_table_csv(k.table_path), k.vmax);
  fail(ErrorCode::ConfigError, "invalid value '" + k.type + "' for 'kernel.type'");
}

Model scenario_model(const ScenarioConfig& cfg, int n_v) {
  return with_n0(build_model(kernel_from_config(cfg.kernel), VelocityGrid::midpoint(n_v, cfg.kernel.vmax)));
}

Model scenario_model(const ScenarioConfig& cfg) { return scenario_model(cfg, cfg.n_v); }

double initial_power(const ScenarioConfig& cfg, const Model& model) {
  if (cfg.initial.power) return *cfg.initial.power;
  if (!model.n0) fail(ErrorCode::InvalidArgument, "initial power defaults to N0, which is unknown");
  return *model.n0;
}

StateField initial_field(const Model& model, int P, double power) {
  Vec g = model.sigma.array().pow(power);
  const double m = g.dot(model.w());
  if (!(m > 0.0) || !std::isfinite(m)) fail(ErrorCode::UnboundedInitialData, "sigma^power has no finite mass");
  g /= m;
  StateField f(P, model.size());
  f.mode(0) = g.cast<cplx>();
  if (P >= 1) {
    f.mode(1) = 0.5 * g.cast<cplx>();
    f.mode(-1) = 0.5 * g.cast<cplx>();
  }
  return f;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return out;
}

std::vector<double> logspace(double a, double b, int n) {
  std::vector<double> out = linspace(std::log(a), std::log(b), n);
  for (double& x : out) x = std::exp(x);
  if (n > 1) {
    out.front() = a;
    out.back() = b;
  }
  return out;
}

std::vector<double> decay_times(const TimeConfig& tc) {
  std::vector<double> ts = logspace(tc.t_min, tc.t_max, tc.t_points);
  for (double e : {tc.fit_lo, tc.fit_hi})
    if (e >= tc.t_min && e <= tc.t_max) ts.push_back(e);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

LinearFit fit_loglog_slope(const std::vector<double>& t, const std::vector<double>& y, double lo, double hi) {
  if (t.size() != y.size()) fail(ErrorCode::InvalidArgument, "series lengths differ");
  std::vector<double> lx, ly;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < lo || t[i] > hi) continue;
    if (!(t[i] > 0.0) || !(y[i] > 0.0)) fail(ErrorCode::InvalidArgument, "log-log fit needs positive values");
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 5) fail(ErrorCode::InsufficientPoints, "fewer than 5 points in the fit window");
  return ols(lx, ly);
}

SteadyState run_steady(const Model& model) {
  SteadyState s;
  s.phi0 = invariant_velocity_density(model);
  s.psi = invariant_density(model, s.phi0);
  s.mu_prime0 = mu_prime_zero(model, s.phi0);
  return s;
}

namespace {

PropagatorOptions propagator(const ScenarioConfig& cfg) {
  PropagatorOptions opt;
  opt.term_tol = cfg.tolerances.term_tol;
  opt.threads = cfg.threads;
  return opt;
}

StateField equilibrium(const Vec& psi, int P, double rho) {
  StateField eq(P, static_cast<int>(psi.size()));
  eq.mode(0) = rho * psi.cast<cplx>();
  return eq;
}

double mode_norm(const Model& model, const CVec& f) { return f.cwiseAbs().dot(model.w()); }

}  // namespace

DecayReport run_decay(const ScenarioConfig& cfg, const Model& model, const Vec& psi) {
  if (!model.n0) fail(ErrorCode::InvalidArgument, "decay needs N0 on the model");
  DecayReport r;
  r.n0 = *model.n0;
  r.predicted_exponent = -(r.n0 - 1.0);
  r.fit_lo = cfg.time.fit_lo;
  r.fit_hi = cfg.time.fit_hi;
  r.config_hash = config_hash(cfg);
  r.n_v = model.size();
  r.P = cfg.P;
  const StateField f = initial_field(model, cfg.P, initial_power(cfg, model));
  r.initial_norm = xs_norm(model, f, r.n0);
  if (!(r.initial_norm <= cfg.tolerances.unbounded_initial))
    fail(ErrorCode::UnboundedInitialData, "||f0||_{X_N0} exceeds the configured limit");
  const std::vector<double> ts = decay_times(cfg.time);
  r.rows = relaxation_series(model, f, psi, ts, cfg.time.n_partial, propagator(cfg));
  std::vector<double> t, d;
  for (const auto& row : r.rows) {
    r.envelope.push_back(row.partial_sum_norm * std::pow(row.t / std::log(row.t), r.n0));
    r.eps.push_back(row.dist * std::pow(1.0 + row.t, r.n0 - 1));
    t.push_back(row.t);
    d.push_back(row.dist);
    if (row.t == r.fit_lo) r.eps_lo = r.eps.back();
    if (row.t == r.fit_hi) r.eps_hi = r.eps.back();
  }
  r.fit = fit_loglog_slope(t, d, r.fit_lo, r.fit_hi);
  return r;
}

DecayReport run_decay(const ScenarioConfig& cfg) {
  const Model model = scenario_model(cfg);
  const Vec psi = invariant_density(model, invariant_velocity_density(model));
  return run_decay(cfg, model, psi);
}

std::vector<TraceRow> run_trace(const ScenarioConfig& cfg, const Model& model, const Vec& psi) {
  const StateField f0 = initial_field(model, cfg.P, initial_power(cfg, model));
  const StateField f = f0 - equilibrium(psi, cfg.P, mass(model, f0).real());
  TraceEvaluator ev(model);
  const std::vector<double> etas = linspace(cfg.eta.min, cfg.eta.max, cfg.eta.steps);
  std::vector<TraceRow> rows(etas.size());
  parallel_for(static_cast<int>(etas.size()), cfg.threads, [&](int i) {
    const auto k = static_cast<size_t>(i);
    rows[k].eta = etas[k];
    rows[k].norm = xs_norm(model, trace_Upsilon(ev, f, cfg.eta.trace_n, etas[k], 0), 0.0);
    rows[k].norm_deriv = xs_norm(model, trace_Upsilon(ev, f, cfg.eta.trace_n, etas[k], cfg.eta.trace_deriv), 0.0);
  });
  return rows;
}

ReconReport run_reconstruction(const ScenarioConfig& cfg, const Model& model, const Vec& psi) {
  const StateField f0 = initial_field(model, cfg.P, initial_power(cfg, model));
  const StateField f = f0 - equilibrium(psi, cfg.P, mass(model, f0).real());
  const int n = cfg.laplace.n;
  const double t = cfg.laplace.t;
  const StateField oracle = remainder(model, f, t, n, propagator(cfg));
  TraceEvaluator ev(model);
  QuadratureOptions q;
  q.eta_max = cfg.laplace.eta_max;
  q.gauss_order = cfg.laplace.gauss_order;
  q.tail_tol = cfg.laplace.tail_tol;
  q.threads = cfg.threads;
  const Reconstruction rec = inverse_laplace_remainder(ev, f, n, t, q);
  const Reconstruction brom = bromwich_remainder(ev, f, n, t, cfg.laplace.eps, q);
  ReconReport r;
  r.tail_estimate = rec.tail_estimate;
  r.nodes = rec.nodes;
  r.tolerance = 1e-2 * xs_norm(model, f, model.n0.value_or(0));
  for (int p = -cfg.P; p <= cfg.P; ++p) {
    ReconRow row;
    row.component = "p=" + std::to_string(p);
    row.reconstruction_norm = mode_norm(model, rec.value.mode(p));
    row.oracle_norm = mode_norm(model, oracle.mode(p));
    row.distance = mode_norm(model, rec.value.mode(p) - oracle.mode(p));
    row.bromwich_distance = mode_norm(model, brom.value.mode(p) - oracle.mode(p));
    r.rows.push_back(row);
  }
  ReconRow total;
  total.component = "total";
  total.reconstruction_norm = xs_norm(model, rec.value, 0.0);
  total.oracle_norm = xs_norm(model, oracle, 0.0);
  total.distance = xs_norm(model, rec.value - oracle, 0.0);
  total.bromwich_distance = xs_norm(model, brom.value - oracle, 0.0);
  r.rows.push_back(total);
  r.distance = total.distance;
  r.bromwich_distance = total.bromwich_distance;
  return r;
}

McCheck run_mc_check(const ScenarioConfig& cfg) {
  if (cfg.P < 1) fail(ErrorCode::InvalidArgument, "the particle initial law needs P >= 1");
  const Model coarse = scenario_model(cfg, cfg.n_v);
  const Model fine = scenario_model(cfg, 2 * cfg.n_v);
  const double power = initial_power(cfg, coarse);
  const JumpProcess process(coarse);
  McOptions opt;
  opt.n_particles = cfg.mc.particles;
  opt.snapshots = cfg.mc.times;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  const std::vector<Ensemble> ens = simulate(process, {McInitial::CosineTimesG, power}, opt);

  auto reference = [&](const Model& m, std::vector<BinnedReference>& q) {
    const Vec psi = invariant_density(m, invariant_velocity_density(m));
    const StateField f = initial_field(m, cfg.P, power);
    for (double t : cfg.mc.times) q.push_back(bin_field(m, semigroup_apply(m, f, t, propagator(cfg)), cfg.mc.bins_x,
                                                        cfg.mc.bins_v));
    return bin_field(m, StateField::homogeneous(psi.cast<cplx>()), cfg.mc.bins_x, cfg.mc.bins_v);
  };
  std::vector<BinnedReference> qc, qf;
  const BinnedReference rc = reference(coarse, qc);
  const BinnedReference rf = reference(fine, qf);

  McCheck out;
  out.particles = cfg.mc.particles;
  out.pass = true;
  for (size_t s = 0; s < cfg.mc.times.size(); ++s) {
    McRow row;
    row.t = cfg.mc.times[s];
    const DistanceEstimate d = empirical_distance(ens[s], rc, cfg.mc.groups);
    row.distance = d.estimate;
    row.error_bar = d.error_bar;
    row.predicted = expected_histogram_distance(qc[s].prob, rc.prob, cfg.mc.particles);
    row.slack = std::abs(expected_histogram_distance(qf[s].prob, rf.prob, cfg.mc.particles) - row.predicted);
    for (size_t b = 0; b < rc.prob.size(); ++b) row.binned_distance += std::abs(qc[s].prob[b] - rc.prob[b]);
    row.pass = std::abs(row.distance - row.predicted) <= 3.0 * row.error_bar + row.slack;
    out.pass = out.pass && row.pass;
    out.rows.push_back(row);
  }

  McOptions st = opt;
  st.snapshots = {cfg.mc.stationary_t};
  st.seed = cfg.seed + 1;
  const Ensemble stat = simulate(process, {McInitial::Stationary, 0.0}, st).front();
  const Vec psi = invariant_density(coarse, invariant_velocity_density(coarse));
  std::vector<double> r(static_cast<size_t>(cfg.mc.bins_v), 0.0);
  const int per = coarse.size() / cfg.mc.bins_v;
  for (int j = 0; j < coarse.size(); ++j) r[static_cast<size_t>(j / per)] += psi[j] * coarse.w()[j];
  out.stationarity = velocity_marginal_test(stat, r, coarse.grid.vmax);
  out.pass = out.pass && out.stationarity.pass;
  return out;
}

std::string write_steady_csv(const std::string& path, const Model& model, const SteadyState& s) {
  CsvWriter w(path, {"v", "weight", "sigma", "phi0", "psi"});
  for (int j = 0; j < model.size(); ++j) w.row({model.v()[j], model.w()[j], model.sigma[j], s.phi0[j], s.psi[j]});
  return path;
}

std::string write_decay_csv(const std::string& path, const DecayReport& r) {
  CsvWriter w(path, {"t", "dist_X0", "partial_sum_norm", "envelope", "remainder_norm", "eps"});
  for (size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    w.row({row.t, row.dist, row.partial_sum_norm, r.envelope[i], row.remainder_norm, r.eps[i]});
  }
  return path;
}

std::string write_decay_json(const std::string& path, const DecayReport& r) {
  json doc = {{"slope", r.fit.slope},
              {"slope_stderr", r.fit.slope_stderr},
              {"fit_points", r.fit.points},
              {"fit_window", {r.fit_lo, r.fit_hi}},
              {"predicted_exponent", r.predicted_exponent},
              {"n0", r.n0},
              {"eps_at_window_start", r.eps_lo},
              {"eps_at_window_end", r.eps_hi},
              {"initial_norm_XN0", r.initial_norm},
              {"config_hash", r.config_hash},
              {"n_v", r.n_v},
              {"P", r.P}};
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << doc.dump(2) << "\n";
  return path;
}

std::string write_scan_csv(const std::string& path, const ScanResult& s) {
  std::vector<std::string> header{"eta", "norm_M2", "norm_RK2"};
  for (int q : s.powers) header.push_back("norm_M" + std::to_string(q));
  header.push_back("envelope_product");
  CsvWriter w(path, header);
  for (const auto& row : s.rows) {
    std::vector<CsvCell> cells{row.eta, row.norm_M2, row.norm_RK2};
    for (double v : row.norm_Mq) cells.emplace_back(v);
    cells.emplace_back(row.envelope_product);
    w.row(cells);
  }
  return path;
}

std::string write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  CsvWriter w(path, {"eta", "X0_norm", "X0_norm_deriv"});
  for (const auto& r : rows) w.row({r.eta, r.norm, r.norm_deriv});
  return path;
}

std::string write_recon_csv(const std::string& path, const ReconReport& r) {
  CsvWriter w(path, {"component", "reconstruction_norm", "oracle_norm", "oracle_distance", "bromwich_distance"});
  for (const auto& row : r.rows)
    w.row({row.component, row.reconstruction_norm, row.oracle_norm, row.distance, row.bromwich_distance});
  return path;
}

std::string write_mc_csv(const std::string& path, const McCheck& m) {
  CsvWriter w(path, {"t", "mc_distance", "error_bar", "predicted", "grid_slack", "binned_distance", "pass"});
  for (const auto& r : m.rows)
    w.row({r.t, r.distance, r.error_bar, r.predicted, r.slack, r.binned_distance, static_cast<long long>(r.pass)});
  return path;
}

std::string write_ensemble_csv(const std::string& path, const Ensemble& e) {
  CsvWriter w(path, {"t", "x", "v"});
  for (size_t i = 0; i < e.x.size(); ++i) w.row({e.t, e.x[i], e.v[i]});
  return path;
}

std::string write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries,
                           const std::string& hash) {
  json items = json::array();
  for (const auto& e : entries) {
    items.push_back({{"criterion_id", e.criterion_id},
                     {"status", e.status},
                     {"measured", std::isfinite(e.measured) ? json(e.measured) : json(nullptr)},
                     {"gate", e.gate},
                     {"artifact_path", e.artifact_path},
                     {"detail", e.detail}});
  }
  json doc = {{"config_hash", hash}, {"items", items}};
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << doc.dump(2) << "\n";
  return path;
}

SuiteResult run_suite(const ScenarioConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream echo(dir / "effective_config.json", std::ios::binary);
    if (!echo) fail(ErrorCode::IoError, "cannot write effective_config.json");
    echo << config_to_json(cfg) << "\n";
  }
  SuiteResult res;
  const bool all = cfg.kind == "suite";
  auto artifact = [&](const std::string& id, const std::string& file, auto&& body) {
    ManifestEntry e;
    e.criterion_id = id;
    e.artifact_path = file;
    e.gate = "completes";
    try {
      body((dir / file).string(), e);
      e.status = "pass";
    } catch (const std::exception& ex) {
      e.status = "error";
      e.detail = ex.what();
      res.all_pass = false;
    }
    res.entries.push_back(e);
  };

  std::optional<Model> model;
  Vec psi;
  artifact("steady", "steady.csv", [&](const std::string& path, ManifestEntry& e) {
    model = scenario_model(cfg);
    const SteadyState s = run_steady(*model);
    psi = s.psi;
    e.measured = s.mu_prime0;
    if (all || cfg.kind == "steady") write_steady_csv(path, *model, s);
    else e.artifact_path.clear();
  });
  if (model) {
    if (all || cfg.kind == "decay")
      artifact("decay", "decay.csv", [&](const std::string& path, ManifestEntry& e) {
        const DecayReport r = run_decay(cfg, *model, psi);
        write_decay_csv(path, r);
        write_decay_json((dir / "decay.json").string(), r);
        e.measured = r.fit.slope;
      });
    if (all || cfg.kind == "scan")
      artifact("scan", "scan.csv", [&](const std::string& path, ManifestEntry& e) {
        const ScanResult s = norm_decay_scan(*model, cfg.eta.mode, linspace(cfg.eta.min, cfg.eta.max, cfg.eta.steps),
                                             cfg.eta.powers, cfg.threads);
        write_scan_csv(path, s);
        e.measured = s.envelope_constant;
      });
    if (all || cfg.kind == "laplace") {
      artifact("trace", "trace.csv", [&](const std::string& path, ManifestEntry& e) {
        const auto rows = run_trace(cfg, *model, psi);
        write_trace_csv(path, rows);
        e.measured = rows.empty() ? 0.0 : rows.front().norm;
      });
      artifact("recon", "recon.csv", [&](const std::string& path, ManifestEntry& e) {
        const ReconReport r = run_reconstruction(cfg, *model, psi);
        write_recon_csv(path, r);
        e.measured = r.distance;
      });
    }
  }
  if (all || cfg.kind == "mc")
    artifact("mc", "mc.csv", [&](const std::string& path, ManifestEntry& e) {
      const McCheck m = run_mc_check(cfg);
      write_mc_csv(path, m);
      e.measured = m.stationarity.distance;
    });

  AcceptanceContext ctx;
  ctx.out_dir = out_dir;
  ctx.threads = cfg.threads;
  ctx.seed = cfg.seed;
  for (const auto& id : cfg.criteria) {
    const CriterionResult c = run_criterion(id, ctx);
    ManifestEntry e{c.id, c.status, c.measured, c.gate, c.artifact_path, c.detail};
    if (c.status != "pass") res.all_pass = false;
    res.entries.push_back(e);
  }
  res.manifest_path = write_manifest((dir / "manifest.json").string(), res.entries, config_hash(cfg));
  return res;
}

}  // namespace kinetic
