#include "kinetic/acceptance.hpp"

#include "kinetic/csv.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/experiments.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/spectral.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace kinetic {

namespace fs = std::filesystem;

namespace {

constexpr double kE = 2.718281828459045;
constexpr double kSlack = 1e-9;

class Recorder {
 public:
  explicit Recorder(CriterionResult& r) : r_(r) {}

  void le(const std::string& name, double value, double limit, double slack = 0.0) {
    add(name, value, limit, "<=", slack, value <= limit + slack);
  }
  void lt(const std::string& name, double value, double limit) { add(name, value, limit, "<", 0.0, value < limit); }
  void ge(const std::string& name, double value, double limit, double slack = 0.0) {
    add(name, value, limit, ">=", slack, value >= limit - slack);
  }
  void eq(const std::string& name, double value, double limit, double slack = 0.0) {
    add(name, value, limit, "==", slack, std::abs(value - limit) <= slack);
  }

 private:
  CriterionResult& r_;
  void add(const std::string& name, double value, double limit, const char* rel, double slack, bool pass) {
    r_.checks.push_back({name, value, limit, rel, slack, pass && std::isfinite(value)});
  }
};

Model config_model(double alpha, int n_v) {
  return with_n0(build_model(CollisionKernel::separable(alpha), VelocityGrid::midpoint(n_v)));
}

ScenarioConfig config_a(int n_v) {
  ScenarioConfig c = default_config();
  c.n_v = n_v;
  c.P = 1;
  c.initial.power = 2.0;
  c.criteria.clear();
  return c;
}

ScenarioConfig config_b(int n_v) {
  ScenarioConfig c = config_a(n_v);
  c.kernel.alpha = 0.25;
  c.initial.power = 4.0;
  return c;
}

// Nonnegative field g(v) (1 + a(v) cos(2 pi x + phase(v))) with |a| <= 1.
StateField random_nonnegative_field(const Model& m, std::uint64_t seed) {
  RngStream rng(seed, 0);
  StateField f(1, m.size());
  for (int j = 0; j < m.size(); ++j) {
    const double g = rng.uniform();
    const double a = rng.uniform();
    const double ph = kTwoPi * rng.uniform();
    f.mode(0)[j] = g;
    f.mode(1)[j] = 0.5 * g * a * std::exp(cplx(0.0, ph));
    f.mode(-1)[j] = std::conj(f.mode(1)[j]);
  }
  return f;
}

CVec random_nonnegative_vector(const Model& m, std::uint64_t seed) {
  RngStream rng(seed, 1);
  CVec f(m.size());
  for (int j = 0; j < m.size(); ++j) f[j] = rng.uniform();
  return f;
}

// int_0^inf of each component of fn(t) on composite Gauss-Legendre panels, stopped once the
// integrand at the panel end is below 1e-14.
std::vector<double> integrate_time(const std::function<std::vector<double>(double)>& fn, size_t outputs) {
  const GaussRule& gl = gauss_legendre(16);
  std::vector<double> acc(outputs, 0.0);
  double a = 0.0, width = 0.5;
  for (int panel = 0; panel < 100000; ++panel) {
    const double b = a + width;
    for (size_t i = 0; i < gl.nodes.size(); ++i) {
      const double t = 0.5 * (a + b) + 0.5 * width * gl.nodes[i];
      const auto v = fn(t);
      for (size_t k = 0; k < outputs; ++k) acc[k] += 0.5 * width * gl.weights[i] * v[k];
    }
    const auto end = fn(b);
    double mx = 0.0;
    for (double x : end) mx = std::max(mx, std::abs(x));
    if (mx < 1e-14) return acc;
    a = b;
    width = std::min(2.0 * width, 4.0);
  }
  fail(ErrorCode::QuadratureFailure, "time integral did not reach the truncation level");
}

std::string checks_csv(const AcceptanceContext& ctx, const CriterionResult& r) {
  const std::string file = r.id + "_checks.csv";
  CsvWriter w((fs::path(ctx.out_dir) / file).string(), {"check", "value", "relation", "limit", "slack", "pass"});
  for (const auto& c : r.checks) w.row({c.name, c.value, c.relation, c.limit, c.slack, static_cast<long long>(c.pass)});
  return file;
}

std::string path_in(const AcceptanceContext& ctx, const std::string& file) {
  return (fs::path(ctx.out_dir) / file).string();
}

// A1: column sums of M_0 on mode 0.
void a1(const AcceptanceContext&, CriterionResult& r) {
  Recorder rec(r);
  for (double alpha : {0.5, 0.25}) {
    for (int nv : {200, 400, 800}) {
      const Model m = config_model(alpha, nv);
      const CMat k = M_op(m, 0.0, 0).kernel(m);
      double dev = 0.0;
      for (int c = 0; c < m.size(); ++c) dev = std::max(dev, std::abs(k.col(c).dot(m.w().cast<cplx>()) - 1.0));
      std::ostringstream name;
      name << "max |colsum - 1| alpha=" << alpha << " n_v=" << nv;
      rec.le(name.str(), dev, 1e-12);
    }
  }
}

// A2: moment sups and N0.
void a2(const AcceptanceContext&, CriterionResult& r) {
  Recorder rec(r);
  const int levels[] = {500, 1000, 2000};
  double err1[3], err2[3];
  for (int i = 0; i < 3; ++i) {
    const Model m = config_model(0.5, levels[i]);
    err1[i] = std::abs(theta(m, 1.0).sup - 1.5) / 1.5;
    err2[i] = std::abs(theta(m, 2.0).sup - 3.0) / 3.0;
  }
  rec.le("rel err sup theta_1 n_v=2000", err1[2], 0.02);
  rec.le("rel err sup theta_2 n_v=2000", err2[2], 0.02);
  for (int i = 1; i < 3; ++i) {
    rec.le("theta_1 error n_v=" + std::to_string(levels[i]) + " vs coarser", err1[i], err1[i - 1]);
    rec.le("theta_2 error n_v=" + std::to_string(levels[i]) + " vs coarser", err2[i], err2[i - 1]);
  }
  for (auto [alpha, want] : {std::pair{0.5, 2}, std::pair{0.25, 4}}) {
    const Model m = build_model(CollisionKernel::separable(alpha), VelocityGrid::midpoint(200));
    const N0Estimate est = estimate_N0(m);
    std::ostringstream a, b;
    a << "estimate_N0 alpha=" << alpha;
    b << "refinement N0 alpha=" << alpha;
    rec.eq(a.str(), est.n0, want);
    rec.eq(b.str(), est.diagnostics.refined, want);
  }
}

// A3: invariant density of CONFIG-A.
void a3(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  const Model m = config_model(0.5, 400);
  const SteadyState s = run_steady(m);
  rec.le("max |Psi - 1/2|", (s.psi.array() - 0.5).abs().maxCoeff(), 1e-8);
  const Vec res = m.nodal_kernel() * s.psi - m.sigma.cwiseProduct(s.psi);
  rec.le("||(K - sigma) Psi||_X0", xs_norm(m, res, 0.0), 1e-10);
  write_steady_csv(path_in(ctx, "A3_steady.csv"), m, s);
}

// A4: mu'(0) closed form and finite difference.
void a4(const AcceptanceContext&, CriterionResult& r) {
  Recorder rec(r);
  for (auto [alpha, want] : {std::pair{0.5, -1.5}, std::pair{0.25, -1.25}}) {
    const Model m = config_model(alpha, 800);
    const Vec phi0 = invariant_velocity_density(m);
    const double mp = mu_prime_zero(m, phi0);
    const double h = 1e-4;
    const double fd = (leading_eigenpair(m, cplx(h), 0).mu - leading_eigenpair(m, cplx(-h), 0).mu).real() / (2.0 * h);
    std::ostringstream a, b;
    a << "rel err mu'(0) alpha=" << alpha;
    b << "|mu'(0) - centred difference| alpha=" << alpha;
    rec.le(a.str(), std::abs(mp - want) / std::abs(want), 0.01);
    rec.le(b.str(), std::abs(mp - fd), 1e-4);
  }
}

// A5: spectral radius on the imaginary axis.
void a5(const AcceptanceContext&, CriterionResult& r) {
  Recorder rec(r);
  const Model m = config_model(0.5, 400);
  rec.eq("r(M_0)", spectral_radius(M_op(m, 0.0, 0).mat), 1.0, 1e-10);
  for (double eta : {0.1, 1.0, 10.0}) {
    std::ostringstream n;
    n << "r(M_i" << eta << ")";
    rec.le(n.str(), spectral_radius(M_op(m, cplx(0.0, eta), 0).mat), 0.999);
  }
}

// A6: inequality battery on CONFIG-A.
void a6(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  const Model m = config_model(0.5, 400);
  const double ssup = m.sigma_sup;
  const double th1 = theta(m, 1.0).sup, th2 = theta(m, 2.0).sup;
  const StateField f = random_nonnegative_field(m, ctx.seed);

  // U_0 decay on the hierarchy.
  for (int k : {0, 1, 2}) {
    for (double t : {1.0, 5.0, 25.0}) {
      const double lhs = xs_norm(m, free_stream(m, f, t), 0.0);
      const double rhs = (k == 0 ? 1.0 : std::pow(k / (kE * t), k)) * xs_norm(m, f, k);
      rec.le("U0 decay k=" + std::to_string(k) + " t=" + format_number(t), lhs, rhs, kSlack);
    }
  }
  const auto ints = integrate_time(
      [&](double t) {
        const StateField u = free_stream(m, f, t);
        const double n0 = xs_norm(m, u, 0.0);
        return std::vector<double>{n0, xs_norm(m, u, 1.0), xs_norm(m, u, 2.0), t * n0, t * t * n0};
      },
      5);
  for (int k : {0, 1, 2}) {
    rec.le("int ||U0 f||_Xk k=" + std::to_string(k), ints[static_cast<size_t>(k)], xs_norm(m, f, k + 1.0), kSlack);
    const double lhs = k == 0 ? ints[0] : ints[static_cast<size_t>(2 + k)];
    rec.le("int t^k ||U0 f||_X0 k=" + std::to_string(k), lhs, std::tgamma(k + 1.0) * xs_norm(m, f, k + 1.0), kSlack);
  }

  // Contraction and regularisation of M_lambda.
  for (double lam : {0.5, 1.0, 2.0})
    rec.le("||M_lambda|| lambda=" + format_number(lam), op_norm(m, M_op(m, lam, 0)), ssup / (lam + ssup), kSlack);
  for (cplx lam : {cplx(0.0), cplx(1.0), cplx(0.0, 5.0)}) {
    const ModeOperator mo = M_op(m, lam, 0);
    const std::string tag = "(" + format_number(lam.real()) + "," + format_number(lam.imag()) + ")";
    rec.le("||M||_{X0,X1} lambda=" + tag, op_norm(m, mo, 0.0, 1.0), th1, kSlack);
    rec.le("||M||_{X0,X2} lambda=" + tag, op_norm(m, mo, 0.0, 2.0), th2, kSlack);
  }

  // Size of the removed kernel part.
  for (double delta : {0.1, 0.3, 0.5}) {
    const Mat removed = split_kernel(m, delta).second;
    const double nrm = op_norm(m, removed, -1.0, 0.0, true);
    for (int n : {1, 2})
      rec.le("||K - K^delta|| delta=" + format_number(delta) + " n=" + std::to_string(n), nrm,
             std::pow(delta, n) * (n == 1 ? th1 : th2), kSlack);
    if (delta == 0.5) rec.le("rel err ||K - K^0.5|| vs 1/8", std::abs(nrm - 0.125) / 0.125, 0.01);
  }

  const ApproxCheck ap = approx_power_bound_check(m, 0.3, 3, {cplx(0.0), cplx(0.0, 1.0), cplx(1.0, 1.0)}, 0);
  for (const auto& row : ap.rows)
    rec.le("approximation n=3 delta=0.3 lambda=(" + format_number(row.lambda.real()) + "," +
               format_number(row.lambda.imag()) + ")",
           row.difference, row.bound, kSlack);

  using KF = KernelFactor;
  for (const auto& seq : {std::vector<KF>{KF::Full, KF::Full, KF::Full}, std::vector<KF>{KF::Full, KF::Removed},
                          std::vector<KF>{KF::Kept, KF::Removed, KF::Full}}) {
    const MixedIterateReport mi = mixed_iterate_norm_check(m, seq, 0.5, 2.0);
    std::string tag;
    for (KF k : seq) tag += k == KF::Full ? 'F' : (k == KF::Kept ? 'K' : 'R');
    rec.le("mixed iterate " + tag + " t=2 delta=0.5", mi.measured, mi.bound, kSlack);
  }

  const ThetaBounds tb = theta_n_bounds(m, 2, 10.0, 0.4);
  rec.le("max Theta_2", tb.max_value, 1.0, kSlack);
  rec.le("Theta_2 excess over (2 sigma / delta)^2 e^-2", tb.max_bound_excess, 0.0, kSlack);

  const double gbound = ssup * th1;
  for (double eta : {0.5, 2.0, 20.0}) {
    const ModeOperator g1 = G_op(m, cplx(0.0, eta), 0, 1);
    ModeOperator g = g1;
    double worst = op_norm(m, g);
    for (int n = 2; n <= 50; ++n) {
      g = g * g1;
      worst = std::max(worst, op_norm(m, g));
    }
    rec.le("max_{n<=50} ||G_n(i eta)|| eta=" + format_number(eta), worst, gbound, kSlack);
  }

  const CVec v = random_nonnegative_vector(m, ctx.seed);
  for (double eps : {1e-1, 1e-2}) {
    for (double eta : {0.5, 3.0}) {
      for (int k : {0, 1}) {
        const CMat a = k == 0 ? M_op(m, cplx(eps, eta), 0).mat : M_derivative(m, cplx(eps, eta), 0, k).mat;
        const CMat b = k == 0 ? M_op(m, cplx(0.0, eta), 0).mat : M_derivative(m, cplx(0.0, eta), 0, k).mat;
        const double lhs = xs_norm(m, CVec((a - b) * v), 0.0);
        rec.le("derivative convergence k=" + std::to_string(k) + " eps=" + format_number(eps) +
                   " eta=" + format_number(eta),
               lhs, eps * std::tgamma(k + 2.0) * xs_norm(m, v, k + 1.0), kSlack);
      }
    }
  }
}

// A7: decay slopes and eps trend.
void a7(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  for (auto [cfg, gate, tag] : {std::tuple{config_a(400), -0.85, "A"}, std::tuple{config_b(400), -2.5, "B"}}) {
    cfg.threads = ctx.threads;
    const DecayReport d = run_decay(cfg);
    write_decay_csv(path_in(ctx, std::string("A7_decay_") + tag + ".csv"), d);
    write_decay_json(path_in(ctx, std::string("A7_decay_") + tag + ".json"), d);
    rec.le(std::string("slope on [30, 300] CONFIG-") + tag, d.fit.slope, gate);
    rec.lt(std::string("eps(300) vs eps(30) CONFIG-") + tag, d.eps_hi, d.eps_lo);
  }
}

// A8: partial-sum envelope under refinement.
void a8(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  PropagatorOptions opt;
  opt.threads = ctx.threads;
  double sups[2];
  int i = 0;
  for (int nv : {400, 800}) {
    const Model m = config_model(0.5, nv);
    const PartialSumReport rep = partial_sum_decay_scan(m, initial_field(m, 1, 2.0), 3, logspace(kE, 300.0, 60), opt);
    CsvWriter w(path_in(ctx, "A8_envelope_nv" + std::to_string(nv) + ".csv"), {"t", "norm", "envelope"});
    for (const auto& row : rep.rows) w.row({row.t, row.norm, row.envelope});
    sups[i++] = rep.sup_envelope;
    rec.le("sup envelope n_v=" + std::to_string(nv), rep.sup_envelope, std::numeric_limits<double>::max());
  }
  rec.le("relative change of sup envelope 400 -> 800", std::abs(sups[0] - sups[1]) / sups[1], 0.10);
}

// A9: inverse-Laplace reconstruction against the time-domain remainder.
void a9(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  ScenarioConfig cfg = config_a(200);
  cfg.threads = ctx.threads;
  const Model m = scenario_model(cfg);
  const Vec psi = invariant_density(m, invariant_velocity_density(m));
  const ReconReport rr = run_reconstruction(cfg, m, psi);
  write_recon_csv(path_in(ctx, "A9_recon.csv"), rr);
  rec.le("X0 distance to the remainder", rr.distance, rr.tolerance);
  rec.le("Bromwich eps=0.05 X0 distance", rr.bromwich_distance, 2.0 * rr.tolerance);
  rec.le("tail estimate", rr.tail_estimate, cfg.laplace.tail_tol);
}

// A10: resonance scan envelope and decay beyond the band.
void a10(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  const std::vector<double> etas = linspace(1.0, 4.0 * kPi, 64);
  double c[2];
  int i = 0;
  for (int nv : {400, 800}) {
    const Model m = config_model(0.5, nv);
    const ScanResult s = norm_decay_scan(m, 2, etas, {2}, ctx.threads);
    write_scan_csv(path_in(ctx, "A10_scan_nv" + std::to_string(nv) + ".csv"), s);
    c[i++] = s.envelope_constant;
  }
  rec.le("envelope constant relative change 400 -> 800", std::abs(c[0] - c[1]) / c[1], 0.20);
  const Model m = config_model(0.5, 400);
  const double band = kTwoPi * 2.0 * m.grid.vmax + m.sigma_sup;
  const std::vector<double> far = logspace(2.0 * band, 1000.0, 40);
  for (int q : {1, 2}) {
    const IntegrabilityScan sc = integrability_scan(m, 2, q, far, 2.0 * band, 1000.0, ctx.threads);
    if (!sc.fit_ok) fail(ErrorCode::InsufficientPoints, sc.fit_error);
    CsvWriter w(path_in(ctx, "A10_tail_q" + std::to_string(q) + ".csv"), {"eta", "norm", "partial_integral"});
    for (const auto& row : sc.rows) w.row({row.eta, row.norm, row.partial_integral});
    rec.le("fitted eta power beyond the band q=" + std::to_string(q), sc.fitted_power, -1.0);
  }
  const double eta = 1000.0;
  rec.le("(eta - 2 pi p vmax) ||M_i1000|| p=2", (eta - kTwoPi * 2.0 * m.grid.vmax) * op_norm(m, M_op(m, cplx(0.0, eta), 2)),
         m.sigma_sup, kSlack);
}

// A11: Monte Carlo cross-check.
void a11(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  ScenarioConfig cfg = config_a(256);
  cfg.seed = ctx.seed;
  cfg.threads = ctx.threads;
  const McCheck mc = run_mc_check(cfg);
  write_mc_csv(path_in(ctx, "A11_mc.csv"), mc);
  rec.le("stationary velocity-marginal distance", mc.stationarity.distance, 3.0 * mc.stationarity.error_aggregate);
  for (const auto& row : mc.rows)
    rec.le("|D_MC - E_pred| t=" + format_number(row.t), std::abs(row.distance - row.predicted),
           3.0 * row.error_bar + row.slack);
}

ScenarioConfig light_config(const AcceptanceContext& ctx) {
  ScenarioConfig c = default_config();
  c.n_v = 80;
  c.P = 1;
  c.initial.power = 2.0;
  c.time = {kE, 60.0, 16, 10.0, 60.0, 3};
  c.eta.min = 1.0;
  c.eta.max = 4.0 * kPi;
  c.eta.steps = 12;
  c.eta.powers = {2};
  c.eta.trace_n = 4;
  c.laplace.n = 4;
  c.laplace.t = 1.0;
  c.laplace.eta_max = 20.0;
  c.laplace.tail_tol = 1.0;
  c.mc.particles = 4000;
  c.mc.times = {1.0, 5.0};
  c.mc.bins_x = 16;
  c.mc.bins_v = 16;
  c.mc.groups = 10;
  c.criteria.clear();
  c.seed = ctx.seed;
  c.threads = ctx.threads;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A12: byte-identical suite outputs.
void a12(const AcceptanceContext& ctx, CriterionResult& r) {
  Recorder rec(r);
  const ScenarioConfig cfg = light_config(ctx);
  const fs::path base = fs::path(ctx.out_dir) / "A12";
  const fs::path d1 = base / "run1", d2 = base / "run2";
  fs::remove_all(base);
  const SuiteResult s1 = run_suite(cfg, d1.string());
  const SuiteResult s2 = run_suite(cfg, d2.string());
  long long errors = 0;
  for (const auto* s : {&s1, &s2})
    for (const auto& e : s->entries) errors += e.status != "pass";
  rec.eq("suite items not passing", static_cast<double>(errors), 0.0);
  long long files = 0, mismatches = 0;
  for (const auto& entry : fs::directory_iterator(d1)) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    const fs::path other = d2 / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) ++mismatches;
  }
  rec.ge("CSV files compared", static_cast<double>(files), 6.0);
  rec.eq("CSV files differing", static_cast<double>(mismatches), 0.0);
}

const std::map<std::string, std::pair<std::string, void (*)(const AcceptanceContext&, CriterionResult&)>>& registry() {
  static const std::map<std::string, std::pair<std::string, void (*)(const AcceptanceContext&, CriterionResult&)>> reg{
      {"A1", {"conservativity", a1}},
      {"A2", {"moments and N0", a2}},
      {"A3", {"invariant density", a3}},
      {"A4", {"eigenvalue derivative", a4}},
      {"A5", {"spectral strictness", a5}},
      {"A6", {"inequality battery", a6}},
      {"A7", {"decay rate", a7}},
      {"A8", {"partial-sum envelope", a8}},
      {"A9", {"inverse-Laplace reconstruction", a9}},
      {"A10", {"resonance scan", a10}},
      {"A11", {"Monte Carlo cross-check", a11}},
      {"A12", {"determinism", a12}},
  };
  return reg;
}

}  // namespace

std::string criterion_title(const std::string& id) {
  const auto it = registry().find(id);
  if (it == registry().end()) fail(ErrorCode::InvalidArgument, "unknown criterion " + id);
  return it->second.first;
}

CriterionResult run_criterion(const std::string& id, const AcceptanceContext& ctx) {
  CriterionResult r;
  r.id = id;
  r.title = criterion_title(id);
  const auto start = std::chrono::steady_clock::now();
  try {
    fs::create_directories(ctx.out_dir);
    registry().at(id).second(ctx, r);
    r.status = "pass";
    for (const auto& c : r.checks)
      if (!c.pass) r.status = "fail";
    if (r.checks.empty()) r.status = "fail";
  } catch (const std::exception& e) {
    r.status = "error";
    r.detail = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Check* head = nullptr;
  for (const auto& c : r.checks)
    if (!c.pass) {
      head = &c;
      break;
    }
  if (!head && !r.checks.empty()) head = &r.checks.front();
  if (head) {
    r.measured = head->value;
    r.gate = head->name + " " + head->relation + " " + format_number(head->limit);
    if (head->slack > 0.0) r.gate += " (+" + format_number(head->slack) + ")";
  } else {
    r.measured = std::numeric_limits<double>::quiet_NaN();
  }
  try {
    r.artifact_path = checks_csv(ctx, r);
  } catch (const std::exception& e) {
    if (r.status == "pass") r.status = "error";
    r.detail += std::string(r.detail.empty() ? "" : "; ") + e.what();
  }
  return r;
}

}  // namespace kinetic
