#include "kinetic/laplace.hpp"

#include "kinetic/errors.hpp"
#include "kinetic/fit.hpp"
#include "kinetic/operators.hpp"
#include "kinetic/parallel.hpp"
#include "kinetic/quadrature.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace kinetic {

const char* to_string(TraceBranch b) {
  switch (b) {
    case TraceBranch::Neumann: return "neumann";
    case TraceBranch::Direct: return "direct";
    case TraceBranch::Split: return "split";
    case TraceBranch::Regularized: return "regularized";
  }
  return "unknown";
}

TraceEvaluator::TraceEvaluator(const Model& model, TraceOptions opt)
    : model_(&model), opt_(std::move(opt)), kn_(model.nodal_kernel()) {}

const ZeroModeSpectrum& TraceEvaluator::zero_mode() const {
  std::call_once(zero_once_, [&] { zero_ = std::make_unique<ZeroModeSpectrum>(zero_mode_spectrum(*model_, opt_.phi)); });
  return *zero_;
}

namespace {

double factorial(int q) {
  double f = 1.0;
  for (int i = 2; i <= q; ++i) f *= i;
  return f;
}

CVec lu_solve(const CMat& a, const CVec& g, double cond_limit) {
  Eigen::PartialPivLU<CMat> lu(a);
  const double rc = lu.rcond();
  if (!(rc > 0.0) || 1.0 / rc > cond_limit)
    fail(ErrorCode::SingularSolve, "condition estimate " + std::to_string(rc > 0.0 ? 1.0 / rc : INFINITY));
  return lu.solve(g);
}

}  // namespace

CVec TraceEvaluator::solve_direct(const CMat& m, const CVec& g, TraceBranch* branch) const {
  if (op_norm(*model_, m, 0.0, 0.0) < opt_.neumann_threshold) {
    CVec x = g, term = g;
    for (int it = 0; it < 5000; ++it) {
      term = m * term;
      x += term;
      if (term.cwiseAbs().maxCoeff() <= 1e-17 * x.cwiseAbs().maxCoeff()) {
        if (branch) *branch = TraceBranch::Neumann;
        return x;
      }
    }
  }
  if (branch) *branch = TraceBranch::Direct;
  const auto n = m.rows();
  return lu_solve(CMat::Identity(n, n) - m, g, opt_.cond_limit);
}

CVec TraceEvaluator::inverse(const CVec& g, int p, cplx lambda, TraceBranch* branch) const {
  const Model& md = *model_;
  const auto n = md.size();
  const CMat m = M_op(md, lambda, p).mat;
  const CMat id = CMat::Identity(n, n);
  if (p == 0 && lambda.real() == 0.0 && std::abs(lambda.imag()) < opt_.zero_window) {
    const cplx total = (g.array() * md.w().array().cast<cplx>()).sum();
    if (lambda.imag() == 0.0) {
      if (std::abs(total) > opt_.mass_tol)
        fail(ErrorCode::NonZeroMean, "the trace at lambda = 0 needs mass-zero data");
      const ZeroModeSpectrum& zs = zero_mode();
      CVec y = lu_solve(id - m * (id - zs.P0), g, opt_.cond_limit);
      y += apply_Phi0(md, zs, g);
      if (branch) *branch = TraceBranch::Regularized;
      return g + m * y;
    }
    ProjectionOptions po = opt_.phi.projection;
    const CMat proj = spectral_projection(m, po);
    const cplx mu = leading_eigenpair(md, m).mu;
    const CMat q = id - proj;
    CVec x = lu_solve(id - m * q, CVec(q * g), opt_.cond_limit);
    x += (proj * g) / (1.0 - mu);
    if (branch) *branch = TraceBranch::Split;
    return x;
  }
  return solve_direct(m, g, branch);
}

CVec TraceEvaluator::resolvent(const CVec& g, int p, cplx lambda, TraceBranch* branch) const {
  const CVec d = denominators(*model_, lambda, p);
  return inverse(g, p, lambda, branch).cwiseQuotient(d);
}

CVec TraceEvaluator::upsilon(const CVec& g, int p, cplx lambda, int m, TraceBranch* branch) const {
  if (m < 0) fail(ErrorCode::InvalidArgument, "Upsilon index must be >= 0");
  const int mm = std::max(m, 1);
  const CMat mat = M_op(*model_, lambda, p).mat;
  CVec h = g;
  for (int j = 0; j < mm; ++j) h = mat * h;
  // (I - M)^{-1} commutes with M, so R M^m (I - M)^{-1} g = resolvent of M^m g.
  return resolvent(h, p, lambda, branch);
}

CVec TraceEvaluator::RMj_derivative(const CVec& g, int p, cplx lambda, int j, int k) const {
  if (j < 0 || k < 0) fail(ErrorCode::InvalidArgument, "indices must be >= 0");
  const CVec d = denominators(*model_, lambda, p);
  auto inv_pow = [&](int q) {
    const double c = (q % 2 == 0 ? 1.0 : -1.0) * factorial(q);
    CVec r(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) r[i] = c / std::pow(d[i], q + 1);
    return r;
  };
  std::vector<CVec> rq;
  for (int q = 0; q <= k; ++q) rq.push_back(inv_pow(q));
  const CMat kc = kn_.cast<cplx>();
  // u[q] = d^q / d lambda^q (M^i g), advanced over i by the Leibniz rule.
  std::vector<CVec> u(static_cast<size_t>(k + 1), CVec::Zero(g.size()));
  u[0] = g;
  for (int i = 0; i < j; ++i) {
    std::vector<CVec> next(static_cast<size_t>(k + 1), CVec::Zero(g.size()));
    for (int q = 0; q <= k; ++q) {
      double binom = 1.0;
      for (int a = 0; a <= q; ++a) {
        if (a > 0) binom = binom * (q - a + 1) / a;
        next[static_cast<size_t>(q)] += binom * (kc * rq[static_cast<size_t>(a)].cwiseProduct(u[static_cast<size_t>(q - a)]));
      }
    }
    u = std::move(next);
  }
  CVec out = CVec::Zero(g.size());
  double binom = 1.0;
  for (int a = 0; a <= k; ++a) {
    if (a > 0) binom = binom * (k - a + 1) / a;
    out += binom * rq[static_cast<size_t>(a)].cwiseProduct(u[static_cast<size_t>(k - a)]);
  }
  return out;
}

CVec TraceEvaluator::upsilon_lambda_derivative(const CVec& g, int p, cplx lambda, int m, int k) const {
  if (k == 0) return upsilon(g, p, lambda, m);
  const int mm = std::max(m, 1);
  // d^k R = (-1)^k k! R^{k+1}, minus the derivatives of the first mm terms of the series.
  CVec r = g;
  for (int i = 0; i <= k; ++i) r = resolvent(r, p, lambda);
  CVec out = ((k % 2 == 0 ? 1.0 : -1.0) * factorial(k)) * r;
  for (int j = 0; j < mm; ++j) out -= RMj_derivative(g, p, lambda, j, k);
  return out;
}

namespace {

void require_zero_mass(const TraceEvaluator& ev, const StateField& f) {
  if (std::abs(mass(ev.model(), f)) > ev.options().mass_tol)
    fail(ErrorCode::NonZeroMean, "trace functions need mass-zero data");
}

}  // namespace

StateField trace_resolvent(const TraceEvaluator& ev, const StateField& f, double eta) {
  require_zero_mass(ev, f);
  StateField out(f.P, f.n_v());
  for (int p = -f.P; p <= f.P; ++p) out.mode(p) = ev.resolvent(f.mode(p), p, cplx(0.0, eta));
  return out;
}

StateField trace_Upsilon(const TraceEvaluator& ev, const StateField& f, int n, double eta, int k) {
  require_zero_mass(ev, f);
  const cplx ik = std::pow(cplx(0.0, 1.0), k);
  StateField out(f.P, f.n_v());
  for (int p = -f.P; p <= f.P; ++p)
    out.mode(p) = ik * ev.upsilon_lambda_derivative(f.mode(p), p, cplx(0.0, eta), n, k);
  return out;
}

StateField trace_partial_sum(const TraceEvaluator& ev, const StateField& f, int m, double eta) {
  StateField out(f.P, f.n_v());
  for (int p = -f.P; p <= f.P; ++p) {
    CVec acc = CVec::Zero(f.n_v());
    for (int j = 1; j <= m; ++j) acc += ev.RMj_derivative(f.mode(p), p, cplx(0.0, eta), j, 0);
    out.mode(p) = acc;
  }
  return out;
}

EtaRule eta_rule(double t, const QuadratureOptions& opt) {
  if (!(opt.eta_max > opt.dense_half_width)) fail(ErrorCode::InvalidArgument, "eta_max must exceed the dense panel");
  std::vector<double> edges{0.0};
  for (int i = 1; i <= opt.dense_panels; ++i) edges.push_back(opt.dense_half_width * i / opt.dense_panels);
  const double cap = t > 0.0 ? kPi / (4.0 * t) : std::numeric_limits<double>::infinity();
  while (edges.back() < opt.eta_max) {
    const double e = edges.back();
    const double w = std::min(cap, opt.relative_width * (1.0 + e));
    edges.push_back(std::min(opt.eta_max, e + w));
  }
  const GaussRule& gr = gauss_legendre(opt.gauss_order);
  std::vector<double> pn, pw;
  for (size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i], b = edges[i + 1];
    for (size_t q = 0; q < gr.nodes.size(); ++q) {
      pn.push_back(0.5 * (a + b) + 0.5 * (b - a) * gr.nodes[q]);
      pw.push_back(0.5 * (b - a) * gr.weights[q]);
    }
  }
  EtaRule r;
  for (size_t i = pn.size(); i-- > 0;) {
    r.nodes.push_back(-pn[i]);
    r.weights.push_back(pw[i]);
  }
  for (size_t i = 0; i < pn.size(); ++i) {
    r.nodes.push_back(pn[i]);
    r.weights.push_back(pw[i]);
  }
  return r;
}

namespace {

double weighted_l1(const Model& model, const CVec& v) { return v.cwiseAbs().dot(model.w()); }

// Shared driver: sum_nodes weight * exp(lambda t) * Upsilon_{n+1}(lambda) / (2 pi) with lambda = eps + i eta.
Reconstruction laplace_sum(const TraceEvaluator& ev, const StateField& f, int n, double t, double eps,
                           const QuadratureOptions& opt) {
  require_zero_mass(ev, f);
  const Model& model = ev.model();
  const EtaRule rule = eta_rule(t, opt);
  const bool herm = f.is_real();
  std::vector<int> ps;
  for (int p = herm ? 0 : -f.P; p <= f.P; ++p) ps.push_back(p);
  const int nodes = static_cast<int>(rule.nodes.size());
  const int np = static_cast<int>(ps.size());
  std::vector<CVec> acc(ps.size(), CVec::Zero(f.n_v()));
  std::vector<double> norms(rule.nodes.size(), 0.0);  // sum over all modes of the weighted l1 norm
  std::vector<double> mode_norms(static_cast<size_t>(nodes * np), 0.0);
  const int chunk = 128;
  for (int start = 0; start < nodes; start += chunk) {
    const int stop = std::min(nodes, start + chunk);
    std::vector<CVec> vals(static_cast<size_t>((stop - start) * np));
    parallel_for((stop - start) * np, opt.threads, [&](int idx) {
      const int node = start + idx / np;
      const int p = ps[static_cast<size_t>(idx % np)];
      const cplx lambda(eps, rule.nodes[static_cast<size_t>(node)]);
      vals[static_cast<size_t>(idx)] = ev.upsilon(f.mode(p), p, lambda, n + 1);
    });
    for (int node = start; node < stop; ++node) {
      const double eta = rule.nodes[static_cast<size_t>(node)];
      const cplx phase = std::exp(cplx(eps, eta) * t) * (rule.weights[static_cast<size_t>(node)] / kTwoPi);
      for (int i = 0; i < np; ++i) {
        const CVec& v = vals[static_cast<size_t>((node - start) * np + i)];
        acc[static_cast<size_t>(i)] += phase * v;
        mode_norms[static_cast<size_t>(node * np + i)] = weighted_l1(model, v);
      }
    }
  }
  Reconstruction rec;
  rec.nodes = nodes;
  rec.value = StateField(f.P, f.n_v());
  for (int i = 0; i < np; ++i) rec.value.mode(ps[static_cast<size_t>(i)]) = acc[static_cast<size_t>(i)];
  if (herm) {
    for (int p = 1; p <= f.P; ++p) rec.value.mode(-p) = rec.value.mode(p).conjugate();
    rec.value.mode(0) = rec.value.mode(0).real().cast<cplx>();
  }
  // Mode-summed norm at +eta; for Hermitian data mode -p at eta mirrors mode p at -eta.
  for (int node = 0; node < nodes; ++node) {
    const int mirror_node = nodes - 1 - node;
    double s = 0.0;
    for (int i = 0; i < np; ++i) {
      s += mode_norms[static_cast<size_t>(node * np + i)];
      if (herm && ps[static_cast<size_t>(i)] > 0) s += mode_norms[static_cast<size_t>(mirror_node * np + i)];
    }
    norms[static_cast<size_t>(node)] = s;
  }
  std::vector<double> lx, ly;
  for (int node = nodes / 2; node < nodes; ++node) {
    const double eta = rule.nodes[static_cast<size_t>(node)];
    const double both = norms[static_cast<size_t>(node)] + norms[static_cast<size_t>(nodes - 1 - node)];
    if (eta >= 0.5 * opt.eta_max && both > 0.0) {
      lx.push_back(std::log(eta));
      ly.push_back(std::log(both));
    }
  }
  const double last = norms.back() + norms.front();
  if (last == 0.0) {
    rec.tail_estimate = 0.0;
  } else if (lx.size() >= 2) {
    const LinearFit fit = ols(lx, ly);
    rec.fitted_power = fit.slope;
    const double gamma = -fit.slope;
    rec.tail_estimate = gamma > 1.0 ? std::exp(eps * t) * last * opt.eta_max / ((gamma - 1.0) * kTwoPi)
                                    : std::numeric_limits<double>::infinity();
  } else {
    rec.tail_estimate = std::numeric_limits<double>::infinity();
  }
  if (rec.tail_estimate > opt.tail_tol)
    fail(ErrorCode::TailTooLarge, "estimated truncation " + std::to_string(rec.tail_estimate));
  return rec;
}

}  // namespace

Reconstruction inverse_laplace_remainder(const TraceEvaluator& ev, const StateField& f, int n, double t,
                                         const QuadratureOptions& opt) {
  if (t < 0.0) fail(ErrorCode::NegativeTime, "reconstruction needs t >= 0");
  return laplace_sum(ev, f, n, t, 0.0, opt);
}

Reconstruction bromwich_remainder(const TraceEvaluator& ev, const StateField& f, int n, double t, double eps,
                                  const QuadratureOptions& opt) {
  if (t < 0.0) fail(ErrorCode::NegativeTime, "reconstruction needs t >= 0");
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "Bromwich line needs eps > 0");
  return laplace_sum(ev, f, n, t, eps, opt);
}

IntegrabilityScan integrability_scan(const Model& model, int p, int q, const std::vector<double>& etas, double fit_lo,
                                     double fit_hi, int threads) {
  if (q < 1) fail(ErrorCode::InvalidArgument, "power must be >= 1");
  IntegrabilityScan scan;
  scan.p = p;
  scan.q = q;
  scan.band_edge = kTwoPi * std::abs(p) * model.grid.vmax + model.sigma_sup;
  scan.rows.resize(etas.size());
  parallel_for(static_cast<int>(etas.size()), threads, [&](int i) {
    const double eta = etas[static_cast<size_t>(i)];
    const CMat m = M_op(model, cplx(0.0, eta), p).mat;
    CMat acc = m;
    for (int j = 1; j < q; ++j) acc = acc * m;
    scan.rows[static_cast<size_t>(i)].eta = eta;
    scan.rows[static_cast<size_t>(i)].norm = op_norm(model, acc, 0.0, 0.0);
  });
  for (size_t i = 1; i < scan.rows.size(); ++i) {
    auto& r = scan.rows[i];
    const auto& prev = scan.rows[i - 1];
    const double inc = 0.5 * (r.norm + prev.norm) * (r.eta - prev.eta);
    r.partial_integral = prev.partial_integral + inc;
    if (std::abs(prev.eta) > scan.band_edge && std::abs(r.eta) > scan.band_edge)
      scan.max_tail_increment = std::max(scan.max_tail_increment, std::abs(inc));
  }
  std::vector<double> lx, ly;
  for (const auto& r : scan.rows)
    if (std::abs(r.eta) >= fit_lo && std::abs(r.eta) <= fit_hi && r.norm > 0.0) {
      lx.push_back(std::log(std::abs(r.eta)));
      ly.push_back(std::log(r.norm));
    }
  try {
    const LinearFit fit = ols(lx, ly);
    scan.fitted_power = fit.slope;
    scan.fit_stderr = fit.slope_stderr;
    scan.fit_ok = true;
  } catch (const KineticError& e) {
    scan.fit_ok = false;
    scan.fit_error = e.what();
  }
  return scan;
}

double empirical_modulus(const Model& model, const std::vector<double>& etas, const std::vector<StateField>& samples,
                         double s) {
  if (etas.size() != samples.size()) fail(ErrorCode::InvalidArgument, "modulus needs one sample per grid point");
  if (etas.size() < 2 || s <= 0.0) return 0.0;
  const double step = etas[1] - etas[0];
  const auto lag = std::min(etas.size() - 1, static_cast<size_t>(std::floor(s / step + 1e-9)));
  double best = 0.0;
  for (size_t l = 1; l <= lag; ++l)
    for (size_t i = 0; i + l < etas.size(); ++i) {
      double d = 0.0;
      for (int p = -samples[i].P; p <= samples[i].P; ++p)
        d += weighted_l1(model, CVec(samples[i].mode(p) - samples[i + l].mode(p)));
      best = std::max(best, d);
    }
  return best;
}

EpsilonReport epsilon_diagnostic(const Model& model, const std::vector<double>& times, const std::vector<double>& dist,
                                 const std::vector<double>& etas, const std::vector<StateField>& theta_samples,
                                 double exponent, double anchor_t) {
  if (!model.n0) fail(ErrorCode::InvalidArgument, "epsilon diagnostic needs N0 on the model");
  if (!(exponent > 4.0)) fail(ErrorCode::InvalidArgument, "exponent must exceed 4");
  if (times.size() != dist.size() || times.empty()) fail(ErrorCode::InvalidArgument, "times and dist must pair up");
  EpsilonReport rep;
  const double e = (exponent - 4.0) / exponent;
  size_t anchor = 0;
  for (size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - anchor_t) < std::abs(times[anchor] - anchor_t)) anchor = i;
  for (size_t i = 0; i < times.size(); ++i) {
    ModulusRow r;
    r.t = times[i];
    r.eps = dist[i] * std::pow(1.0 + times[i], *model.n0 - 1);
    r.omega = times[i] > 0.0 ? empirical_modulus(model, etas, theta_samples, kPi / times[i]) : 0.0;
    rep.rows.push_back(r);
  }
  rep.anchor_t = times[anchor];
  const double wa = std::pow(rep.rows[anchor].omega, e);
  rep.K = wa > 0.0 ? rep.rows[anchor].eps / wa : 0.0;
  for (auto& r : rep.rows) r.bound = rep.K * std::pow(r.omega, e);
  rep.eps_first = rep.rows.front().eps;
  rep.eps_last = rep.rows.back().eps;
  rep.decreasing = rep.eps_last < rep.eps_first;
  return rep;
}

}  // namespace kinetic
