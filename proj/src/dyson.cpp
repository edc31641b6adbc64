#include "kinetic/dyson.hpp"

#include "kinetic/errors.hpp"
#include "kinetic/operators.hpp"
#include "kinetic/parallel.hpp"

#include <cmath>
#include <limits>

namespace kinetic {

namespace {

// Complex n x m blocks are carried as real n x 2m matrices [re | im] so that the
// real kernel acts through a single real product.
Mat split(const CMat& x) {
  Mat z(x.rows(), 2 * x.cols());
  z.leftCols(x.cols()) = x.real();
  z.rightCols(x.cols()) = x.imag();
  return z;
}

CMat join(const Mat& z, Eigen::Index m) {
  CMat x(z.rows(), m);
  x.real() = z.leftCols(m);
  x.imag() = z.middleCols(m, m);
  return x;
}

// Adds -(sigma + i omega) * block to out, both laid out as [re | im] with m columns each.
void add_absorption(const Vec& sigma, const Vec& omega, const Eigen::Ref<const Mat>& z, Eigen::Ref<Mat> out,
                    Eigen::Index m, bool real_only) {
  if (real_only) {
    out.noalias() -= sigma.asDiagonal() * z;
    return;
  }
  const auto re = z.leftCols(m);
  const auto im = z.middleCols(m, m);
  out.leftCols(m).noalias() -= sigma.asDiagonal() * re;
  out.leftCols(m).noalias() += omega.asDiagonal() * im;
  out.middleCols(m, m).noalias() -= sigma.asDiagonal() * im;
  out.middleCols(m, m).noalias() -= omega.asDiagonal() * re;
}

template <class Apply>
void taylor_advance(Mat& z, double dt, double bnorm, const Apply& apply, const PropagatorOptions& opt) {
  if (dt < 0.0) fail(ErrorCode::NegativeTime, "negative time step");
  if (dt == 0.0 || z.size() == 0) return;
  const int steps = std::max(1, static_cast<int>(std::ceil(dt * bnorm / opt.substep_norm)));
  const double tau = dt / steps;
  Mat term, acc;
  for (int s = 0; s < steps; ++s) {
    term = z;
    acc = z;
    int k = 1;
    for (;; ++k) {
      if (k > opt.max_terms) fail(ErrorCode::IntegratorFailure, "Taylor series did not converge");
      term = apply(term);
      term *= tau / k;
      acc += term;
      if (k > tau * bnorm && term.cwiseAbs().maxCoeff() <= opt.term_tol * acc.cwiseAbs().maxCoeff()) break;
    }
    z.swap(acc);
  }
}

struct ModeData {
  Vec sigma;
  Vec omega;
  double dmax = 0.0;
};

ModeData mode_data(const Model& model, int p) {
  ModeData d;
  d.sigma = model.sigma;
  d.omega = mode_phase(model, p);
  for (int j = 0; j < model.size(); ++j) d.dmax = std::max(d.dmax, std::hypot(d.sigma[j], d.omega[j]));
  return d;
}

double nodal_norm(const Model& model, const Mat& nodal) {
  double best = 0.0;
  for (Eigen::Index k = 0; k < nodal.cols(); ++k)
    best = std::max(best, nodal.col(k).cwiseAbs().dot(model.w()) / model.w()[k]);
  return best;
}

bool is_zero(const Mat& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

// Advances a complex block under exp(t L_p); keeps a purely real problem real.
void semigroup_advance(const Model& model, const Mat& kn, const ModeData& md, CMat& x, double t,
                       const PropagatorOptions& opt) {
  const Eigen::Index m = x.cols();
  const bool real_only = md.omega.cwiseAbs().maxCoeff() == 0.0 && is_zero(x.imag());
  const double bnorm = model.sigma_sup + md.dmax;
  if (real_only) {
    Mat z = x.real();
    taylor_advance(z, t, bnorm, [&](const Mat& y) {
      Mat out = kn * y;
      add_absorption(md.sigma, md.omega, y, out, m, true);
      return out;
    }, opt);
    x = z.cast<cplx>();
    return;
  }
  Mat z = split(x);
  taylor_advance(z, t, bnorm, [&](const Mat& y) {
    Mat out = kn * y;
    add_absorption(md.sigma, md.omega, y, out, m, false);
    return out;
  }, opt);
  x = join(z, m);
}

std::vector<int> modes_to_compute(const StateField& f, bool hermitian) {
  std::vector<int> ps;
  for (int p = hermitian ? 0 : -f.P; p <= f.P; ++p) ps.push_back(p);
  return ps;
}

void mirror(StateField& g, bool hermitian) {
  if (!hermitian) return;
  for (int p = 1; p <= g.P; ++p) g.mode(-p) = g.mode(p).conjugate();
  g.mode(0) = g.mode(0).real().cast<cplx>();
}

}  // namespace

CMat semigroup_mode(const Model& model, int p, const CMat& x, double t, const PropagatorOptions& opt) {
  if (t < 0.0) fail(ErrorCode::NegativeTime, "semigroup requires t >= 0");
  CMat y = x;
  semigroup_advance(model, model.nodal_kernel(), mode_data(model, p), y, t, opt);
  return y;
}

void chain_advance(const Model& model, int p, const std::vector<const Mat*>& couplings, std::vector<CMat>& comps,
                   double dt, const PropagatorOptions& opt) {
  if (dt < 0.0) fail(ErrorCode::NegativeTime, "chain requires dt >= 0");
  if (comps.size() != couplings.size() + 1)
    fail(ErrorCode::InvalidArgument, "chain needs one coupling per component after the first");
  const ModeData md = mode_data(model, p);
  const Eigen::Index m = comps.front().cols();
  const int levels = static_cast<int>(comps.size());
  bool real_only = md.omega.cwiseAbs().maxCoeff() == 0.0;
  for (const auto& c : comps) real_only = real_only && is_zero(c.imag());
  const Eigen::Index width = real_only ? m : 2 * m;
  bool shared = true;
  double cnorm = 0.0;
  for (const Mat* c : couplings) {
    shared = shared && c == couplings.front();
    cnorm = std::max(cnorm, nodal_norm(model, *c));
  }
  Mat z(model.size(), width * levels);
  for (int c = 0; c < levels; ++c)
    z.middleCols(width * c, width) = real_only ? Mat(comps[static_cast<size_t>(c)].real())
                                               : split(comps[static_cast<size_t>(c)]);
  auto apply = [&](const Mat& y) {
    Mat out = Mat::Zero(y.rows(), y.cols());
    if (levels > 1) {
      if (shared) {
        out.rightCols(width * (levels - 1)).noalias() = *couplings.front() * y.leftCols(width * (levels - 1));
      } else {
        for (int c = 1; c < levels; ++c)
          out.middleCols(width * c, width).noalias() =
              *couplings[static_cast<size_t>(c - 1)] * y.middleCols(width * (c - 1), width);
      }
    }
    for (int c = 0; c < levels; ++c)
      add_absorption(md.sigma, md.omega, y.middleCols(width * c, width), out.middleCols(width * c, width), m,
                     real_only);
    return out;
  };
  taylor_advance(z, dt, md.dmax + cnorm, apply, opt);
  for (int c = 0; c < levels; ++c) {
    const Mat block = z.middleCols(width * c, width);
    comps[static_cast<size_t>(c)] = real_only ? CMat(block.cast<cplx>()) : join(block, m);
  }
}

StateField semigroup_apply(const Model& model, const StateField& f, double t, const PropagatorOptions& opt) {
  if (t < 0.0) fail(ErrorCode::NegativeTime, "semigroup requires t >= 0");
  const bool herm = f.is_real();
  const auto ps = modes_to_compute(f, herm);
  const Mat kn = model.nodal_kernel();
  StateField out(f.P, f.n_v());
  parallel_for(static_cast<int>(ps.size()), opt.threads, [&](int i) {
    const int p = ps[static_cast<size_t>(i)];
    CMat x = f.mode(p);
    semigroup_advance(model, kn, mode_data(model, p), x, t, opt);
    out.mode(p) = x.col(0);
  });
  mirror(out, herm);
  return out;
}

std::vector<StateField> dyson_iterates(const Model& model, const StateField& f, double t, int n,
                                       const PropagatorOptions& opt) {
  if (n < 0) fail(ErrorCode::InvalidArgument, "iterate depth must be >= 0");
  if (t < 0.0) fail(ErrorCode::NegativeTime, "iterates require t >= 0");
  const bool herm = f.is_real();
  const auto ps = modes_to_compute(f, herm);
  const Mat kn = model.nodal_kernel();
  const std::vector<const Mat*> couplings(static_cast<size_t>(n), &kn);
  std::vector<StateField> out(static_cast<size_t>(n + 1), StateField(f.P, f.n_v()));
  out[0] = free_stream(model, f, t);
  parallel_for(static_cast<int>(ps.size()), opt.threads, [&](int i) {
    const int p = ps[static_cast<size_t>(i)];
    std::vector<CMat> comps(static_cast<size_t>(n + 1), CMat::Zero(f.n_v(), 1));
    comps[0] = f.mode(p);
    chain_advance(model, p, couplings, comps, t, opt);
    for (int k = 1; k <= n; ++k) out[static_cast<size_t>(k)].mode(p) = comps[static_cast<size_t>(k)].col(0);
  });
  for (int k = 1; k <= n; ++k) mirror(out[static_cast<size_t>(k)], herm);
  return out;
}

StateField remainder(const Model& model, const StateField& f, double t, int n, const PropagatorOptions& opt) {
  StateField r = semigroup_apply(model, f, t, opt);
  for (const auto& u : dyson_iterates(model, f, t, n, opt)) r = r - u;
  return r;
}

namespace {

void check_times(const std::vector<double>& times) {
  for (size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) fail(ErrorCode::NegativeTime, "time grid must be nonnegative");
    if (i > 0 && times[i] < times[i - 1]) fail(ErrorCode::InvalidArgument, "time grid must be nondecreasing");
  }
}

}  // namespace

PartialSumReport partial_sum_decay_scan(const Model& model, const StateField& f, int n,
                                        const std::vector<double>& times, const PropagatorOptions& opt) {
  if (!model.n0) fail(ErrorCode::InvalidArgument, "partial-sum scan needs N0 on the model");
  check_times(times);
  for (double t : times)
    if (!(t > 1.0)) fail(ErrorCode::InvalidArgument, "partial-sum envelope needs t > 1");
  PartialSumReport rep;
  rep.n = n;
  rep.n0 = *model.n0;
  const bool herm = f.is_real();
  const auto ps = modes_to_compute(f, herm);
  const Mat kn = model.nodal_kernel();
  const std::vector<const Mat*> couplings(static_cast<size_t>(n), &kn);
  std::vector<std::vector<CMat>> state(ps.size());
  for (size_t i = 0; i < ps.size(); ++i) {
    state[i].assign(static_cast<size_t>(n + 1), CMat::Zero(f.n_v(), 1));
    state[i][0] = f.mode(ps[i]);
  }
  double now = 0.0;
  for (double t : times) {
    parallel_for(static_cast<int>(ps.size()), opt.threads, [&](int i) {
      chain_advance(model, ps[static_cast<size_t>(i)], couplings, state[static_cast<size_t>(i)], t - now, opt);
    });
    now = t;
    StateField sum(f.P, f.n_v());
    for (size_t i = 0; i < ps.size(); ++i) {
      CVec acc = CVec::Zero(f.n_v());
      for (const auto& c : state[i]) acc += c.col(0);
      sum.mode(ps[i]) = acc;
    }
    mirror(sum, herm);
    PartialSumRow row;
    row.t = t;
    row.norm = xs_norm(model, sum, 0.0);
    row.envelope = row.norm * std::pow(t / std::log(t), rep.n0);
    rep.sup_envelope = std::max(rep.sup_envelope, row.envelope);
    rep.rows.push_back(row);
  }
  rep.upper_half_nonincreasing = true;
  for (size_t i = rep.rows.size() / 2 + 1; i < rep.rows.size(); ++i)
    if (rep.rows[i].envelope > rep.rows[i - 1].envelope * (1.0 + 1e-12)) rep.upper_half_nonincreasing = false;
  return rep;
}

std::vector<RelaxationRow> relaxation_series(const Model& model, const StateField& f, const Vec& psi,
                                             const std::vector<double>& times, int n_partial,
                                             const PropagatorOptions& opt) {
  check_times(times);
  if (n_partial < 0) fail(ErrorCode::InvalidArgument, "partial-sum depth must be >= 0");
  const double rho = mass(model, f).real();
  StateField eq(f.P, f.n_v());
  eq.mode(0) = rho * psi.cast<cplx>();
  const StateField h = f - eq;
  const bool herm = f.is_real();
  const auto ps = modes_to_compute(f, herm);
  const Mat kn = model.nodal_kernel();
  const std::vector<const Mat*> couplings(static_cast<size_t>(n_partial), &kn);
  std::vector<CMat> hs(ps.size());
  std::vector<std::vector<CMat>> chains(ps.size());
  std::vector<ModeData> mds(ps.size());
  for (size_t i = 0; i < ps.size(); ++i) {
    hs[i] = h.mode(ps[i]);
    chains[i].assign(static_cast<size_t>(n_partial + 1), CMat::Zero(f.n_v(), 1));
    chains[i][0] = f.mode(ps[i]);
    mds[i] = mode_data(model, ps[i]);
  }
  std::vector<RelaxationRow> rows;
  double now = 0.0;
  for (double t : times) {
    parallel_for(static_cast<int>(ps.size()), opt.threads, [&](int i) {
      const auto k = static_cast<size_t>(i);
      semigroup_advance(model, kn, mds[k], hs[k], t - now, opt);
      chain_advance(model, ps[k], couplings, chains[k], t - now, opt);
    });
    now = t;
    StateField vh(f.P, f.n_v()), partial(f.P, f.n_v());
    for (size_t i = 0; i < ps.size(); ++i) {
      vh.mode(ps[i]) = hs[i].col(0);
      CVec acc = CVec::Zero(f.n_v());
      for (const auto& c : chains[i]) acc += c.col(0);
      partial.mode(ps[i]) = acc;
    }
    mirror(vh, herm);
    mirror(partial, herm);
    RelaxationRow row;
    row.t = t;
    row.dist = xs_norm(model, vh, 0.0);
    row.partial_sum_norm = xs_norm(model, partial, 0.0);
    row.remainder_norm = xs_norm(model, (eq + vh) - partial, 0.0);
    rows.push_back(row);
  }
  return rows;
}

namespace {

// Theta_1..Theta_n at time t with `steps` classical RK4 steps; Theta_0 is exact.
std::vector<Vec> theta_rk4(const Model& model, const Mat& kd, int n, double t, int steps) {
  const int nv = model.size();
  const Vec& sig = model.sigma;
  const Mat kw = model.w().asDiagonal() * kd;  // kw(v, w) = w_v k(v, w)
  auto theta_of = [&](const Mat& y) { return Vec((kw.cwiseProduct(y)).colwise().sum().transpose()); };
  auto theta0 = [&](double s) { return Vec((-s * sig).array().exp()); };
  auto rhs = [&](double s, const std::vector<Mat>& y) {
    std::vector<Mat> dy(y.size());
    Vec prev = theta0(s);
    for (size_t m = 0; m < y.size(); ++m) {
      dy[m] = -(sig.asDiagonal() * y[m]);
      dy[m].rowwise() += prev.transpose();
      prev = theta_of(y[m]);
    }
    return dy;
  };
  std::vector<Mat> y(static_cast<size_t>(n), Mat::Zero(nv, nv));
  const double h = t / steps;
  auto axpy = [](const std::vector<Mat>& a, double c, const std::vector<Mat>& b) {
    std::vector<Mat> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + c * b[i];
    return r;
  };
  for (int s = 0; s < steps; ++s) {
    const double t0 = s * h;
    const auto k1 = rhs(t0, y);
    const auto k2 = rhs(t0 + 0.5 * h, axpy(y, 0.5 * h, k1));
    const auto k3 = rhs(t0 + 0.5 * h, axpy(y, 0.5 * h, k2));
    const auto k4 = rhs(t0 + h, axpy(y, h, k3));
    for (size_t m = 0; m < y.size(); ++m) y[m] += (h / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
  }
  std::vector<Vec> levels{theta0(t)};
  for (const auto& ym : y) levels.push_back(theta_of(ym));
  return levels;
}

}  // namespace

ThetaBounds theta_n_bounds(const Model& model, int n, double t, double delta, const ThetaOptions& opt) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "Theta recursion needs n >= 1");
  if (t < 0.0) fail(ErrorCode::NegativeTime, "Theta recursion needs t >= 0");
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "delta must be positive");
  ThetaBounds out;
  out.n = n;
  out.t = t;
  out.delta = delta;
  const Mat kd = split_kernel(model, delta).first;
  if (t == 0.0) {
    out.levels.push_back(Vec::Ones(model.size()));
    for (int m = 1; m <= n; ++m) out.levels.push_back(Vec::Zero(model.size()));
  } else {
    int steps = std::max(opt.initial_steps, static_cast<int>(std::ceil(t / 0.05)));
    auto coarse = theta_rk4(model, kd, n, t, steps);
    for (;;) {
      if (2 * steps > opt.max_steps) fail(ErrorCode::QuadratureFailure, "Theta recursion step budget exhausted");
      auto fine = theta_rk4(model, kd, n, t, 2 * steps);
      double err = 0.0;
      for (size_t m = 0; m < fine.size(); ++m)
        err = std::max(err, (fine[m] - coarse[m]).cwiseAbs().maxCoeff());
      steps *= 2;
      coarse = std::move(fine);
      out.step_error = err;
      if (err <= opt.tol) break;
    }
    out.levels = std::move(coarse);
  }
  const Vec& th = out.levels.back();
  out.bound = ((2.0 / delta) * model.sigma).array().pow(n) * std::exp(-t * delta / 2.0);
  out.region.resize(static_cast<size_t>(model.size()));
  out.max_value = th.maxCoeff();
  out.max_bound_excess = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < model.size(); ++j) {
    out.region[static_cast<size_t>(j)] = model.sigma[j] >= delta / 2.0;
    if (out.region[static_cast<size_t>(j)])
      out.max_bound_excess = std::max(out.max_bound_excess, th[j] - out.bound[j]);
  }
  out.le_one = true;
  for (const auto& lv : out.levels) out.le_one = out.le_one && lv.maxCoeff() <= 1.0 + 1e-9;
  out.within_bound = out.max_bound_excess <= 1e-9;
  return out;
}

MixedIterateReport mixed_iterate_norm_check(const Model& model, const std::vector<KernelFactor>& sequence,
                                            double delta, double t, const PropagatorOptions& opt) {
  if (t < 0.0) fail(ErrorCode::NegativeTime, "mixed iterates need t >= 0");
  MixedIterateReport rep;
  rep.sequence = sequence;
  const auto [kd, kbar] = split_kernel(model, delta);
  const Mat full = model.nodal_kernel();
  const Mat kept = kd * model.w().asDiagonal();
  const Mat removed = kbar * model.w().asDiagonal();
  auto pick = [&](KernelFactor f) -> const Mat& {
    switch (f) {
      case KernelFactor::Kept: return kept;
      case KernelFactor::Removed: return removed;
      default: return full;
    }
  };
  const int n = static_cast<int>(sequence.size());
  for (KernelFactor f : sequence) rep.bound *= op_norm(model, CMat(pick(f).cast<cplx>()), -1.0, 0.0);
  // Component m of the chain is z_{n-m}; it is driven by K_{n-m+1} applied to z_{n-m+1}.
  std::vector<const Mat*> couplings;
  for (int m = 1; m <= n; ++m) couplings.push_back(&pick(sequence[static_cast<size_t>(n - m)]));
  std::vector<CMat> comps(static_cast<size_t>(n + 1), CMat::Zero(model.size(), model.size()));
  comps[0] = model.w().cwiseInverse().cast<cplx>().asDiagonal();
  chain_advance(model, 0, couplings, comps, t, opt);
  const CMat& vn = comps.back();
  for (int k = 0; k < model.size(); ++k) rep.measured = std::max(rep.measured, vn.col(k).cwiseAbs().dot(model.w()));
  rep.pass = rep.measured <= rep.bound + 1e-9;
  return rep;
}

}  // namespace kinetic
