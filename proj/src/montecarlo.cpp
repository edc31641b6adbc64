#include "kinetic/montecarlo.hpp"

#include "kinetic/errors.hpp"
#include "kinetic/parallel.hpp"
#include "kinetic/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace kinetic {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t index)
    : engine_(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL))) {}

double RngStream::uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

double RngStream::exponential(double rate) { return -std::log(uniform()) / rate; }

namespace {

std::vector<double> cumulative(const Vec& weights) {
  std::vector<double> cdf(static_cast<size_t>(weights.size()));
  double acc = 0.0;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    acc += std::max(weights[j], 0.0);
    cdf[static_cast<size_t>(j)] = acc;
  }
  for (double& c : cdf) c /= acc;
  cdf.back() = 1.0;
  return cdf;
}

// |v| = vmax u^{1 / (gamma + 1)} with a random sign samples density proportional to |v|^gamma.
double power_law_velocity(double gamma, double vmax, RngStream& rng) {
  const double mag = vmax * std::pow(rng.uniform(), 1.0 / (gamma + 1.0));
  return rng.uniform() < 0.5 ? -mag : mag;
}

}  // namespace

JumpProcess::JumpProcess(const Model& model) : model_(&model) {
  const CollisionKernel& k = model.kernel;
  if (k.is_builtin()) {
    majorant_ = std::pow(k.vmax, k.alpha);
  } else {
    majorant_ = model.sigma_sup;
    const Mat nodal = model.nodal_kernel();
    for (int c = 0; c < model.size(); ++c) column_cdf_.push_back(cumulative(model.w().cwiseProduct(model.kmat.col(c))));
  }
  const Vec psi = invariant_density(model, invariant_velocity_density(model));
  psi_cdf_ = cumulative(psi.cwiseProduct(model.w()));
}

double JumpProcess::sigma(double v) const {
  const CollisionKernel& k = model_->kernel;
  if (k.is_builtin()) return std::pow(std::abs(v), k.alpha);
  return model_->sigma[grid_index(v)];
}

int JumpProcess::grid_index(double v) const {
  const Vec& nodes = model_->v();
  const auto it = std::lower_bound(nodes.data(), nodes.data() + nodes.size(), v);
  auto j = static_cast<int>(it - nodes.data());
  if (j == nodes.size() || (j > 0 && std::abs(nodes[j - 1] - v) < std::abs(nodes[j] - v))) --j;
  return j;
}

double JumpProcess::sample_cell(const std::vector<double>& cdf, RngStream& rng) const {
  const double u = rng.uniform();
  const auto j = std::min(static_cast<std::ptrdiff_t>(cdf.size()) - 1,
                          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  return model_->v()[j];
}

double JumpProcess::post_jump(double v, RngStream& rng) const {
  const CollisionKernel& k = model_->kernel;
  if (!k.is_builtin()) return sample_cell(column_cdf_[static_cast<size_t>(grid_index(v))], rng);
  if (k.kind == KernelKind::Separable || k.beta == 0.0) return power_law_velocity(k.alpha, k.vmax, rng);
  // Rejection from the separable law; |psi| <= 1 for both built-in perturbations.
  const double cap = 1.0 + std::abs(k.beta);
  const double pv = k.psi_value(v);
  for (;;) {
    const double w = power_law_velocity(k.alpha, k.vmax, rng);
    if (rng.uniform() * cap <= 1.0 + k.beta * k.psi_value(w) * pv) return w;
  }
}

double JumpProcess::initial_velocity(const McInitialSpec& spec, RngStream& rng) const {
  const CollisionKernel& k = model_->kernel;
  if (spec.kind == McInitial::Stationary) {
    // Built-in kernels have phi0 proportional to sigma, so Psi is uniform.
    if (k.is_builtin()) return k.vmax * (2.0 * rng.uniform() - 1.0);
    return sample_cell(psi_cdf_, rng);
  }
  if (k.is_builtin()) return power_law_velocity(k.alpha * spec.power, k.vmax, rng);
  const Vec g = model_->sigma.array().pow(spec.power) * model_->w().array();
  return sample_cell(cumulative(g), rng);
}

std::vector<Ensemble> simulate(const JumpProcess& process, const McInitialSpec& init, const McOptions& opt) {
  if (opt.n_particles < 0) fail(ErrorCode::InvalidArgument, "particle count must be >= 0");
  if (opt.block_size < 1) fail(ErrorCode::InvalidArgument, "block size must be >= 1");
  for (size_t i = 0; i < opt.snapshots.size(); ++i) {
    if (opt.snapshots[i] < 0.0) fail(ErrorCode::NegativeTime, "snapshot times must be >= 0");
    if (i > 0 && opt.snapshots[i] < opt.snapshots[i - 1])
      fail(ErrorCode::InvalidArgument, "snapshot times must be nondecreasing");
  }
  const auto n = static_cast<size_t>(opt.n_particles);
  std::vector<Ensemble> out(opt.snapshots.size());
  for (size_t s = 0; s < out.size(); ++s) {
    out[s].t = opt.snapshots[s];
    out[s].x.assign(n, 0.0);
    out[s].v.assign(n, 0.0);
  }
  const long long blocks = (opt.n_particles + opt.block_size - 1) / opt.block_size;
  const double lam = process.majorant();
  parallel_for(static_cast<int>(blocks), opt.threads, [&](int b) {
    RngStream rng(opt.seed, static_cast<std::uint64_t>(b));
    const long long first = static_cast<long long>(b) * opt.block_size;
    const long long last = std::min(opt.n_particles, first + opt.block_size);
    for (long long i = first; i < last; ++i) {
      double x;
      if (init.kind == McInitial::Stationary) {
        x = rng.uniform();
      } else {
        do x = rng.uniform();
        while (2.0 * rng.uniform() > 1.0 + std::cos(kTwoPi * x));
      }
      double v = process.initial_velocity(init, rng);
      double t = 0.0;
      for (size_t s = 0; s < opt.snapshots.size(); ++s) {
        const double target = opt.snapshots[s];
        for (;;) {
          const double tau = rng.exponential(lam);
          if (t + tau >= target) {
            // Memorylessness: the residual clock is redrawn after the snapshot.
            x += v * (target - t);
            t = target;
            break;
          }
          x += v * tau;
          t += tau;
          if (rng.uniform() * lam <= process.sigma(v)) v = process.post_jump(v, rng);
          x -= std::floor(x);
        }
        x -= std::floor(x);
        out[s].x[static_cast<size_t>(i)] = x;
        out[s].v[static_cast<size_t>(i)] = v;
      }
    }
  });
  return out;
}

std::vector<double> interarrival_sample(const JumpProcess& process, double v0, int count, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<double> waits;
  double v = v0, wait = 0.0;
  const double lam = process.majorant();
  while (static_cast<int>(waits.size()) < count) {
    wait += rng.exponential(lam);
    if (rng.uniform() * lam <= process.sigma(v)) {
      waits.push_back(wait);
      wait = 0.0;
      v = process.post_jump(v, rng);
    }
  }
  return waits;
}

BinnedReference bin_field(const Model& model, const StateField& f, int nx, int nv) {
  if (nx < 1 || nv < 1 || model.size() % nv != 0)
    fail(ErrorCode::InvalidArgument, "velocity bins must align with grid cells");
  BinnedReference ref;
  ref.nx = nx;
  ref.nv = nv;
  ref.vmax = model.grid.vmax;
  ref.prob.assign(static_cast<size_t>(nx * nv), 0.0);
  const int per = model.size() / nv;
  for (int ix = 0; ix < nx; ++ix) {
    const double a = static_cast<double>(ix) / nx, b = static_cast<double>(ix + 1) / nx;
    std::vector<cplx> integ(static_cast<size_t>(2 * f.P + 1));
    for (int p = -f.P; p <= f.P; ++p) {
      integ[static_cast<size_t>(p + f.P)] =
          p == 0 ? cplx(b - a) : (std::exp(cplx(0.0, kTwoPi * p * b)) - std::exp(cplx(0.0, kTwoPi * p * a))) /
                                     cplx(0.0, kTwoPi * p);
    }
    for (int j = 0; j < model.size(); ++j) {
      cplx acc = 0.0;
      for (int p = -f.P; p <= f.P; ++p) acc += f.mode(p)[j] * integ[static_cast<size_t>(p + f.P)];
      ref.prob[static_cast<size_t>(ix * nv + j / per)] += acc.real() * model.w()[j];
    }
  }
  return ref;
}

namespace {

int bin_of(double x, double v, int nx, int nv, double vmax) {
  const int ix = std::clamp(static_cast<int>(std::floor(x * nx)), 0, nx - 1);
  const int iv = std::clamp(static_cast<int>(std::floor((v + vmax) / (2.0 * vmax) * nv)), 0, nv - 1);
  return ix * nv + iv;
}

}  // namespace

DistanceEstimate empirical_distance(const Ensemble& ens, const BinnedReference& ref, int groups) {
  const auto n = static_cast<long long>(ens.x.size());
  if (n == 0) fail(ErrorCode::EmptyEnsemble, "empty ensemble");
  if (ref.nx < 10 || ref.nv < 10) fail(ErrorCode::InvalidArgument, "at least 10 bins per axis");
  if (groups < 2) fail(ErrorCode::InvalidArgument, "jackknife needs at least two groups");
  const size_t nb = ref.prob.size();
  std::vector<long long> total(nb, 0);
  std::vector<std::vector<long long>> per(static_cast<size_t>(groups), std::vector<long long>(nb, 0));
  std::vector<long long> gsize(static_cast<size_t>(groups), 0);
  for (long long i = 0; i < n; ++i) {
    const int b = bin_of(ens.x[static_cast<size_t>(i)], ens.v[static_cast<size_t>(i)], ref.nx, ref.nv, ref.vmax);
    const auto g = static_cast<size_t>(i % groups);
    ++total[static_cast<size_t>(b)];
    ++per[g][static_cast<size_t>(b)];
    ++gsize[g];
  }
  auto dist = [&](const std::vector<long long>& counts, long long m) {
    double d = 0.0;
    for (size_t b = 0; b < nb; ++b) d += std::abs(static_cast<double>(counts[b]) / m - ref.prob[b]);
    return d;
  };
  DistanceEstimate est;
  est.groups = groups;
  est.particles = n;
  est.estimate = dist(total, n);
  std::vector<double> loo(static_cast<size_t>(groups));
  double mean = 0.0;
  for (int g = 0; g < groups; ++g) {
    std::vector<long long> c(nb);
    for (size_t b = 0; b < nb; ++b) c[b] = total[b] - per[static_cast<size_t>(g)][b];
    loo[static_cast<size_t>(g)] = dist(c, n - gsize[static_cast<size_t>(g)]);
    mean += loo[static_cast<size_t>(g)];
  }
  mean /= groups;
  double ss = 0.0;
  for (double d : loo) ss += (d - mean) * (d - mean);
  est.error_bar = std::sqrt((groups - 1.0) / groups * ss);
  return est;
}

double expected_histogram_distance(const std::vector<double>& q, const std::vector<double>& r, long long n) {
  if (q.size() != r.size()) fail(ErrorCode::InvalidArgument, "bin vectors must match");
  if (n <= 0) fail(ErrorCode::EmptyEnsemble, "expected distance needs N > 0");
  const double nn = static_cast<double>(n);
  const double lg_n = std::lgamma(nn + 1.0);
  double total = 0.0;
  for (size_t b = 0; b < q.size(); ++b) {
    const double p = std::clamp(q[b], 0.0, 1.0);
    if (p == 0.0 || p == 1.0) {
      total += std::abs(p - r[b]);
      continue;
    }
    const double mean = nn * p;
    const double sd = std::sqrt(nn * p * (1.0 - p)) + 1.0;
    const auto lo = static_cast<long long>(std::max(0.0, std::floor(mean - 12.0 * sd)));
    const auto hi = static_cast<long long>(std::min(nn, std::ceil(mean + 12.0 * sd)));
    double acc = 0.0;
    for (long long k = lo; k <= hi; ++k) {
      const double kk = static_cast<double>(k);
      const double lp =
          lg_n - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) + kk * std::log(p) + (nn - kk) * std::log1p(-p);
      acc += std::exp(lp) * std::abs(kk / nn - r[b]);
    }
    total += acc;
  }
  return total;
}

MarginalTest velocity_marginal_test(const Ensemble& ens, const std::vector<double>& r, double vmax, double factor) {
  const auto n = static_cast<long long>(ens.v.size());
  if (n == 0) fail(ErrorCode::EmptyEnsemble, "empty ensemble");
  const int nv = static_cast<int>(r.size());
  std::vector<long long> counts(r.size(), 0);
  for (double v : ens.v)
    ++counts[static_cast<size_t>(std::clamp(static_cast<int>(std::floor((v + vmax) / (2.0 * vmax) * nv)), 0, nv - 1))];
  MarginalTest mt;
  for (size_t b = 0; b < r.size(); ++b) {
    mt.distance += std::abs(static_cast<double>(counts[b]) / n - r[b]);
    mt.error_aggregate += std::sqrt(r[b] * (1.0 - r[b]) / n);
  }
  mt.pass = mt.distance <= factor * mt.error_aggregate;
  return mt;
}

ChiSquare post_jump_chi_square(const JumpProcess& process, double v_pre, int samples, int bins, std::uint64_t seed,
                               double level_z) {
  const CollisionKernel& k = process.model().kernel;
  if (!(k.kind == KernelKind::Separable || (k.kind == KernelKind::Perturbed && k.beta == 0.0)))
    fail(ErrorCode::InvalidArgument, "chi-square law is the separable post-jump density");
  if (samples < 1 || bins < 2) fail(ErrorCode::InvalidArgument, "need samples and at least two bins");
  RngStream rng(seed, 0);
  std::vector<long long> counts(static_cast<size_t>(bins), 0);
  for (int i = 0; i < samples; ++i) {
    const double w = process.post_jump(v_pre, rng);
    ++counts[static_cast<size_t>(std::clamp(static_cast<int>(std::floor((w + k.vmax) / (2.0 * k.vmax) * bins)), 0,
                                            bins - 1))];
  }
  auto cdf = [&](double v) {
    const double s = std::pow(std::abs(v) / k.vmax, k.alpha + 1.0);
    return 0.5 + (v < 0.0 ? -0.5 : 0.5) * s;
  };
  ChiSquare cs;
  for (int b = 0; b < bins; ++b) {
    const double a = -k.vmax + 2.0 * k.vmax * b / bins, c = -k.vmax + 2.0 * k.vmax * (b + 1) / bins;
    const double expct = samples * (cdf(c) - cdf(a));
    const double d = static_cast<double>(counts[static_cast<size_t>(b)]) - expct;
    cs.statistic += d * d / expct;
  }
  cs.dof = bins - 1;
  // Wilson-Hilferty approximation of the upper chi-square quantile.
  const double h = 2.0 / (9.0 * cs.dof);
  cs.critical = cs.dof * std::pow(1.0 - h + level_z * std::sqrt(h), 3);
  cs.pass = cs.statistic <= cs.critical;
  return cs;
}

}  // namespace kinetic
