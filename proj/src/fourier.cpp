#include "kinetic/fourier.hpp"

#include "kinetic/errors.hpp"
#include "kinetic/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace kinetic {

StateField::StateField(int band_limit, int n_v) : P(band_limit) {
  if (band_limit < 0) fail(ErrorCode::InvalidArgument, "band limit must be >= 0");
  coeffs.assign(static_cast<size_t>(2 * band_limit + 1), CVec::Zero(n_v));
}

StateField StateField::homogeneous(const CVec& g) {
  StateField f(0, static_cast<int>(g.size()));
  f.mode(0) = g;
  return f;
}

bool StateField::is_real(double tol) const {
  for (int p = 0; p <= P; ++p) {
    const double scale = std::max(1.0, mode(p).cwiseAbs().maxCoeff());
    if ((mode(p) - mode(-p).conjugate()).cwiseAbs().maxCoeff() > tol * scale) return false;
  }
  return true;
}

namespace {

StateField combine(const StateField& a, const StateField& b, double sb) {
  const int P = std::max(a.P, b.P);
  const int n = std::max(a.n_v(), b.n_v());
  StateField out(P, n);
  for (int p = -a.P; p <= a.P; ++p) out.mode(p) += a.mode(p);
  for (int p = -b.P; p <= b.P; ++p) out.mode(p) += sb * b.mode(p);
  return out;
}

}  // namespace

StateField operator+(const StateField& a, const StateField& b) { return combine(a, b, 1.0); }
StateField operator-(const StateField& a, const StateField& b) { return combine(a, b, -1.0); }
StateField operator*(double s, const StateField& a) {
  StateField out = a;
  for (auto& c : out.coeffs) c *= s;
  return out;
}

Vec mode_phase(const Model& model, int p) { return (kTwoPi * p) * model.v(); }

CVec transport_symbol(const Model& model, int p) {
  CVec d(model.size());
  for (int k = 0; k < model.size(); ++k) d[k] = cplx(model.sigma[k], kTwoPi * p * model.v()[k]);
  return d;
}

cplx mass(const Model& model, const StateField& f) {
  return (f.mode(0).array() * model.w().array().cast<cplx>()).sum();
}

StateField free_stream(const Model& model, const StateField& f, double t) {
  if (t < 0.0) fail(ErrorCode::NegativeTime, "free_stream requires t >= 0");
  StateField out = f;
  for (int p = -f.P; p <= f.P; ++p) {
    const CVec d = transport_symbol(model, p);
    for (int k = 0; k < model.size(); ++k) out.mode(p)[k] *= std::exp(-t * d[k]);
  }
  return out;
}

CVec resolvent_A(const Model& model, const CVec& f, cplx lambda, int p, const ResolventOptions& opt) {
  const CVec d = transport_symbol(model, p);
  CVec out(f.size());
  for (int k = 0; k < model.size(); ++k) {
    const cplx den = lambda + d[k];
    if (std::abs(den) <= opt.tolerance)
      fail(ErrorCode::NearSingularDenominator,
           "mode " + std::to_string(p) + ", cell " + std::to_string(k));
    out[k] = f[k] / den;
  }
  return out;
}

StateField resolvent_A(const Model& model, const StateField& f, cplx lambda, const ResolventOptions& opt) {
  StateField out = f;
  for (int p = -f.P; p <= f.P; ++p) out.mode(p) = resolvent_A(model, f.mode(p), lambda, p, opt);
  return out;
}

namespace {

struct TrigPoly {
  const std::vector<cplx>& c;
  int P;
  cplx operator()(double x) const {
    cplx acc = 0.0;
    for (int p = -P; p <= P; ++p) acc += c[static_cast<size_t>(p + P)] * std::polar(1.0, kTwoPi * p * x);
    return acc;
  }
};

double gauss_abs(const TrigPoly& g, double a, double b, bool real) {
  const GaussRule& r = gauss_legendre(10);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (size_t i = 0; i < r.nodes.size(); ++i) {
    const cplx val = g(mid + half * r.nodes[i]);
    acc += r.weights[i] * (real ? std::abs(val.real()) : std::abs(val));
  }
  return acc * half;
}

}  // namespace

double torus_abs_integral(const std::vector<cplx>& c, int P, int samples) {
  bool real = true;
  double scale = 0.0;
  for (int p = 0; p <= P; ++p) scale = std::max(scale, std::abs(c[static_cast<size_t>(p + P)]));
  if (scale == 0.0) return 0.0;
  for (int p = 0; p <= P; ++p)
    if (std::abs(c[static_cast<size_t>(p + P)] - std::conj(c[static_cast<size_t>(P - p)])) > 1e-14 * scale)
      real = false;
  if (P == 0) return std::abs(c[0]);
  if (real) {
    // A real polynomial with |c_0| >= sum_{p != 0} |c_p| keeps one sign, so |g| integrates to |c_0|.
    const double a = c[static_cast<size_t>(P)].real();
    double side = 0.0;
    for (int p = 1; p <= P; ++p) side += 2.0 * std::abs(c[static_cast<size_t>(p + P)]);
    if (std::abs(a) >= side) return std::abs(a);
    // Single harmonic a + b cos(2 pi x + phase) with |a| < b.
    if (side == 2.0 * std::abs(c[static_cast<size_t>(P + 1)])) {
      const double b = side;
      return 2.0 / kPi * (std::sqrt(b * b - a * a) + a * std::asin(a / b));
    }
  }
  const TrigPoly g{c, P};
  const int m = std::max(samples, 8);
  double total = 0.0;
  double xa = 0.0;
  double ga = g(0.0).real();
  for (int i = 1; i <= m; ++i) {
    const double xb = static_cast<double>(i) / m;
    const double gb = g(xb).real();
    if (real && ga * gb < 0.0) {
      // Bisection to the sign change so each piece is smooth.
      double lo = xa, hi = xb, glo = ga;
      for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid).real();
        if ((gm < 0.0) == (glo < 0.0)) lo = mid, glo = gm;
        else hi = mid;
      }
      const double root = 0.5 * (lo + hi);
      total += gauss_abs(g, xa, root, true) + gauss_abs(g, root, xb, true);
    } else {
      total += gauss_abs(g, xa, xb, real);
    }
    xa = xb;
    ga = gb;
  }
  return total;
}

double xs_norm(const Model& model, const StateField& f, double s, int oversample) {
  const int samples = std::max(256, oversample * (2 * f.P + 1));
  std::vector<cplx> c(static_cast<size_t>(2 * f.P + 1));
  double acc = 0.0;
  for (int j = 0; j < model.size(); ++j) {
    for (int p = -f.P; p <= f.P; ++p) c[static_cast<size_t>(p + f.P)] = f.mode(p)[j];
    acc += xs_weight(model.sigma[j], s) * model.w()[j] * torus_abs_integral(c, f.P, samples);
  }
  return acc;
}

double l1_norm(const Model& model, const StateField& f, int oversample) {
  if (oversample < 4) fail(ErrorCode::InvalidArgument, "oversample must be >= 4");
  return xs_norm(model, f, 0.0, oversample);
}

}  // namespace kinetic
