#include "kinetic/spectral.hpp"

#include "kinetic/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace kinetic {

Vec invariant_velocity_density(const Model& model, const PowerOptions& opt) {
  const int n = model.size();
  const Mat m0 = model.nodal_kernel() * model.sigma.cwiseInverse().asDiagonal();
  Vec x = Vec::Constant(n, 1.0 / model.w().sum());
  for (int it = 0; it < opt.max_iter; ++it) {
    Vec y = m0 * x;
    y /= y.dot(model.w());
    const double res = (y - x).cwiseAbs().dot(model.w());
    x = std::move(y);
    if (res <= opt.tol) return x;
  }
  fail(ErrorCode::NoConvergence, "power iteration did not converge in " + std::to_string(opt.max_iter) +
                                     " steps");
}

Vec invariant_density(const Model& model, const Vec& phi0) {
  Vec psi = phi0.cwiseQuotient(model.sigma);
  psi /= psi.dot(model.w());
  return psi;
}

cplx duality(const Model& model, const CVec& f, const CVec& g) {
  cplx acc = 0.0;
  for (Eigen::Index j = 0; j < f.size(); ++j) acc += f[j] * std::conj(g[j]) * model.w()[j];
  return acc;
}

CMat adjoint(const Model& model, const CMat& mat) {
  const CVec w = model.w().cast<cplx>();
  return w.cwiseInverse().asDiagonal() * mat.adjoint() * w.asDiagonal();
}

namespace {

struct InverseIteration {
  CVec x;
  cplx mu;
  int iterations = 0;
};

InverseIteration inverse_iteration(const CMat& m, cplx shift, CVec x, double tol, int max_iter) {
  const auto n = m.rows();
  Eigen::PartialPivLU<CMat> lu(shift * CMat::Identity(n, n) - m);
  x /= x.norm();
  for (int it = 1; it <= max_iter; ++it) {
    CVec y = lu.solve(x);
    y /= y.norm();
    const CVec my = m * y;
    const cplx mu = y.dot(my);  // y^H M y
    const double res = (my - mu * y).norm();
    x = std::move(y);
    if (res <= tol * std::max(1.0, std::abs(mu))) return {x, mu, it};
  }
  fail(ErrorCode::NoConvergence, "inverse iteration did not converge");
}

}  // namespace

Eigenpair leading_eigenpair(const Model& model, const CMat& m, const EigenOptions& opt) {
  const auto n = m.rows();
  const cplx shift(1.0 + opt.shift_offset, 0.0);
  CVec seed = CVec::Ones(n);
  const auto right = inverse_iteration(m, shift, seed, opt.tol, opt.max_iter);
  if (std::abs(right.mu - 1.0) > opt.r0)
    fail(ErrorCode::EigenvalueLeftDisc, "leading eigenvalue left the disc |z - 1| <= r0");
  const CMat madj = adjoint(model, m);
  const auto left = inverse_iteration(madj, std::conj(shift), seed, opt.tol, opt.max_iter);
  Eigenpair e;
  e.mu = right.mu;
  e.iterations = right.iterations + left.iterations;
  e.phi = right.x;
  const cplx total = (e.phi.array() * model.w().array().cast<cplx>()).sum();
  if (std::abs(total) > 1e-8 * e.phi.cwiseAbs().dot(model.w())) e.phi /= total;
  e.phi_star = left.x;
  const cplx pair = duality(model, e.phi, e.phi_star);
  e.phi_star *= std::conj(1.0 / pair);
  return e;
}

Eigenpair leading_eigenpair(const Model& model, cplx lambda, int p, const EigenOptions& opt) {
  return leading_eigenpair(model, M_op(model, lambda, p).mat, opt);
}

CVec eigenvalues(const CMat& m) {
  Eigen::ComplexEigenSolver<CMat> es(m, false);
  return es.eigenvalues();
}

double spectral_radius(const CMat& m) { return eigenvalues(m).cwiseAbs().maxCoeff(); }

namespace {

std::vector<cplx> contour_nodes(const ProjectionOptions& opt) {
  std::vector<cplx> z;
  for (int j = 0; j < opt.n_contour; ++j)
    z.push_back(cplx(1.0, 0.0) + opt.r0 * std::polar(1.0, kTwoPi * (j + 0.5) / opt.n_contour));
  return z;
}

void verify_contour(const CMat& m, const ProjectionOptions& opt) {
  const CVec ev = eigenvalues(m);
  const auto nodes = contour_nodes(opt);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    for (const cplx& z : nodes)
      if (std::abs(z - ev[i]) < 1e-8) fail(ErrorCode::ContourHitsSpectrum, "contour node on an eigenvalue");
  int inside = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double r = std::abs(ev[i] - 1.0);
    if (std::abs(r - opt.r0) < 1e-3) fail(ErrorCode::SeparationFailure, "eigenvalue within 1e-3 of the contour");
    if (r < opt.r0) ++inside;
  }
  if (inside != 1)
    fail(ErrorCode::SeparationFailure, std::to_string(inside) + " eigenvalues inside the contour");
}

}  // namespace

CMat spectral_projection(const CMat& m, const ProjectionOptions& opt) {
  if (opt.verify_separation) verify_contour(m, opt);
  const auto n = m.rows();
  const CMat id = CMat::Identity(n, n);
  CMat acc = CMat::Zero(n, n);
  for (const cplx& z : contour_nodes(opt)) {
    Eigen::PartialPivLU<CMat> lu(z * id - m);
    acc += (z - 1.0) * lu.inverse();
  }
  return acc / static_cast<double>(opt.n_contour);
}

ModeOperator spectral_projection(const Model& model, cplx lambda, int p, const ProjectionOptions& opt) {
  return {p, spectral_projection(M_op(model, lambda, p).mat, opt)};
}

CMat projection_derivative_contour(const Model& model, cplx lambda, int p, const ProjectionOptions& opt) {
  const CMat m = M_op(model, lambda, p).mat;
  const CMat dm = M_derivative(model, lambda, p, 1).mat;
  if (opt.verify_separation) verify_contour(m, opt);
  const auto n = m.rows();
  const CMat id = CMat::Identity(n, n);
  CMat acc = CMat::Zero(n, n);
  for (const cplx& z : contour_nodes(opt)) {
    const CMat r = Eigen::PartialPivLU<CMat>(z * id - m).inverse();
    acc += (z - 1.0) * (r * dm * r);
  }
  return acc / static_cast<double>(opt.n_contour);
}

double mu_prime_zero(const Model& model, const Vec& phi0) {
  const double v = -phi0.cwiseQuotient(model.sigma).dot(model.w());
  if (!(v < 0.0)) fail(ErrorCode::NonNegativeResult, "mu'(0) must be negative");
  return v;
}

ZeroModeSpectrum zero_mode_spectrum(const Model& model, const PhiOptions& opt) {
  ZeroModeSpectrum zs;
  zs.phi0 = invariant_velocity_density(model);
  zs.psi = invariant_density(model, zs.phi0);
  zs.mu_prime0 = mu_prime_zero(model, zs.phi0);
  ProjectionOptions po = opt.projection;
  zs.P0 = spectral_projection(model, 0.0, 0, po).mat;
  po.verify_separation = false;
  auto diff = [&](double h) {
    return CMat((spectral_projection(model, h, 0, po).mat - spectral_projection(model, -h, 0, po).mat) /
                (2.0 * h));
  };
  zs.P0_prime = (4.0 * diff(0.5 * opt.h) - diff(opt.h)) / 3.0;
  return zs;
}

CVec apply_Phi0(const Model& model, const ZeroModeSpectrum& zs, const CVec& f) {
  (void)model;
  return -(zs.P0_prime * f) / zs.mu_prime0;
}

PhiResult regularized_inverse_Phi0(const Model& model, const CVec& f, const PhiOptions& opt) {
  const cplx total = (f.array() * model.w().array().cast<cplx>()).sum();
  if (std::abs(total) > 1e-10) fail(ErrorCode::NonZeroMean, "Phi_0 requires a zero-mean vector");
  const ZeroModeSpectrum zs = zero_mode_spectrum(model, opt);
  PhiResult out;
  out.value = apply_Phi0(model, zs, f);
  // R(1, M_lambda) P(lambda) f = P(lambda) f / (1 - mu(lambda)) tends to Phi_0 f at rate O(lambda).
  auto limit_form = [&](double lam) {
    const CMat p = spectral_projection(model, lam, 0, opt.projection).mat;
    const Eigenpair e = leading_eigenpair(model, lam, 0);
    return CVec((p * f) / (1.0 - e.mu));
  };
  const double lam = opt.cross_check_lambda;
  out.raw_cross_check = limit_form(lam);
  out.cross_check = 2.0 * limit_form(0.5 * lam) - out.raw_cross_check;
  out.raw_discrepancy = xs_norm(model, CVec(out.raw_cross_check - out.value), 0.0);
  out.discrepancy = xs_norm(model, CVec(out.cross_check - out.value), 0.0);
  if (out.discrepancy > 10.0 * opt.tol)
    fail(ErrorCode::InconsistentLimit, "Phi_0 evaluations differ by " + std::to_string(out.discrepancy));
  return out;
}

}  // namespace kinetic
