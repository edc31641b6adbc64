#pragma once

#include "kinetic/operators.hpp"

namespace kinetic {

struct PowerOptions {
  double tol = 1e-13;
  int max_iter = 100000;
};

// Perron vector of the stochastic mode-0 operator M_0, unit mass.
Vec invariant_velocity_density(const Model& model, const PowerOptions& opt = {});
// Psi = phi0 / sigma renormalised to unit mass.
Vec invariant_density(const Model& model, const Vec& phi0);

// Discrete duality <f, g> = sum_j f_j conj(g_j) w_j.
cplx duality(const Model& model, const CVec& f, const CVec& g);
// Matrix of the adjoint with respect to the duality above.
CMat adjoint(const Model& model, const CMat& mat);

struct Eigenpair {
  cplx mu;
  CVec phi;       // unit mass when lambda = 0
  CVec phi_star;  // <phi, phi_star> = 1
  int iterations = 0;
};

struct EigenOptions {
  double tol = 1e-13;
  int max_iter = 500;
  double r0 = 0.5;
  double shift_offset = 0.125;  // inverse iteration shift 1 + offset
};

Eigenpair leading_eigenpair(const Model& model, cplx lambda, int p = 0, const EigenOptions& opt = {});
Eigenpair leading_eigenpair(const Model& model, const CMat& m, const EigenOptions& opt = {});

struct ProjectionOptions {
  double r0 = 0.5;
  int n_contour = 64;
  bool verify_separation = true;
};

// (1 / 2 pi i) oint_{|z-1|=r0} (z - M_lambda)^{-1} dz by the trapezoidal rule.
ModeOperator spectral_projection(const Model& model, cplx lambda, int p = 0, const ProjectionOptions& opt = {});
CMat spectral_projection(const CMat& m, const ProjectionOptions& opt = {});
// Derivative form -(1 / 2 pi i) oint R(z) M' R(z) dz, where M' = dM/dlambda.
CMat projection_derivative_contour(const Model& model, cplx lambda, int p = 0, const ProjectionOptions& opt = {});

double mu_prime_zero(const Model& model, const Vec& phi0);

// Eigenvalues of a dense operator and its spectral radius.
CVec eigenvalues(const CMat& m);
double spectral_radius(const CMat& m);

// Precomputed pieces around lambda = 0 on mode 0.
struct ZeroModeSpectrum {
  Vec phi0;
  Vec psi;
  double mu_prime0 = 0.0;
  CMat P0;
  CMat P0_prime;  // Richardson-extrapolated centred difference
};

struct PhiOptions {
  double h = 1e-4;
  double tol = 1e-4;
  double cross_check_lambda = 1e-3;
  ProjectionOptions projection{};
};

ZeroModeSpectrum zero_mode_spectrum(const Model& model, const PhiOptions& opt = {});

struct PhiResult {
  CVec value;
  CVec raw_cross_check;  // R(1, M_lambda) P(lambda) f at the cross-check lambda
  CVec cross_check;      // the same at lambda and lambda / 2, extrapolated to remove the O(lambda) term
  double raw_discrepancy = 0.0;
  double discrepancy = 0.0;  // against the extrapolated cross-check
};

// Phi_0 f = -P'(0) f / mu'(0) for zero-mean f.
PhiResult regularized_inverse_Phi0(const Model& model, const CVec& f, const PhiOptions& opt = {});
CVec apply_Phi0(const Model& model, const ZeroModeSpectrum& zs, const CVec& f);

}  // namespace kinetic
