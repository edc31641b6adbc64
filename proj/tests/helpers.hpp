#pragma once
// Shared fixtures for the unit tests.

#include "kinetic/errors.hpp"
#include "kinetic/fourier.hpp"
#include "kinetic/model.hpp"

#include <doctest.h>

#include <random>

namespace testing_support {

inline kinetic::Model separable(double alpha, int n_v) {
  return kinetic::build_model(kinetic::CollisionKernel::separable(alpha), kinetic::VelocityGrid::midpoint(n_v));
}

inline kinetic::Model config_a(int n_v) { return kinetic::with_n0(separable(0.5, n_v)); }

template <class Fn>
kinetic::ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const kinetic::KineticError& e) {
    return e.code();
  }
  FAIL("expected a KineticError");
  return kinetic::ErrorCode::IoError;
}

// Real field (1 + cos 2 pi x) g(v) with mode coefficients g and g / 2.
inline kinetic::StateField cosine_field(const kinetic::Vec& g, int P = 1) {
  kinetic::StateField f(P, static_cast<int>(g.size()));
  f.mode(0) = g.cast<kinetic::cplx>();
  if (P >= 1) {
    f.mode(1) = 0.5 * g.cast<kinetic::cplx>();
    f.mode(-1) = f.mode(1);
  }
  return f;
}

// Random real field with Hermitian-symmetric coefficients.
inline kinetic::StateField random_real_field(int P, int n_v, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  kinetic::StateField f(P, n_v);
  for (int j = 0; j < n_v; ++j) f.mode(0)[j] = 2.0 + u(gen);
  for (int p = 1; p <= P; ++p)
    for (int j = 0; j < n_v; ++j) {
      f.mode(p)[j] = kinetic::cplx(u(gen), u(gen));
      f.mode(-p)[j] = std::conj(f.mode(p)[j]);
    }
  return f;
}

inline double max_abs_diff(const kinetic::StateField& a, const kinetic::StateField& b) {
  double d = 0.0;
  for (int p = -a.P; p <= a.P; ++p) d = std::max(d, (a.mode(p) - b.mode(p)).cwiseAbs().maxCoeff());
  return d;
}

}  // namespace testing_support
