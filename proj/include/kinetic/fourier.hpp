#pragma once

#include "kinetic/model.hpp"

#include <complex>
#include <vector>

namespace kinetic {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Band-limited field f(x, v) = sum_{|p| <= P} fhat(p, v) exp(2 pi i p x) on the unit torus.
struct StateField {
  int P = 0;
  std::vector<CVec> coeffs;  // coeffs[p + P]

  StateField() = default;
  StateField(int band_limit, int n_v);

  CVec& mode(int p) { return coeffs[static_cast<size_t>(p + P)]; }
  const CVec& mode(int p) const { return coeffs[static_cast<size_t>(p + P)]; }
  int n_v() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs.front().size()); }

  static StateField homogeneous(const CVec& g);
  bool is_real(double tol = 1e-14) const;
};

StateField operator+(const StateField& a, const StateField& b);
StateField operator-(const StateField& a, const StateField& b);
StateField operator*(double s, const StateField& a);

// Phase vector 2 pi p v_k of mode p.
Vec mode_phase(const Model& model, int p);
// Transport symbol sigma_k + 2 pi i p v_k.
CVec transport_symbol(const Model& model, int p);

cplx mass(const Model& model, const StateField& f);

StateField free_stream(const Model& model, const StateField& f, double t);

struct ResolventOptions {
  double tolerance = 1e-13;
};
CVec resolvent_A(const Model& model, const CVec& f, cplx lambda, int p, const ResolventOptions& opt = {});
StateField resolvent_A(const Model& model, const StateField& f, cplx lambda, const ResolventOptions& opt = {});

// x-integrated X_s norm: sum_j min(1, sigma_j)^{-s} w_j int |f(x, v_j)| dx.
double xs_norm(const Model& model, const StateField& f, double s, int oversample = 8);
double l1_norm(const Model& model, const StateField& f, int oversample = 8);

// int_0^1 |sum_p c_p e^{2 pi i p x}| dx for one velocity; kinks of real fields located exactly.
double torus_abs_integral(const std::vector<cplx>& c, int P, int samples);

}  // namespace kinetic
