#pragma once

#include "kinetic/fourier.hpp"

#include <vector>

namespace kinetic {

// Dense per-mode operator stored in the nodal convention: (A f)_j = sum_k mat_jk f_k,
// so the kernel entries are A_jk = mat_jk / w_k.
struct ModeOperator {
  int p = 0;
  CMat mat;

  CVec apply(const CVec& f) const { return mat * f; }
  CMat kernel(const Model& model) const;
};

ModeOperator operator*(const ModeOperator& a, const ModeOperator& b);
ModeOperator operator+(const ModeOperator& a, const ModeOperator& b);
ModeOperator operator-(const ModeOperator& a, const ModeOperator& b);

// Norm from X_a to X_b: max_k sum_j W_b(sigma_j) |A_jk| w_j / W_a(sigma_k).
double op_norm(const Model& model, const CMat& mat, double a, double b);
double op_norm(const Model& model, const ModeOperator& op, double a = 0.0, double b = 0.0);
double op_norm(const Model& model, const Mat& kernel_entries, double a, double b, bool kernel_convention);

struct DenominatorOptions {
  double tolerance = 1e-13;
};

// lambda + sigma_k + 2 pi i p v_k, checked against the singularity tolerance.
CVec denominators(const Model& model, cplx lambda, int p, const DenominatorOptions& opt = {});

ModeOperator K_op(const Model& model);
ModeOperator kernel_op(const Model& model, const Mat& kernel_entries);
ModeOperator R_op(const Model& model, cplx lambda, int p, int order = 0, const DenominatorOptions& opt = {});
ModeOperator M_op(const Model& model, cplx lambda, int p, const DenominatorOptions& opt = {});
ModeOperator M_derivative(const Model& model, cplx lambda, int p, int q, const DenominatorOptions& opt = {});
ModeOperator power_Ln(const Model& model, cplx lambda, int p, int n);
// q-th lambda-derivative of M^n by Leibniz over factor positions.
ModeOperator derivative_of_power(const Model& model, cplx lambda, int p, int n, int q);
// All derivatives of orders 0..q of a power of a smooth operator family.
std::vector<CMat> power_derivatives(const std::vector<CMat>& factor_derivs, int n);

ModeOperator G_op(const Model& model, cplx lambda, int p, int n);
ModeOperator G_derivative(const Model& model, cplx lambda, int p, int n, int k);

// sum over multi-indices r in N^n with |r| = q of (q choose r) prod_{j<n} ||theta_{r_j}||.
// With time_moments each term also carries prod_j r_j!, the factor int t^r e^{-sigma t} dt = r! / sigma^{r+1}
// contributes; the two agree for q <= 1.
double multinomial_constant(const std::vector<double>& theta_sups, int n, int q, bool time_moments = false);

struct ScanRow {
  double eta = 0.0;
  double norm_M2 = 0.0;
  double norm_RK2 = 0.0;
  std::vector<double> norm_Mq;
  double envelope_product = 0.0;  // ||M^2|| sqrt|eta|
};

struct ScanResult {
  std::vector<int> powers;
  std::vector<ScanRow> rows;
  double envelope_constant = 0.0;  // max of envelope_product
};

ScanResult norm_decay_scan(const Model& model, int p, const std::vector<double>& etas,
                           const std::vector<int>& powers, int threads = 1);

struct ApproxCheckRow {
  cplx lambda;
  double difference = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct ApproxCheck {
  double mu = 0.0;
  std::vector<ApproxCheckRow> rows;
  bool pass = true;
};

ApproxCheck approx_power_bound_check(const Model& model, double delta, int n,
                                     const std::vector<cplx>& lambdas, int p = 0);

}  // namespace kinetic
