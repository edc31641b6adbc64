#pragma once

#include "kinetic/spectral.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace kinetic {

enum class TraceBranch { Neumann, Direct, Split, Regularized };
const char* to_string(TraceBranch b);

struct TraceOptions {
  double zero_window = 1e-2;       // mode-0 spectral split for |eta| below this
  double cond_limit = 1e12;        // SingularSolve above this condition estimate
  double neumann_threshold = 0.5;  // Neumann series when ||M||_{B(X_0)} is below this
  double mass_tol = 1e-10;
  PhiOptions phi{};
};

// Boundary values of the full resolvent and of the trace functions Upsilon_n, per mode.
// The zero-mode spectral data needed at lambda = 0 is computed on first use.
class TraceEvaluator {
 public:
  explicit TraceEvaluator(const Model& model, TraceOptions opt = {});

  const Model& model() const { return *model_; }
  const TraceOptions& options() const { return opt_; }
  const ZeroModeSpectrum& zero_mode() const;

  // (I - M_lambda)^{-1} g with the mode-0 regularisation on the imaginary axis.
  CVec inverse(const CVec& g, int p, cplx lambda, TraceBranch* branch = nullptr) const;
  // Full resolvent (lambda - A - K)^{-1} g = R(lambda, A) (I - M_lambda)^{-1} g.
  CVec resolvent(const CVec& g, int p, cplx lambda, TraceBranch* branch = nullptr) const;
  // Laplace transform of S_m: sum_{k >= m} R M^k g, with the m = 0 convention Upsilon_0 = Upsilon_1.
  CVec upsilon(const CVec& g, int p, cplx lambda, int m, TraceBranch* branch = nullptr) const;
  // k-th lambda-derivative of Upsilon_m.
  CVec upsilon_lambda_derivative(const CVec& g, int p, cplx lambda, int m, int k) const;
  // k-th lambda-derivative of R(lambda, A) M_lambda^j g.
  CVec RMj_derivative(const CVec& g, int p, cplx lambda, int j, int k) const;

 private:
  const Model* model_;
  TraceOptions opt_;
  Mat kn_;
  mutable std::once_flag zero_once_;
  mutable std::unique_ptr<ZeroModeSpectrum> zero_;

  CVec solve_direct(const CMat& m, const CVec& g, TraceBranch* branch) const;
};

// R(i eta) f for a mass-zero field.
StateField trace_resolvent(const TraceEvaluator& ev, const StateField& f, double eta);
// d^k / d eta^k Upsilon_n(eta) f.
StateField trace_Upsilon(const TraceEvaluator& ev, const StateField& f, int n, double eta, int k = 0);
// Partial sum s_m(i eta) f = sum_{j=1}^{m} R M^j f.
StateField trace_partial_sum(const TraceEvaluator& ev, const StateField& f, int m, double eta);

struct QuadratureOptions {
  double eta_max = 200.0;
  int gauss_order = 8;
  double dense_half_width = 0.05;
  int dense_panels = 16;
  double relative_width = 0.05;  // panel width <= relative_width (1 + |eta|)
  double tail_tol = 1e-3;
  int threads = 1;
};

// Composite Gauss-Legendre nodes and weights on [-eta_max, eta_max].
struct EtaRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
EtaRule eta_rule(double t, const QuadratureOptions& opt);

struct Reconstruction {
  StateField value;
  double tail_estimate = 0.0;
  double fitted_power = 0.0;
  int nodes = 0;
};

// (1 / 2 pi) int e^{i eta t} Upsilon_{n+1}(eta) f d eta, i.e. S_{n+1}(t) f.
Reconstruction inverse_laplace_remainder(const TraceEvaluator& ev, const StateField& f, int n, double t,
                                         const QuadratureOptions& opt = {});
// (1 / 2 pi) int e^{(eps + i eta) t} S_{n+1}(eps + i eta) f d eta.
Reconstruction bromwich_remainder(const TraceEvaluator& ev, const StateField& f, int n, double t, double eps,
                                  const QuadratureOptions& opt = {});

struct IntegrabilityRow {
  double eta = 0.0;
  double norm = 0.0;
  double partial_integral = 0.0;
};

struct IntegrabilityScan {
  int p = 0;
  int q = 0;
  std::vector<IntegrabilityRow> rows;
  double fitted_power = 0.0;
  double fit_stderr = 0.0;
  bool fit_ok = false;
  std::string fit_error;
  double band_edge = 0.0;        // 2 pi |p| vmax + sup sigma
  double max_tail_increment = 0.0;  // largest partial-integral increment beyond the band
};

// ||M_{i eta}^q||_{B(X_0)} per eta, a tail-power fit on [fit_lo, fit_hi] and the running integral.
IntegrabilityScan integrability_scan(const Model& model, int p, int q, const std::vector<double>& etas, double fit_lo,
                                     double fit_hi, int threads = 1);

struct ModulusRow {
  double t = 0.0;
  double eps = 0.0;    // dist(t) (1 + t)^(N0 - 1)
  double omega = 0.0;  // empirical modulus at pi / t
  double bound = 0.0;  // K omega^((p - 4) / p)
};

struct EpsilonReport {
  std::vector<ModulusRow> rows;
  double K = 0.0;
  double anchor_t = 0.0;
  double eps_first = 0.0;
  double eps_last = 0.0;
  bool decreasing = false;
};

// Empirical modulus of continuity of eta -> samples on a uniform grid; the distance is the
// mode-summed weighted l1 norm, an upper bound for the X_0 distance.
double empirical_modulus(const Model& model, const std::vector<double>& etas, const std::vector<StateField>& samples,
                         double s);

EpsilonReport epsilon_diagnostic(const Model& model, const std::vector<double>& times, const std::vector<double>& dist,
                                 const std::vector<double>& etas, const std::vector<StateField>& theta_samples,
                                 double exponent, double anchor_t);

}  // namespace kinetic
