#pragma once

#include "kinetic/fourier.hpp"

#include <vector>

namespace kinetic {

struct PropagatorOptions {
  double term_tol = 1e-17;     // Taylor series stops once a term drops below this relative size
  double substep_norm = 2.0;   // bound on ||tau B|| per substep
  int max_terms = 200;
  int threads = 1;
};

// exp(t L_p) applied to the columns of x, L_p = K - diag(sigma + 2 pi i p v).
CMat semigroup_mode(const Model& model, int p, const CMat& x, double t, const PropagatorOptions& opt = {});

// Chain c_0' = A c_0, c_m' = A c_m + C_m c_{m-1}, A = -diag(sigma + 2 pi i p v).
// couplings[m-1] is C_m in the nodal convention. comps holds c_0..c_n and is advanced by dt.
void chain_advance(const Model& model, int p, const std::vector<const Mat*>& couplings, std::vector<CMat>& comps,
                   double dt, const PropagatorOptions& opt = {});

StateField semigroup_apply(const Model& model, const StateField& f, double t, const PropagatorOptions& opt = {});
// U_0 f .. U_n f at time t through the triangular hierarchy; U_0 in closed form.
std::vector<StateField> dyson_iterates(const Model& model, const StateField& f, double t, int n,
                                       const PropagatorOptions& opt = {});
// S_{n+1}(t) f = V(t) f - sum_{k <= n} U_k(t) f.
StateField remainder(const Model& model, const StateField& f, double t, int n, const PropagatorOptions& opt = {});

struct PartialSumRow {
  double t = 0.0;
  double norm = 0.0;      // ||sum_{k<=n} U_k(t) f||_{X_0}
  double envelope = 0.0;  // norm * (t / log t)^N0
};

struct PartialSumReport {
  int n = 0;
  int n0 = 0;
  std::vector<PartialSumRow> rows;
  double sup_envelope = 0.0;
  bool upper_half_nonincreasing = false;
};

PartialSumReport partial_sum_decay_scan(const Model& model, const StateField& f, int n, const std::vector<double>& times,
                                        const PropagatorOptions& opt = {});

// Joint time series used by the decay experiment.
struct RelaxationRow {
  double t = 0.0;
  double dist = 0.0;            // ||V(t) f - rho Psi||_{X_0}
  double partial_sum_norm = 0.0;
  double remainder_norm = 0.0;  // ||S_{n+1}(t) f||_{X_0}
};

std::vector<RelaxationRow> relaxation_series(const Model& model, const StateField& f, const Vec& psi,
                                             const std::vector<double>& times, int n_partial,
                                             const PropagatorOptions& opt = {});

struct ThetaOptions {
  double tol = 1e-8;
  int initial_steps = 256;
  int max_steps = 1 << 18;
};

struct ThetaBounds {
  int n = 0;
  double t = 0.0;
  double delta = 0.0;
  std::vector<Vec> levels;  // Theta_0 .. Theta_n at time t
  Vec bound;                // (2 sigma / delta)^n exp(-t delta / 2)
  std::vector<bool> region; // sigma(w) >= delta / 2
  double max_value = 0.0;
  double max_bound_excess = 0.0;  // max over region of Theta_n - bound
  double step_error = 0.0;
  bool le_one = false;
  bool within_bound = false;
};

// Theta recursion for the kernel of K^(delta), solved per w as a triangular linear ODE.
ThetaBounds theta_n_bounds(const Model& model, int n, double t, double delta, const ThetaOptions& opt = {});

enum class KernelFactor { Full, Kept, Removed };

struct MixedIterateReport {
  std::vector<KernelFactor> sequence;
  double measured = 0.0;  // ||V_n(t)||_{B(X_0)} over the impulse basis
  double bound = 1.0;     // product of ||K_j||_{B(X_-1, X_0)}
  bool pass = false;
};

// V_n(t) with K_1..K_n from the sequence; Kept = K^(delta), Removed = K - K^(delta).
MixedIterateReport mixed_iterate_norm_check(const Model& model, const std::vector<KernelFactor>& sequence,
                                            double delta, double t, const PropagatorOptions& opt = {});

}  // namespace kinetic
