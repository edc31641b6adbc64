#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kinetic {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Cell-centred midpoint grid on [-vmax, vmax] with Lebesgue weights.
struct VelocityGrid {
  Vec nodes;
  Vec weights;
  double vmax = 1.0;
  int n_v = 0;

  static VelocityGrid midpoint(int n_v, double vmax = 1.0);
  void validate() const;
};

enum class KernelKind { Separable, Perturbed, Tabulated };
enum class PsiKind { Sign, Linear };

struct CollisionKernel {
  KernelKind kind = KernelKind::Separable;
  double alpha = 0.5;
  double beta = 0.0;
  PsiKind psi = PsiKind::Sign;
  double vmax = 1.0;
  Mat table;  // tabulated only, entries k(v_j, v_k)

  static CollisionKernel separable(double alpha, double vmax = 1.0);
  static CollisionKernel perturbed(double alpha, double beta, PsiKind psi, double vmax = 1.0);
  static CollisionKernel tabulated(Mat table, double vmax = 1.0);
  static Mat load_table_csv(const std::string& path);

  // Continuum normalisation c = 1 / int |v|^alpha dv.
  double normalization() const;
  double sigma_tilde(double v) const;
  double psi_value(double v) const;
  bool is_builtin() const { return kind != KernelKind::Tabulated; }
  // k(v, w); tabulated kernels are only defined on grid nodes.
  double operator()(double v, double w) const;
  // Largest integer s with alpha (1 - s) > -1.
  std::optional<int> analytic_n0() const;
};

struct Model {
  VelocityGrid grid;
  CollisionKernel kernel;
  Mat kmat;     // K_jk = k(v_j, v_k)
  Vec sigma;    // sigma_k = sum_j K_jk w_j
  double sigma_sup = 0.0;
  std::optional<int> n0;

  int size() const { return grid.n_v; }
  const Vec& w() const { return grid.weights; }
  const Vec& v() const { return grid.nodes; }
  // K in the nodal convention: (K f)_j = sum_k K_jk w_k f_k.
  Mat nodal_kernel() const;
};

Model build_model(const CollisionKernel& kernel, const VelocityGrid& grid);

struct ThetaResult {
  Vec values;
  double sup = 0.0;
};
ThetaResult theta(const Model& model, double s);

// Weight of X_s: min(1, sigma)^{-s}.
double xs_weight(double sigma, double s);
Vec xs_weights(const Model& model, double s);
double xs_norm(const Model& model, const Eigen::VectorXcd& f, double s);
double xs_norm(const Model& model, const Vec& f, double s);

struct N0Level {
  int n_v = 0;
  std::vector<double> sups;  // indexed by s
};

struct N0Diagnostics {
  std::vector<N0Level> levels;
  std::vector<std::vector<double>> increment_ratios;  // [s][i]
  std::vector<bool> convergent;                        // [s]
  std::optional<int> analytic;
  int refined = 0;
};

struct N0Options {
  int base_n_v = 200;
  std::vector<int> factors{1, 2, 4, 8, 16};
  double ratio_threshold = 0.92;
  int s_max = 12;
};

struct N0Estimate {
  int n0 = 0;
  N0Diagnostics diagnostics;
};

// Refinement test for the largest integer s keeping sup theta_s bounded.
// Built-in kernels return the analytic value and attach the refinement result.
N0Estimate estimate_N0(const Model& model, const N0Options& options = {});

// Rows with sigma_j > delta kept in K^(delta); the rest go to Kbar^(delta),
// matching the sigma_j <= delta sum in mu_delta.
std::pair<Mat, Mat> split_kernel(const Model& model, double delta);
double mu_delta(const Model& model, double delta);

Model with_n0(Model model, const N0Options& options = {});

}  // namespace kinetic
