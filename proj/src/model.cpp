#include "kinetic/model.hpp"

#include "kinetic/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <fstream>
#include <functional>
#include <sstream>

namespace kinetic {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeKernel: return "NegativeKernel";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::InconclusiveRefinement: return "InconclusiveRefinement";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::NearSingularDenominator: return "NearSingularDenominator";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EigenvalueLeftDisc: return "EigenvalueLeftDisc";
    case ErrorCode::ContourHitsSpectrum: return "ContourHitsSpectrum";
    case ErrorCode::SeparationFailure: return "SeparationFailure";
    case ErrorCode::NonNegativeResult: return "NonNegativeResult";
    case ErrorCode::NonZeroMean: return "NonZeroMean";
    case ErrorCode::InconsistentLimit: return "InconsistentLimit";
    case ErrorCode::IntegratorFailure: return "IntegratorFailure";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::SingularSolve: return "SingularSolve";
    case ErrorCode::TailTooLarge: return "TailTooLarge";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::UnboundedInitialData: return "UnboundedInitialData";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

VelocityGrid VelocityGrid::midpoint(int n_v, double vmax) {
  if (n_v < 2 || n_v % 2 != 0) fail(ErrorCode::InvalidArgument, "n_v must be even and >= 2");
  if (!(vmax > 0.0)) fail(ErrorCode::InvalidArgument, "vmax must be positive");
  VelocityGrid g;
  g.n_v = n_v;
  g.vmax = vmax;
  const double h = 2.0 * vmax / n_v;
  g.nodes.resize(n_v);
  g.weights = Vec::Constant(n_v, h);
  // Mirror the right half so the grid is exactly symmetric.
  for (int j = 0; j < n_v / 2; ++j) {
    const double x = (j + 0.5) * h;
    g.nodes[n_v / 2 + j] = x;
    g.nodes[n_v / 2 - 1 - j] = -x;
  }
  return g;
}

void VelocityGrid::validate() const {
  if (n_v <= 0 || nodes.size() != n_v || weights.size() != n_v)
    fail(ErrorCode::InvalidArgument, "grid arrays inconsistent with n_v");
  for (int j = 0; j < n_v; ++j) {
    if (!(weights[j] > 0.0)) fail(ErrorCode::InvalidArgument, "grid weight not positive");
    if (nodes[j] == 0.0) fail(ErrorCode::InvalidArgument, "grid node at v = 0");
    if (j > 0 && !(nodes[j] > nodes[j - 1]))
      fail(ErrorCode::InvalidArgument, "grid nodes not increasing");
  }
}

CollisionKernel CollisionKernel::separable(double alpha, double vmax) {
  if (!(alpha >= 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be >= 0");
  CollisionKernel k;
  k.kind = KernelKind::Separable;
  k.alpha = alpha;
  k.vmax = vmax;
  return k;
}

CollisionKernel CollisionKernel::perturbed(double alpha, double beta, PsiKind psi, double vmax) {
  CollisionKernel k = separable(alpha, vmax);
  k.kind = KernelKind::Perturbed;
  k.beta = beta;
  k.psi = psi;
  // sup |psi| = 1 for both perturbations.
  if (!(std::abs(beta) < 1.0)) fail(ErrorCode::NegativeKernel, "|beta| sup|psi|^2 must be < 1");
  return k;
}

CollisionKernel CollisionKernel::tabulated(Mat table, double vmax) {
  CollisionKernel k;
  k.kind = KernelKind::Tabulated;
  k.table = std::move(table);
  k.vmax = vmax;
  return k;
}

Mat CollisionKernel::load_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open kernel table " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::ConfigError, "non-numeric kernel table entry '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Mat m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (static_cast<Eigen::Index>(rows[j].size()) != n)
      fail(ErrorCode::ConfigError, "kernel table must be square");
    for (Eigen::Index k = 0; k < n; ++k) m(j, k) = rows[j][k];
  }
  return m;
}

double CollisionKernel::normalization() const {
  return (alpha + 1.0) / (2.0 * std::pow(vmax, alpha + 1.0));
}

double CollisionKernel::sigma_tilde(double v) const { return std::pow(std::abs(v), alpha); }

double CollisionKernel::psi_value(double v) const {
  if (psi == PsiKind::Sign) return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
  return v / vmax;
}

double CollisionKernel::operator()(double v, double w) const {
  if (kind == KernelKind::Tabulated)
    fail(ErrorCode::InvalidArgument, "tabulated kernels are defined on grid nodes only");
  double k = normalization() * sigma_tilde(v) * sigma_tilde(w);
  if (kind == KernelKind::Perturbed) k *= 1.0 + beta * psi_value(v) * psi_value(w);
  return k;
}

std::optional<int> CollisionKernel::analytic_n0() const {
  if (kind == KernelKind::Tabulated) return std::nullopt;
  if (alpha == 0.0) return std::nullopt;  // every moment bounded
  // alpha (1 - s) > -1  <=>  s < 1 + 1/alpha
  const double bound = 1.0 + 1.0 / alpha;
  int s = static_cast<int>(std::floor(bound));
  if (static_cast<double>(s) >= bound) --s;
  return s;
}

Mat Model::nodal_kernel() const { return kmat * grid.weights.asDiagonal(); }

Model build_model(const CollisionKernel& kernel, const VelocityGrid& grid) {
  grid.validate();
  Model m;
  m.grid = grid;
  m.kernel = kernel;
  const int n = grid.n_v;
  if (kernel.kind == KernelKind::Tabulated) {
    if (kernel.table.rows() != n || kernel.table.cols() != n)
      fail(ErrorCode::InvalidArgument, "kernel table size does not match the grid");
    m.kmat = kernel.table;
  } else {
    m.kmat.resize(n, n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) m.kmat(j, k) = kernel(grid.nodes[j], grid.nodes[k]);
  }
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      if (!(m.kmat(j, k) >= 0.0))
        fail(ErrorCode::NegativeKernel, "K(" + std::to_string(j) + "," + std::to_string(k) + ") < 0");
  m.sigma = m.kmat.transpose() * grid.weights;
  for (int k = 0; k < n; ++k)
    if (!(m.sigma[k] > 0.0))
      fail(ErrorCode::DegenerateColumn, "sigma_" + std::to_string(k) + " <= 0");
  m.sigma_sup = m.sigma.maxCoeff();
  return m;
}

ThetaResult theta(const Model& model, double s) {
  const int n = model.size();
  Vec weight(n);
  for (int j = 0; j < n; ++j) weight[j] = std::pow(model.sigma[j], -s) * model.w()[j];
  ThetaResult r;
  r.values = (model.kmat.transpose() * weight).cwiseQuotient(model.sigma);
  r.sup = r.values.maxCoeff();
  return r;
}

double xs_weight(double sigma, double s) { return std::pow(std::min(1.0, sigma), -s); }

Vec xs_weights(const Model& model, double s) {
  Vec w(model.size());
  for (int j = 0; j < model.size(); ++j) w[j] = xs_weight(model.sigma[j], s);
  return w;
}

double xs_norm(const Model& model, const Eigen::VectorXcd& f, double s) {
  double acc = 0.0;
  for (int j = 0; j < model.size(); ++j)
    acc += xs_weight(model.sigma[j], s) * std::abs(f[j]) * model.w()[j];
  return acc;
}

double xs_norm(const Model& model, const Vec& f, double s) {
  double acc = 0.0;
  for (int j = 0; j < model.size(); ++j)
    acc += xs_weight(model.sigma[j], s) * std::abs(f[j]) * model.w()[j];
  return acc;
}

namespace {

// sup_k theta_s(k) for s = 0..s_max on one level, given a column-evaluator.
struct LevelData {
  Vec w;
  Vec sigma;
  std::function<double(int, int)> k;  // k(v_j, v_k)
};

std::vector<double> level_sups(const LevelData& d, int s_count) {
  const int n = static_cast<int>(d.w.size());
  std::vector<double> sups(s_count, 0.0);
  sups[0] = 1.0;
  Vec acc(n);
  for (int s = 1; s < s_count; ++s) {
    Vec weight(n);
    for (int j = 0; j < n; ++j) weight[j] = std::pow(d.sigma[j], -s) * d.w[j];
    double sup = 0.0;
    for (int k = 0; k < n; ++k) {
      double a = 0.0;
      for (int j = 0; j < n; ++j) a += d.k(j, k) * weight[j];
      sup = std::max(sup, a / d.sigma[k]);
    }
    sups[s] = sup;
  }
  return sups;
}

LevelData builtin_level(const CollisionKernel& kernel, int n_v) {
  const VelocityGrid g = VelocityGrid::midpoint(n_v, kernel.vmax);
  auto st = std::make_shared<Vec>(n_v);
  auto ps = std::make_shared<Vec>(n_v);
  for (int j = 0; j < n_v; ++j) {
    (*st)[j] = kernel.sigma_tilde(g.nodes[j]);
    (*ps)[j] = kernel.psi_value(g.nodes[j]);
  }
  const double c = kernel.normalization();
  const double beta = kernel.kind == KernelKind::Perturbed ? kernel.beta : 0.0;
  LevelData d;
  d.w = g.weights;
  d.k = [st, ps, c, beta](int j, int k) {
    return c * (*st)[j] * (*st)[k] * (1.0 + beta * (*ps)[j] * (*ps)[k]);
  };
  d.sigma = Vec::Zero(n_v);
  for (int k = 0; k < n_v; ++k)
    for (int j = 0; j < n_v; ++j) d.sigma[k] += d.k(j, k) * d.w[j];
  return d;
}

// Block average of the table by an integer factor (cells merged in groups).
LevelData coarsened_level(const Model& model, int factor) {
  const int n = model.size();
  if (n % factor != 0) fail(ErrorCode::InvalidArgument, "table size not divisible by coarsening factor");
  const int m = n / factor;
  auto kc = std::make_shared<Mat>(Mat::Zero(m, m));
  Vec w = Vec::Zero(m);
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < factor; ++i) w[a] += model.w()[a * factor + i];
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      double acc = 0.0;
      for (int i = 0; i < factor; ++i)
        for (int l = 0; l < factor; ++l) {
          const int j = a * factor + i, k = b * factor + l;
          acc += model.kmat(j, k) * model.w()[j] * model.w()[k];
        }
      (*kc)(a, b) = acc / (w[a] * w[b]);
    }
  LevelData d;
  d.w = w;
  d.k = [kc](int j, int k) { return (*kc)(j, k); };
  d.sigma = kc->transpose() * w;
  return d;
}

}  // namespace

N0Estimate estimate_N0(const Model& model, const N0Options& options) {
  if (options.factors.size() < 3)
    fail(ErrorCode::InvalidArgument, "at least three refinement levels are required");
  const int s_count = options.s_max + 1;
  N0Estimate est;
  auto& diag = est.diagnostics;
  diag.analytic = model.kernel.analytic_n0();

  std::vector<int> factors = options.factors;
  std::sort(factors.begin(), factors.end());
  for (int f : factors) {
    LevelData d;
    N0Level lvl;
    if (model.kernel.is_builtin()) {
      lvl.n_v = options.base_n_v * f;
      d = builtin_level(model.kernel, lvl.n_v);
    } else {
      const int coarsest = factors.back();
      const int factor = coarsest / f;
      if (coarsest % f != 0) fail(ErrorCode::InvalidArgument, "refinement factors must divide each other");
      lvl.n_v = model.size() / factor;
      d = coarsened_level(model, factor);
    }
    lvl.sups = level_sups(d, s_count);
    diag.levels.push_back(std::move(lvl));
  }

  const auto& L = diag.levels;
  int refined = -1;
  bool inconclusive = false;
  diag.increment_ratios.assign(s_count, {});
  diag.convergent.assign(s_count, false);
  for (int s = 0; s < s_count; ++s) {
    std::vector<double> inc;
    for (size_t i = 1; i < L.size(); ++i) inc.push_back(L[i].sups[s] - L[i - 1].sups[s]);
    int above = 0, below = 0;
    for (size_t i = 1; i < inc.size(); ++i) {
      const double scale = std::abs(L.back().sups[s]);
      double r;
      if (std::abs(inc[i - 1]) <= 1e-12 * scale) r = std::abs(inc[i]) <= 1e-12 * scale ? 0.0 : 1e300;
      else r = std::abs(inc[i]) / std::abs(inc[i - 1]);
      diag.increment_ratios[s].push_back(r);
      (r > options.ratio_threshold ? above : below)++;
    }
    if (above > 0 && below > 0) {
      inconclusive = true;
      break;
    }
    if (above > 0) break;
    diag.convergent[s] = true;
    refined = s;
  }
  diag.refined = inconclusive ? -1 : refined;
  if (diag.analytic) {
    est.n0 = *diag.analytic;
  } else {
    if (inconclusive) fail(ErrorCode::InconclusiveRefinement, "increment ratios straddle the threshold");
    est.n0 = refined;
  }
  return est;
}

std::pair<Mat, Mat> split_kernel(const Model& model, double delta) {
  Mat kd = model.kmat;
  for (int j = 0; j < model.size(); ++j)
    if (!(model.sigma[j] > delta)) kd.row(j).setZero();
  Mat kbar = model.kmat - kd;
  return {kd, kbar};
}

double mu_delta(const Model& model, double delta) {
  double best = 0.0;
  for (int k = 0; k < model.size(); ++k) {
    double acc = 0.0;
    for (int j = 0; j < model.size(); ++j)
      if (model.sigma[j] <= delta) acc += model.kmat(j, k) * model.w()[j];
    best = std::max(best, acc / model.sigma[k]);
  }
  return best;
}

Model with_n0(Model model, const N0Options& options) {
  if (auto a = model.kernel.analytic_n0()) model.n0 = *a;
  else model.n0 = estimate_N0(model, options).n0;
  return model;
}

}  // namespace kinetic
