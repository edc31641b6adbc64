#include "kinetic/operators.hpp"

#include "kinetic/errors.hpp"
#include "kinetic/parallel.hpp"

#include <cmath>
#include <functional>

namespace kinetic {

CMat ModeOperator::kernel(const Model& model) const {
  return mat * model.w().cwiseInverse().cast<cplx>().asDiagonal();
}

ModeOperator operator*(const ModeOperator& a, const ModeOperator& b) { return {a.p, a.mat * b.mat}; }
ModeOperator operator+(const ModeOperator& a, const ModeOperator& b) { return {a.p, a.mat + b.mat}; }
ModeOperator operator-(const ModeOperator& a, const ModeOperator& b) { return {a.p, a.mat - b.mat}; }

double op_norm(const Model& model, const CMat& mat, double a, double b) {
  const Vec wa = xs_weights(model, a);
  const Vec wb = xs_weights(model, b).cwiseProduct(model.w());
  double best = 0.0;
  for (Eigen::Index k = 0; k < mat.cols(); ++k) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < mat.rows(); ++j) acc += wb[j] * std::abs(mat(j, k));
    best = std::max(best, acc / (wa[k] * model.w()[k]));
  }
  return best;
}

double op_norm(const Model& model, const ModeOperator& op, double a, double b) {
  return op_norm(model, op.mat, a, b);
}

double op_norm(const Model& model, const Mat& entries, double a, double b, bool kernel_convention) {
  if (!kernel_convention) return op_norm(model, CMat(entries.cast<cplx>()), a, b);
  return op_norm(model, CMat((entries * model.w().asDiagonal()).cast<cplx>()), a, b);
}

CVec denominators(const Model& model, cplx lambda, int p, const DenominatorOptions& opt) {
  CVec d = transport_symbol(model, p);
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    d[k] += lambda;
    if (std::abs(d[k]) <= opt.tolerance)
      fail(ErrorCode::NearSingularDenominator,
           "mode " + std::to_string(p) + ", cell " + std::to_string(k));
  }
  return d;
}

ModeOperator K_op(const Model& model) { return {0, model.nodal_kernel().cast<cplx>()}; }

ModeOperator kernel_op(const Model& model, const Mat& entries) {
  return {0, (entries * model.w().asDiagonal()).cast<cplx>()};
}

namespace {

double factorial(int q) {
  double f = 1.0;
  for (int i = 2; i <= q; ++i) f *= i;
  return f;
}

// (-1)^q q! / d^{q+1}: the q-th lambda-derivative of 1 / d.
CVec inverse_power(const CVec& d, int q) {
  const double c = (q % 2 == 0 ? 1.0 : -1.0) * factorial(q);
  CVec out(d.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) out[k] = c / std::pow(d[k], q + 1);
  return out;
}

}  // namespace

ModeOperator R_op(const Model& model, cplx lambda, int p, int order, const DenominatorOptions& opt) {
  const CVec d = denominators(model, lambda, p, opt);
  return {p, CMat(inverse_power(d, order).asDiagonal())};
}

ModeOperator M_op(const Model& model, cplx lambda, int p, const DenominatorOptions& opt) {
  return M_derivative(model, lambda, p, 0, opt);
}

ModeOperator M_derivative(const Model& model, cplx lambda, int p, int q, const DenominatorOptions& opt) {
  if (q < 0) fail(ErrorCode::InvalidArgument, "derivative order must be >= 0");
  const CVec d = denominators(model, lambda, p, opt);
  const CVec r = inverse_power(d, q);
  return {p, model.nodal_kernel().cast<cplx>() * r.asDiagonal()};
}

ModeOperator power_Ln(const Model& model, cplx lambda, int p, int n) {
  if (n < 0) fail(ErrorCode::InvalidArgument, "power must be >= 0");
  const ModeOperator m = M_op(model, lambda, p);
  CMat acc = CMat::Identity(model.size(), model.size());
  for (int i = 0; i < n; ++i) acc = acc * m.mat;
  return {p, acc};
}

std::vector<CMat> power_derivatives(const std::vector<CMat>& f, int n) {
  // D[m][j]: j-th derivative of F^m, built from (F^{m-1} F)^{(j)} = sum_i C(j,i) D[m-1][j-i] F^{(i)}.
  const int q = static_cast<int>(f.size()) - 1;
  const auto size = f.front().rows();
  std::vector<CMat> cur(static_cast<size_t>(q + 1), CMat::Zero(size, size));
  cur[0] = CMat::Identity(size, size);
  for (int m = 1; m <= n; ++m) {
    std::vector<CMat> next(static_cast<size_t>(q + 1), CMat::Zero(size, size));
    for (int j = 0; j <= q; ++j) {
      double binom = 1.0;
      for (int i = 0; i <= j; ++i) {
        if (i > 0) binom = binom * (j - i + 1) / i;
        if (m == 1 && j - i > 0) continue;
        next[j] += binom * (cur[j - i] * f[i]);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

ModeOperator derivative_of_power(const Model& model, cplx lambda, int p, int n, int q) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "power must be >= 1");
  std::vector<CMat> f;
  for (int i = 0; i <= q; ++i) f.push_back(M_derivative(model, lambda, p, i).mat);
  return {p, power_derivatives(f, n)[q]};
}

ModeOperator G_op(const Model& model, cplx lambda, int p, int n) {
  return G_derivative(model, lambda, p, n, 0);
}

ModeOperator G_derivative(const Model& model, cplx lambda, int p, int n, int k) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "G_n requires n >= 1");
  const CMat kn = model.nodal_kernel().cast<cplx>();
  const CVec d = denominators(model, lambda, p);
  std::vector<CMat> f;
  for (int i = 0; i <= k; ++i) f.push_back(inverse_power(d, i).asDiagonal() * kn);
  return {p, power_derivatives(f, n)[k]};
}

double multinomial_constant(const std::vector<double>& theta_sups, int n, int q, bool time_moments) {
  // Enumerate r in N^n with |r| = q; the last index carries no theta factor.
  std::vector<int> r(static_cast<size_t>(n), 0);
  double total = 0.0;
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == n - 1) {
      r[static_cast<size_t>(pos)] = left;
      double coef = factorial(q);
      double prod = 1.0;
      for (int j = 0; j < n; ++j) {
        if (!time_moments) coef /= factorial(r[static_cast<size_t>(j)]);
        if (j < n - 1) {
          const int rj = r[static_cast<size_t>(j)];
          if (rj >= static_cast<int>(theta_sups.size()))
            fail(ErrorCode::InvalidArgument, "theta table too short for multinomial constant");
          prod *= theta_sups[static_cast<size_t>(rj)];
        }
      }
      total += coef * prod;
      return;
    }
    for (int a = 0; a <= left; ++a) {
      r[static_cast<size_t>(pos)] = a;
      rec(pos + 1, left - a);
    }
  };
  rec(0, q);
  return total;
}

ScanResult norm_decay_scan(const Model& model, int p, const std::vector<double>& etas,
                           const std::vector<int>& powers, int threads) {
  ScanResult res;
  res.powers = powers;
  res.rows.resize(etas.size());
  parallel_for(static_cast<int>(etas.size()), threads, [&](int i) {
    const cplx lambda(0.0, etas[static_cast<size_t>(i)]);
    const ModeOperator m = M_op(model, lambda, p);
    const ModeOperator g1 = G_op(model, lambda, p, 1);
    ScanRow row;
    row.eta = etas[static_cast<size_t>(i)];
    const CMat m2 = m.mat * m.mat;
    row.norm_M2 = op_norm(model, m2, 0.0, 0.0);
    row.norm_RK2 = op_norm(model, CMat(g1.mat * g1.mat), 0.0, 0.0);
    for (int q : powers) {
      CMat acc = CMat::Identity(model.size(), model.size());
      for (int j = 0; j < q; ++j) acc = acc * m.mat;
      row.norm_Mq.push_back(op_norm(model, acc, 0.0, 0.0));
    }
    row.envelope_product = row.norm_M2 * std::sqrt(std::abs(row.eta));
    res.rows[static_cast<size_t>(i)] = std::move(row);
  });
  for (const auto& r : res.rows) res.envelope_constant = std::max(res.envelope_constant, r.envelope_product);
  return res;
}

ApproxCheck approx_power_bound_check(const Model& model, double delta, int n,
                                     const std::vector<cplx>& lambdas, int p) {
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "delta must be positive");
  ApproxCheck out;
  out.mu = mu_delta(model, delta);
  const ModeOperator kd = kernel_op(model, split_kernel(model, delta).first);
  for (const cplx& lambda : lambdas) {
    const ModeOperator r = R_op(model, lambda, p);
    const ModeOperator m = K_op(model) * r;
    const ModeOperator md = kd * r;
    CMat a = CMat::Identity(model.size(), model.size()), b = a;
    for (int i = 0; i < n; ++i) {
      a = a * m.mat;
      b = b * md.mat;
    }
    ApproxCheckRow row;
    row.lambda = lambda;
    row.difference = op_norm(model, CMat(a - b), 0.0, 0.0);
    row.bound = n * out.mu;
    row.pass = row.difference <= row.bound + 1e-9;
    out.pass = out.pass && row.pass;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace kinetic
