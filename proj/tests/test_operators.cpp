#include "kinetic/operators.hpp"
#include "kinetic/spectral.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace kinetic;
using testing_support::config_a;

namespace {

double vec_norm(const Model& m, const CVec& f, double s) { return xs_norm(m, f, s); }

}  // namespace

TEST_CASE("M_op and op_norm agree with the dense oracle") {
  const Model m = config_a(120);
  for (cplx lambda : {cplx(0.0, 0.0), cplx(0.4, -2.0), cplx(0.0, 7.0)}) {
    for (int p : {0, 1, -2}) {
      const CMat ref = oracle::M_dense(m, lambda, p);
      const ModeOperator op = M_op(m, lambda, p);
      CHECK((op.mat - ref).cwiseAbs().maxCoeff() <= 1e-14);
      for (double a : {0.0, 1.0, -1.0})
        for (double b : {0.0, 2.0}) CHECK(op_norm(m, op, a, b) == doctest::Approx(oracle::norm_ab(m, ref, a, b)).epsilon(1e-13));
    }
  }
}

TEST_CASE("K norms") {
  const Model m = config_a(400);
  const ModeOperator K = K_op(m);
  CHECK(std::abs(op_norm(m, K, 0.0, 0.0) - m.sigma_sup) <= 1e-12);
  CHECK(std::abs(op_norm(m, K, -1.0, 0.0) - 1.0) <= 1e-12);
  const int n0 = *m.n0;
  CHECK(op_norm(m, K, -1.0, n0) <= theta(m, n0).sup * (1.0 + 1e-12));
  CHECK(op_norm(m, m.kmat, -1.0, 0.0, true) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("M_0 is column-stochastic and M_lambda contracts with Re lambda") {
  const Model m = config_a(400);
  const ModeOperator M0 = M_op(m, 0.0, 0);
  const CMat A = M0.kernel(m);
  for (int k = 0; k < m.size(); ++k) {
    cplx col = 0.0;
    for (int j = 0; j < m.size(); ++j) col += A(j, k) * m.w()[j];
    CHECK(std::abs(col - 1.0) <= 1e-14);
  }
  CHECK(op_norm(m, M0) == doctest::Approx(1.0).epsilon(1e-14));
  const CVec f = oracle::random_vector(m.size(), 2);
  cplx before = 0.0, after = 0.0;
  const CVec g = M0.apply(f);
  for (int j = 0; j < m.size(); ++j) before += f[j] * m.w()[j], after += g[j] * m.w()[j];
  CHECK(std::abs(before - after) <= 1e-14 * std::abs(before));

  CHECK(op_norm(m, M_op(m, 1.0, 0)) <= m.sigma_sup / (1.0 + m.sigma_sup) * (1.0 + 1e-13));
  CHECK(op_norm(m, M_op(m, 1.0, 0)) <= 0.5);
  for (double eps : {0.0, 0.5, 2.0})
    for (double eta : {-4.0, 0.0, 1.0, 9.0})
      for (int p : {0, 1})
        CHECK(op_norm(m, M_op(m, cplx(eps, eta), p)) <= m.sigma_sup / (eps + m.sigma_sup) * (1.0 + 1e-13));
}

TEST_CASE("regularizing property of M_lambda") {
  const Model m = config_a(400);
  for (cplx lambda : {cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 5.0)})
    for (int k : {1, 2}) CHECK(op_norm(m, M_op(m, lambda, 0), 0.0, k) <= theta(m, k).sup * (1.0 + 1e-12));
}

TEST_CASE("first and higher derivatives of M_lambda") {
  const Model m = config_a(400);
  for (unsigned seed : {1u, 2u}) {
    const CVec f = oracle::random_vector(m.size(), seed);
    CHECK(vec_norm(m, M_derivative(m, 0.0, 0, 1).apply(f), 0.0) <= vec_norm(m, f, 1.0) * (1.0 + 1e-12));
  }
  const double h = 1e-4;
  for (int p : {0, 1}) {
    const CMat fd = (M_op(m, 0.3 + h, p).mat - M_op(m, 0.3, p).mat) / h;
    CHECK(op_norm(m, CMat(fd - M_derivative(m, 0.3, p, 1).mat), 0.0, 0.0) <= 10.0 * h);
  }
  // Column mass of |d^q M / d lambda^q| at 0 is q! / sigma_k^q.
  for (int q : {1, 2, 3}) {
    const CMat A = M_derivative(m, 0.0, 0, q).kernel(m);
    const double fact = std::tgamma(q + 1.0);
    for (int k : {0, 37, 199, 399}) {
      double col = 0.0;
      for (int j = 0; j < m.size(); ++j) col += std::abs(A(j, k)) * m.w()[j];
      CHECK(col == doctest::Approx(fact / std::pow(m.sigma[k], q)).epsilon(1e-10));
    }
    const double sign = q % 2 ? -1.0 : 1.0;
    CHECK(std::abs(A(5, 9) - sign * fact * m.kmat(5, 9) / std::pow(m.sigma[9], q + 1)) <= 1e-10 * std::abs(A(5, 9)));
  }
}

TEST_CASE("powers of M and their derivatives") {
  const Model m = config_a(300);
  const double t1 = theta(m, 1.0).sup;
  for (int n = 1; n <= 20; ++n) CHECK(op_norm(m, power_Ln(m, cplx(0.0, 3.0), 0, n), 0.0, 1.0) <= t1 * (1.0 + 1e-12));
  for (int n : {1, 3}) {
    const ModeOperator a = power_Ln(m, cplx(0.2, 1.0), 1, n);
    const ModeOperator b = derivative_of_power(m, cplx(0.2, 1.0), 1, n, 0);
    CHECK((a.mat - b.mat).cwiseAbs().maxCoeff() <= 1e-15);
  }
  // Leibniz derivative against a centred difference of the power.
  const cplx lambda(0.5, 2.0);
  const double h = 1e-4;
  const CMat fd = (power_Ln(m, lambda + h, 2, 3).mat - power_Ln(m, lambda - h, 2, 3).mat) / (2.0 * h);
  CHECK(op_norm(m, CMat(fd - derivative_of_power(m, lambda, 2, 3, 1).mat), 0.0, 0.0) <= 1e-6);

  std::vector<double> sups;
  for (int s = 0; s <= 2; ++s) sups.push_back(theta(m, s).sup);
  const double C32 = multinomial_constant(sups, 3, 2, true);
  CHECK(op_norm(m, derivative_of_power(m, 0.0, 0, 3, 2), 2.0, 0.0) <= C32 * (1.0 + 1e-12));
  for (int n : {1, 2, 4})
    CHECK(op_norm(m, derivative_of_power(m, 0.0, 0, n, 1), 1.0, 0.0) <=
          multinomial_constant(sups, n, 1) * (1.0 + 1e-12));
}

// The constant without the r_j! time-moment factors is exceeded once some r_j >= 2.
TEST_CASE("derivative bound without time-moment factors fails at second order" * doctest::should_fail()) {
  const Model m = config_a(300);
  std::vector<double> sups;
  for (int s = 0; s <= 2; ++s) sups.push_back(theta(m, s).sup);
  CHECK(op_norm(m, derivative_of_power(m, 0.0, 0, 3, 2), 2.0, 0.0) <= multinomial_constant(sups, 3, 2));
}

TEST_CASE("multinomial constant by hand") {
  const std::vector<double> t{1.0, 2.0, 5.0};
  // r in {(2,0), (1,1), (0,2)}; the last index carries no theta factor: 5 + 2 * 2 + 1.
  CHECK(multinomial_constant(t, 2, 2) == doctest::Approx(10.0));
  // With time moments every coefficient becomes q!: 2 * (5 + 2 + 1).
  CHECK(multinomial_constant(t, 2, 2, true) == doctest::Approx(16.0));
  CHECK(multinomial_constant(t, 3, 0) == doctest::Approx(1.0));
  // q = 1: three theta_1 positions and the free last one.
  CHECK(multinomial_constant(t, 4, 1) == doctest::Approx(7.0));
  CHECK(multinomial_constant(t, 4, 1, true) == doctest::Approx(7.0));
}

TEST_CASE("G_n bounds and composition") {
  const Model m = config_a(300);
  const double bound = m.sigma_sup * theta(m, 1.0).sup;
  CHECK(bound <= 1.5 + 1e-12);
  for (double eta : {0.5, 2.0, 20.0}) {
    for (int n : {1, 2, 5, 20, 50}) CHECK(op_norm(m, G_op(m, cplx(0.0, eta), 0, n)) <= bound * (1.0 + 1e-12));
    for (auto [n, k] : {std::pair{2, 3}, std::pair{5, 5}}) {
      const double gn = op_norm(m, G_op(m, cplx(0.0, eta), 0, n));
      CHECK(op_norm(m, G_op(m, cplx(0.0, eta), 0, n + k)) <= bound * gn * (1.0 + 1e-12));
    }
  }
  const cplx lambda(0.3, 1.7);
  const ModeOperator composed = R_op(m, lambda, 1) * K_op(m);
  CHECK((G_op(m, lambda, 1, 1).mat - composed.mat).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("derivative growth of G_N stays bounded by a single constant") {
  const Model m = config_a(200);
  for (double eta : {1.0, 5.0}) {
    for (int k : {1, 2}) {
      std::vector<double> ratios;
      for (int N = 8; N <= 32; N += 4) {
        const double num = op_norm(m, G_derivative(m, cplx(0.0, eta), 0, N, k));
        const int lower = std::max(1, (N - k) >> k);
        const double den = std::pow(N, k) * op_norm(m, G_op(m, cplx(0.0, eta), 0, lower));
        ratios.push_back(num / den);
      }
      const double first = ratios.front();
      for (double r : ratios) {
        CHECK(std::isfinite(r));
        CHECK(r <= 4.0 * first);
      }
    }
  }
}

TEST_CASE("norm decay scan") {
  const Model m = config_a(200);
  const ScanResult s0 = norm_decay_scan(m, 0, {0.0}, {2});
  CHECK(s0.rows.front().norm_M2 == doctest::Approx(1.0).epsilon(1e-13));

  const std::vector<double> etas{1.0, 2.0, 4.0, 8.0, 12.0};
  const ScanResult s = norm_decay_scan(m, 2, etas, {2, 5});
  REQUIRE(s.rows.size() == etas.size());
  double env = 0.0;
  for (const auto& r : s.rows) {
    CHECK(r.norm_Mq.size() == 2);
    CHECK(r.envelope_product == doctest::Approx(r.norm_M2 * std::sqrt(r.eta)));
    CHECK(r.norm_Mq[0] == doctest::Approx(r.norm_M2));
    env = std::max(env, r.envelope_product);
  }
  CHECK(s.envelope_constant == doctest::Approx(env));
  // Thread count never changes the numbers.
  const ScanResult s2 = norm_decay_scan(m, 2, etas, {2, 5}, 3);
  for (size_t i = 0; i < etas.size(); ++i) CHECK(s2.rows[i].norm_RK2 == s.rows[i].norm_RK2);

  // Beyond the resonance band every entry decays like 1 / eta.
  const double band = 4.0 * kPi + m.sigma_sup;
  for (double eta : {1e3, 2e3}) {
    const double n = op_norm(m, M_op(m, cplx(0.0, eta), 2));
    CHECK(eta > band);
    CHECK(n <= m.sigma_sup / (eta - 4.0 * kPi));
  }
  const double r = op_norm(m, M_op(m, cplx(0.0, 2e3), 2)) / op_norm(m, M_op(m, cplx(0.0, 1e3), 2));
  CHECK(r == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("approximation of powers by the truncated kernel") {
  const Model m = config_a(300);
  const ApproxCheck c = approx_power_bound_check(m, 0.3, 3, {cplx(0.0, 0.0), cplx(0.0, 1.0), cplx(1.0, 1.0)});
  CHECK(c.pass);
  CHECK(c.mu == doctest::Approx(mu_delta(m, 0.3)));
  for (const auto& r : c.rows) CHECK(r.difference <= r.bound * (1.0 + 1e-12));
  const ApproxCheck one = approx_power_bound_check(m, 0.3, 1, {cplx(0.0, 0.0), cplx(0.5, 2.0)});
  for (const auto& r : one.rows) CHECK(r.difference <= one.mu * (1.0 + 1e-12));
  // delta above sup sigma removes everything: the difference is the full power.
  const ApproxCheck all = approx_power_bound_check(m, 2.0 * m.sigma_sup, 2, {cplx(0.0, 0.0), cplx(0.0, 3.0)});
  CHECK(all.mu == doctest::Approx(1.0));
  CHECK(all.rows[0].difference == doctest::Approx(op_norm(m, power_Ln(m, 0.0, 0, 2))).epsilon(1e-12));
  for (const auto& r : all.rows) CHECK(r.difference <= 1.0 + 1e-12);
}

TEST_CASE("quantitative limit towards the imaginary axis") {
  const Model m = config_a(300);
  const CVec f = oracle::random_vector(m.size(), 17);
  for (int k : {0, 1}) {
    for (double eps : {0.1, 0.01}) {
      for (double eta : {0.5, 3.0}) {
        const CVec lhs = k == 0 ? CVec(M_op(m, cplx(eps, eta), 0).apply(f) - M_op(m, cplx(0.0, eta), 0).apply(f))
                                : CVec(M_derivative(m, cplx(eps, eta), 0, k).apply(f) -
                                       M_derivative(m, cplx(0.0, eta), 0, k).apply(f));
        CHECK(vec_norm(m, lhs, 0.0) <= eps * std::tgamma(k + 2.0) * vec_norm(m, f, k + 1.0) * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("spectral radius domination") {
  const Model m = config_a(400);
  CHECK(spectral_radius(M_op(m, 0.0, 0).mat) == doctest::Approx(1.0).epsilon(1e-10));
  for (double eta : {0.1, 1.0, 10.0, -0.1}) CHECK(spectral_radius(M_op(m, cplx(0.0, eta), 0).mat) <= 0.999);
  for (int p : {1, 2}) CHECK(spectral_radius(M_op(m, 0.0, p).mat) <= 1.0);
}

TEST_CASE("near-singular denominators are reported") {
  const Model m = config_a(40);
  CHECK(testing_support::code_of([&] { M_op(m, cplx(-m.sigma[0], 0.0), 0); }) == ErrorCode::NearSingularDenominator);
}
