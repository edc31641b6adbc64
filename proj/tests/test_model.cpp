#include "kinetic/errors.hpp"
#include "kinetic/model.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>

using namespace kinetic;

using testing_support::code_of;
using testing_support::separable;

TEST_CASE("midpoint grid is symmetric, positive and avoids zero") {
  for (int n : {2, 10, 400}) {
    const VelocityGrid g = VelocityGrid::midpoint(n);
    CHECK_NOTHROW(g.validate());
    CHECK(g.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
    for (int j = 0; j < n; ++j) {
      CHECK(g.weights[j] > 0.0);
      CHECK(g.nodes[j] != 0.0);
      CHECK(g.nodes[j] == -g.nodes[n - 1 - j]);
      if (j > 0) CHECK(g.nodes[j] > g.nodes[j - 1]);
    }
  }
  CHECK(code_of([] { VelocityGrid::midpoint(7); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("separable sigma approximates |v|^1/2 and conservativity is exact") {
  const Model m = separable(0.5, 400);
  const Vec sums = oracle::column_sums(m);
  double dev = 0.0;
  for (int k = 0; k < m.size(); ++k) {
    CHECK(m.sigma[k] > 0.0);
    dev = std::max(dev, std::abs(sums[k] - m.sigma[k]));
    CHECK(std::abs(m.sigma[k] - std::sqrt(std::abs(m.v()[k]))) <= 0.01 * std::sqrt(std::abs(m.v()[k])));
  }
  CHECK(dev <= 1e-12);
  CHECK(m.sigma_sup == doctest::Approx(m.sigma.maxCoeff()));
  CHECK(m.kernel.normalization() == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("kernel construction errors") {
  const VelocityGrid g = VelocityGrid::midpoint(8);
  CHECK(code_of([&] { build_model(CollisionKernel::tabulated(Mat::Zero(8, 8)), g); }) == ErrorCode::DegenerateColumn);
  Mat neg = Mat::Ones(8, 8);
  neg(2, 3) = -0.1;
  CHECK(code_of([&] { build_model(CollisionKernel::tabulated(neg), g); }) == ErrorCode::NegativeKernel);
  CHECK(code_of([] { CollisionKernel::perturbed(0.5, 1.5, PsiKind::Sign); }) == ErrorCode::NegativeKernel);
}

TEST_CASE("perturbed kernels stay nonnegative and keep sigma = |v|^alpha in the continuum") {
  for (PsiKind psi : {PsiKind::Sign, PsiKind::Linear}) {
    const Model m = build_model(CollisionKernel::perturbed(0.5, 0.6, psi), VelocityGrid::midpoint(400));
    CHECK(m.kmat.minCoeff() >= 0.0);
    const Model s = separable(0.5, 400);
    CHECK((m.sigma - s.sigma).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("tabulated kernel loads from CSV") {
  const std::string path = "test_model_table.csv";
  {
    std::ofstream out(path);
    out << "1,2\n3,4\n";
  }
  const Mat t = CollisionKernel::load_table_csv(path);
  CHECK(t(0, 1) == 2.0);
  CHECK(t(1, 0) == 3.0);
  const Model m = build_model(CollisionKernel::tabulated(t), VelocityGrid::midpoint(2));
  CHECK(m.sigma[0] == doctest::Approx(4.0));
  CHECK(m.sigma[1] == doctest::Approx(6.0));
  std::remove(path.c_str());
}

TEST_CASE("theta moments") {
  const Model m = separable(0.5, 400);
  const ThetaResult t0 = theta(m, 0.0);
  CHECK((t0.values.array() - 1.0).abs().maxCoeff() <= 1e-12);
  CHECK(t0.sup == doctest::Approx(1.0));
  double prev = 0.0;
  for (double s : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    const double sup = theta(m, s).sup;
    CHECK(sup >= prev);
    prev = sup;
  }
  const Model fine = separable(0.5, 2000);
  CHECK(theta(fine, 1.0).sup == doctest::Approx(oracle::separable_theta_sup(0.5, 1.0)).epsilon(0.02));
  CHECK(theta(fine, 2.0).sup == doctest::Approx(oracle::separable_theta_sup(0.5, 2.0)).epsilon(0.02));
}

TEST_CASE("N0 analytic and by refinement") {
  CHECK(estimate_N0(separable(0.5, 200)).n0 == 2);
  CHECK(estimate_N0(separable(0.25, 200)).n0 == 4);
  CHECK(estimate_N0(separable(1.0, 200)).n0 == 1);
  const N0Estimate a = estimate_N0(separable(0.5, 200));
  CHECK(a.diagnostics.refined == 2);
  CHECK(a.diagnostics.analytic.value() == 2);
  CHECK(a.diagnostics.levels.size() == 5);
  // A tabulated copy has no analytic rule; refinement runs on coarsenings of the table.
  // alpha = 0.6 keeps every moment away from the logarithmic borderline alpha (1 - s) = -1.
  const Model fine = separable(0.6, 1600);
  const Model tab = build_model(CollisionKernel::tabulated(fine.kmat), fine.grid);
  CHECK(!tab.kernel.analytic_n0());
  N0Options opt;
  opt.factors = {1, 2, 4, 8};
  const N0Estimate t = estimate_N0(tab, opt);
  CHECK(t.n0 == 2);
  CHECK(t.diagnostics.levels.size() == 4);
}

TEST_CASE("split kernel partitions K") {
  const Model m = separable(0.5, 400);
  auto [kd, kb] = split_kernel(m, 0.0);
  CHECK((kd - m.kmat).cwiseAbs().maxCoeff() == 0.0);
  CHECK(kb.cwiseAbs().maxCoeff() == 0.0);
  auto [kd2, kb2] = split_kernel(m, 2.0 * m.sigma_sup);
  CHECK(kd2.cwiseAbs().maxCoeff() == 0.0);
  CHECK((kb2 - m.kmat).cwiseAbs().maxCoeff() == 0.0);
  auto [kd3, kb3] = split_kernel(m, 0.3);
  CHECK(((kd3 + kb3) - m.kmat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mu_delta closed form, monotone and saturating") {
  const Model m = separable(0.5, 800);
  CHECK(mu_delta(m, 0.5) == doctest::Approx(oracle::separable_mu_delta(0.5, 0.5)).epsilon(0.01));
  CHECK(mu_delta(m, 2.0 * m.sigma_sup) == doctest::Approx(1.0).epsilon(1e-12));
  double prev = 0.0;
  for (double d : {0.02, 0.05, 0.1, 0.2, 0.4, 0.8}) {
    const double mu = mu_delta(m, d);
    CHECK(mu >= prev);
    prev = mu;
  }
  CHECK(mu_delta(m, 0.5 * m.sigma.minCoeff()) == 0.0);
}

TEST_CASE("xs_norm examples") {
  const Model m = separable(0.5, 2000);
  const Vec one = Vec::Ones(m.size());
  CHECK(xs_norm(m, one, 0.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(xs_norm(m, one, -1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-3));
  CHECK(xs_norm(m, Vec(m.sigma), 1.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(xs_weight(0.25, 2.0) == doctest::Approx(16.0));
  CHECK(xs_weight(4.0, 2.0) == 1.0);
}
