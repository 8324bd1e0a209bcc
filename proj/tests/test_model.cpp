#include <rgpe/model.hpp>
#include <rgpe/spectral.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace rgpe;

namespace {

const TrapParams test_trap{{0.8, 1.2}, 0.0};

} // namespace

TEST(Rotation, IdentityQuarterTurnAndOrthogonality) {
  const auto id = rotation_matrix(RotationSchedule::linear(0.5), 0.0, 2);
  EXPECT_EQ(id(0, 0), 1.0);
  EXPECT_EQ(id(0, 1), 0.0);
  const auto q = rotation_matrix(RotationSchedule::linear(1.0), std::numbers::pi / 2, 2);
  EXPECT_NEAR(q(0, 0), 0.0, 1e-16);
  EXPECT_NEAR(q(0, 1), 1.0, 1e-16);
  EXPECT_NEAR(q(1, 0), -1.0, 1e-16);

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int s = 0; s < 1000; ++s) {
    const auto r = rotation_matrix(RotationSchedule::linear(0.5), u(rng), 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k)
          d += r(k, i) * r(k, j);
        ASSERT_NEAR(d, i == j ? 1.0 : 0.0, 1e-14);
      }
  }
  EXPECT_THROW(rotation_matrix(RotationSchedule::linear(0.5), 0.0, 4), ValidationError);
}

TEST(Rotation, DerivativeMatchesGenerator) {
  const auto s = RotationSchedule::linear(0.7);
  const double t = 1.3, d = 1e-6;
  const auto rp = rotation_matrix(s, t + d, 2), rm = rotation_matrix(s, t - d, 2);
  const auto r = rotation_matrix(s, t, 2);
  // J = [[0, 1], [-1, 0]]
  const double jr[2][2] = {{r(1, 0), r(1, 1)}, {-r(0, 0), -r(0, 1)}};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      EXPECT_NEAR((rp(i, j) - rm(i, j)) / (2 * d), 0.7 * jr[i][j], 1e-8);
}

TEST(Potential, MatchesMatrixProduct) {
  auto g = make_grid(2, {5.0, 5.0}, {16, 16});
  const auto s = RotationSchedule::linear(0.5);
  for (double t : {0.0, 0.4, 2.9}) {
    const auto w = potential_rotating(g, s, test_trap, t);
    const auto r = rotation_matrix(s, t, 2);
    g->for_each_point([&](std::size_t i, std::span<const double> xi) {
      const auto x = r.apply(xi);
      ASSERT_NEAR(w.values[i], lab_potential(test_trap, std::span<const double>(x.data(), 2)),
                  1e-13);
    });
  }
}

TEST(Potential, IsotropicTrapIsTimeIndependent) {
  auto g = make_grid(3, {4.0, 4.0, 4.0}, {8, 8, 8});
  const TrapParams iso{{1.1, 1.1, 0.7}, 0.0};
  const auto s = RotationSchedule::linear(0.5);
  const auto a = potential_rotating(g, s, iso, 0.0), b = potential_rotating(g, s, iso, 2.3);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    ASSERT_NEAR(a.values[i], b.values[i], 1e-13);
}

TEST(Potential, DimensionMismatchRejected) {
  auto g = make_grid(3, {4.0, 4.0, 4.0}, {8, 8, 8});
  EXPECT_THROW(potential_rotating(g, RotationSchedule::linear(0.5), test_trap, 0.0),
               ValidationError);
}

TEST(Gradient, AnalyticFormulasAgainstFiniteDifferences) {
  const TrapParams trap3{{0.8, 1.2, 1.0}, 0.0};
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> x(-5.0, 5.0), t(0.0, 20.0);
  const auto s = RotationSchedule::linear(0.5);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    std::array<double, 3> xi{x(rng), x(rng), x(rng)};
    const double angle = s.angle(t(rng));
    const auto g = rotating_potential_gradient_at(trap3, angle, xi);
    for (int l = 0; l < 3; ++l) {
      auto p = xi, m = xi;
      p[l] += 1e-5;
      m[l] -= 1e-5;
      const double fd =
          (rotating_potential_at(trap3, angle, p) - rotating_potential_at(trap3, angle, m)) / 2e-5;
      worst = std::max(worst, std::abs(fd - g[l]) / std::max(std::abs(g[l]), 1e-3));
    }
  }
  EXPECT_LT(worst, 1e-6);
  const double xi3[3] = {0.3, -0.2, 2.0};
  EXPECT_DOUBLE_EQ(rotating_potential_gradient_at(trap3, 0.9, xi3)[2], 2.0);
}

TEST(Gradient, IsotropicCollapse) {
  const TrapParams iso{{1.3, 1.3}, 0.0};
  const double xi[2] = {0.7, -1.1};
  const auto g = rotating_potential_gradient_at(iso, 0.83, xi);
  EXPECT_NEAR(g[0], 1.69 * 0.7, 1e-14);
  EXPECT_NEAR(g[1], 1.69 * -1.1, 1e-14);
}

TEST(ModifiedPotential, NonnegativeVanishingAndQuadraticInH) {
  auto g = make_grid(2, {6.0, 6.0}, {16, 16});
  const auto s = RotationSchedule::linear(0.5);
  const auto w = modified_potential(g, s, test_trap, 0.3, 0.2);
  for (double v : w.values)
    ASSERT_GE(v, 0.0);
  const auto iso = modified_potential(g, s, TrapParams{{0.9, 0.9}, 0.0}, 0.3, 0.2);
  for (double v : iso.values)
    ASSERT_EQ(v, 0.0);

  auto peak = [&](double h) {
    const auto m = modified_potential(g, s, test_trap, 0.3, h);
    return *std::max_element(m.values.begin(), m.values.end());
  };
  const double slope = std::log(peak(0.01) / peak(0.005)) / std::log(2.0);
  EXPECT_NEAR(slope, 2.0, 0.01);
}

TEST(ModifiedPotential, DirectFormula) {
  auto g = make_grid(2, {3.0, 3.0}, {8, 8});
  const auto s = RotationSchedule::linear(0.5);
  const double t0 = 0.4, h = 0.3;
  const auto w = modified_potential(g, s, test_trap, t0, h);
  const auto g1 = grad_potential_rotating(g, s, test_trap, t0 + gauss3::c1 * h);
  const auto g3 = grad_potential_rotating(g, s, test_trap, t0 + gauss3::c3 * h);
  for (std::size_t i = 0; i < w.values.size(); ++i) {
    double sum = 0.0;
    for (int l = 0; l < 2; ++l) {
      const double d = g3[l].values[i] - g1[l].values[i];
      sum += d * d;
    }
    ASSERT_NEAR(w.values[i], sum / 25920.0, 1e-18);
  }
}

TEST(Nonlinearity, CubicAndCustom) {
  const std::vector<double> rho = {0.0, 0.25, 2.0};
  const auto zero = nonlinearity(rho, Nonlinearity(0.0));
  for (double v : zero)
    EXPECT_EQ(v, 0.0);
  EXPECT_EQ(nonlinearity(rho, Nonlinearity(1.0))[1], 0.25);
  EXPECT_TRUE(Nonlinearity(0.0).vanishes());
  const Nonlinearity custom([](double r) { return r * r; });
  EXPECT_FALSE(custom.vanishes());
  EXPECT_EQ(custom(2.0), 4.0);

  auto g = make_grid(2, {10.0, 10.0}, {32, 32});
  const Field v = initial_vortex(g);
  std::vector<double> dens;
  for (const auto& z : v.values())
    dens.push_back(std::norm(z));
  const auto f = nonlinearity(dens, Nonlinearity(100.0));
  for (std::size_t i = 0; i < dens.size(); ++i)
    ASSERT_EQ(f[i], 100.0 * dens[i]);
}

TEST(InitialStates, GaussianAndVortex) {
  auto g = make_grid(2, {10.0, 10.0}, {64, 64});
  const std::vector<double> w = {1.1, 0.9};
  const Field gauss = initial_gaussian(g, w, 0.5);
  const std::size_t origin = 32 * 64 + 32;
  EXPECT_EQ(gauss[origin], complex(1.0, 0.0));
  EXPECT_EQ(gauss.time(), 0.5);
  EXPECT_EQ(gauss.frame(), Frame::rotating);

  const Field vortex = initial_vortex(g);
  EXPECT_EQ(vortex[origin], complex(0.0, 0.0));
  EXPECT_NEAR(l2_norm(vortex), 1.0, 1e-10);

  auto g3 = make_grid(3, {4.0, 4.0, 4.0}, {8, 8, 8});
  EXPECT_THROW(initial_vortex(g3), ValidationError);
  EXPECT_THROW(initial_gaussian(g3, w), ValidationError);
}
