#include <rgpe/splitting.hpp>

#include <gtest/gtest.h>

#include <tuple>

#include <cmath>
#include <random>

using namespace rgpe;

namespace {

Field random_field(const GridPtr& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  Field f(g);
  g->for_each_point([&](std::size_t i, std::span<const double> x) {
    const double env = std::exp(-0.3 * (x[0] * x[0] + x[1] * x[1]));
    f[i] = env * complex(n(rng), n(rng));
  });
  return f;
}

PotentialField harmonic(const GridPtr& g) {
  return potential_rotating(g, RotationSchedule::linear(0.5), TrapParams{{0.8, 1.2}, 0.0}, 0.3);
}

} // namespace

TEST(SplittingRegistry, TablesAndConsistency) {
  const auto& strang = splitting_registry("strang");
  ASSERT_EQ(strang.pairs.size(), 2u);
  EXPECT_EQ(strang.pairs[0], std::make_pair(0.5, 1.0));
  EXPECT_EQ(strang.pairs[1], std::make_pair(0.5, 0.0));
  for (const auto& name : splitting_names()) {
    const auto& s = splitting_registry(name);
    EXPECT_NEAR(s.alpha_sum(), 1.0, 1e-15) << name;
    EXPECT_NEAR(s.beta_sum(), 1.0, 1e-15) << name;
  }
  EXPECT_EQ(splitting_registry("rkn74").kinetic_flows(), 6);
  EXPECT_EQ(splitting_registry("rkn116").kinetic_flows(), 11);
  EXPECT_EQ(splitting_registry("rkn74").order, 4);
  EXPECT_EQ(splitting_registry("rkn116").order, 6);
  EXPECT_THROW(splitting_registry("yoshida"), ValidationError);
  EXPECT_NE(splitting_checksum(splitting_registry("rkn74")),
            splitting_checksum(splitting_registry("rkn116")));
}

TEST(SplittingRegistry, TablesArePalindromic) {
  for (const char* name : {"rkn74", "rkn116"}) {
    const auto& p = splitting_registry(name).pairs;
    // kinetic-first form of a kick-first palindrome: alphas 1..s-1 and
    // betas 0..s-1 are symmetric.
    const std::size_t s = p.size();
    for (std::size_t l = 1; l < s; ++l)
      EXPECT_DOUBLE_EQ(p[l].first, p[s - l].first) << name;
    for (std::size_t l = 0; l < s; ++l)
      EXPECT_DOUBLE_EQ(p[l].second, p[s - 1 - l].second) << name;
  }
}

TEST(PotentialFlow, IdentityPhaseAndModulus) {
  auto g = make_grid(2, {4.0, 4.0}, {16, 16});
  const Field f = random_field(g, 1);
  PotentialField p(g);
  for (auto& v : p.values)
    v = 0.7;
  EXPECT_EQ(l2_error(potential_flow(f, p, 1.0, Nonlinearity(3.0), 0.0), f), 0.0);

  const Field phase = potential_flow(f, p, 1.0, Nonlinearity(0.0), 0.4);
  for (std::size_t i = 0; i < f.size(); ++i)
    ASSERT_LT(std::abs(phase[i] - std::polar(1.0, -0.28) * f[i]), 1e-15 * (1 + std::abs(f[i])));

  const auto w = harmonic(g);
  const Field nl = potential_flow(f, w, 0.6, Nonlinearity(1.0), 0.25);
  double peak = 0.0;
  for (const auto& v : f.values())
    peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < f.size(); ++i) {
    const complex expect = f[i] * std::polar(1.0, -0.25 * (w.values[i] + 0.6 * std::norm(f[i])));
    ASSERT_LT(std::abs(nl[i] - expect), 1e-15 * peak * 4);
    ASSERT_LT(std::abs(std::abs(nl[i]) - std::abs(f[i])), 1e-14 * peak);
  }
}

TEST(PotentialFlow, GridMismatch) {
  auto g = make_grid(2, {4.0, 4.0}, {16, 16});
  auto h = make_grid(2, {4.0, 4.0}, {8, 8});
  Field f(g);
  EXPECT_THROW(potential_flow(f, PotentialField(h), 1.0, Nonlinearity(), 0.1), ValidationError);
}

TEST(ApplySplitting, StrangWithoutPotentialIsKineticFlow) {
  auto g = make_grid(2, {4.0, 4.0}, {16, 16});
  const Field f = random_field(g, 2);
  const Field a = apply_splitting(f, splitting_registry("strang"), 0.3, 0.9, PotentialField(g),
                                  Nonlinearity(0.0));
  const Field b = kinetic_flow(f, 0.3, 0.9);
  EXPECT_LT(l2_error(a, b), 1e-14 * l2_norm(f));
}

TEST(ApplySplitting, TransformPairCounts) {
  auto g = make_grid(2, {4.0, 4.0}, {16, 16});
  Field f = random_field(g, 3);
  const auto w = harmonic(g);
  for (const auto& [name, expected] :
       std::vector<std::pair<std::string, int>>{{"strang", 2}, {"rkn74", 6}, {"rkn116", 11}}) {
    const auto before = transform_pair_count();
    const int used = apply_splitting_inplace(f, splitting_registry(name), 0.1, 1.0, w, Nonlinearity(1.0));
    EXPECT_EQ(used, expected) << name;
    EXPECT_EQ(transform_pair_count() - before, static_cast<std::uint64_t>(expected)) << name;
  }
}

TEST(ApplySplitting, NormPreservationAndReversibility) {
  auto g = make_grid(2, {6.0, 6.0}, {32, 32});
  const Field f = random_field(g, 4);
  const auto w = harmonic(g);
  for (const auto& name : splitting_names()) {
    const auto& s = splitting_registry(name);
    const Field fwd = apply_splitting(f, s, 0.2, 1.0, w, Nonlinearity(10.0));
    EXPECT_NEAR(l2_norm(fwd) / l2_norm(f), 1.0, 1e-12) << name;
    const Field back = apply_splitting(fwd, s, -0.2, 1.0, w, Nonlinearity(10.0));
    EXPECT_LT(l2_error(back, f) / l2_norm(f), 1e-10) << name;
  }
}

TEST(ApplySplitting, StrangLocalErrorIsThirdOrder) {
  auto g = make_grid(2, {8.0, 8.0}, {32, 32});
  Field f(g);
  g->for_each_point([&](std::size_t i, std::span<const double> x) {
    f[i] = std::exp(-0.5 * (1.21 * x[0] * x[0] + 0.81 * x[1] * x[1]));
  });
  const auto w = harmonic(g);
  const auto& s = splitting_registry("strang");
  std::vector<double> err;
  for (double h : {0.2, 0.1, 0.05}) {
    const Field one = apply_splitting(f, s, h, 1.0, w, Nonlinearity(1.0));
    const Field two = apply_splitting(apply_splitting(f, s, h / 2, 1.0, w, Nonlinearity(1.0)), s,
                                      h / 2, 1.0, w, Nonlinearity(1.0));
    err.push_back(l2_error(one, two));
  }
  EXPECT_NEAR(std::log2(err[0] / err[1]), 3.0, 0.2);
  EXPECT_NEAR(std::log2(err[1] / err[2]), 3.0, 0.2);
}

TEST(ApplySplitting, AutonomousLocalOrders) {
  // One step of i u' = (-Delta/2 + W) u against 40 rkn116 substeps.
  auto g = make_grid(2, {8.0, 8.0}, {32, 32});
  Field f(g);
  g->for_each_point([&](std::size_t i, std::span<const double> x) {
    f[i] = std::exp(-0.5 * (1.21 * x[0] * x[0] + 0.81 * x[1] * x[1]));
  });
  // A quadratic potential alone makes the splittings superconvergent.
  auto w = harmonic(g);
  g->for_each_point([&](std::size_t i, std::span<const double> x) {
    w.values[i] += 2.0 * std::cos(0.8 * x[0] + 0.3 * x[1]);
  });
  const Nonlinearity none;
  auto run = [&](const SplittingScheme& s, double T, int n) {
    Field u = f;
    for (int k = 0; k < n; ++k)
      apply_splitting_inplace(u, s, T / n, 1.0, w, none);
    return u;
  };
  const auto& fine = splitting_registry("rkn116");
  for (const auto& [name, order, hs] : std::vector<std::tuple<std::string, int, std::vector<double>>>{
           {"strang", 2, {0.4, 0.2, 0.1}}, {"rkn74", 4, {0.2, 0.1, 0.05}}, {"rkn116", 6, {0.4, 0.2, 0.1}}}) {
    const auto& s = splitting_registry(name);
    std::vector<double> err;
    for (double h : hs)
      err.push_back(l2_error(run(s, h, 1), run(fine, h, 40)));
    for (std::size_t i = 0; i + 1 < err.size(); ++i) {
      const double slope = std::log2(err[i] / err[i + 1]);
      EXPECT_GT(slope, order + 1 - 0.3) << name << " " << err[i] << " " << err[i + 1];
      EXPECT_LT(slope, order + 2.5) << name;
    }
  }
}
