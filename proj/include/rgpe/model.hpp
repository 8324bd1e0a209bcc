#pragma once

#include <rgpe/grid.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rgpe {

// Sixth-order Gauss-Legendre nodes on [0, 1].
namespace gauss3 {
inline const double c1 = 0.5 - std::sqrt(15.0) / 10.0;
inline constexpr double c2 = 0.5;
inline const double c3 = 0.5 + std::sqrt(15.0) / 10.0;
} // namespace gauss3

/**
 * Rotation angle omega(t) about the third axis and its derivative.
 *
 * Only the linear schedule omega(t) = Omega t is built in. Anything else can
 * be supplied as a function pair; the steppers only ever evaluate the
 * potential at quadrature nodes, so general schedules need no special casing.
 */
struct RotationSchedule {
  std::function<double(double)> omega;
  std::function<double(double)> omega_prime;
  std::optional<double> constant_rate;

  static RotationSchedule linear(double rate) {
    return {[rate](double t) { return rate * t; }, [rate](double) { return rate; }, rate};
  }

  double angle(double t) const { return omega(t); }
  double angular_velocity(double t) const { return omega_prime(t); }
};

struct TrapParams {
  std::vector<double> gamma; // trap frequency per axis
  double theta = 0.0;        // cubic coupling constant

  void validate(int dim) const {
    if (static_cast<int>(gamma.size()) != dim)
      throw ValidationError("trap needs " + std::to_string(dim) + " gamma values, got " +
                            std::to_string(gamma.size()));
    for (double g : gamma)
      if (!(g > 0.0) || !std::isfinite(g))
        throw ValidationError("trap frequencies must be positive and finite");
    if (!std::isfinite(theta))
      throw ValidationError("theta must be finite");
  }
};

// Real density-dependent multiplier f(|u|^2); cubic theta * rho unless replaced.
class Nonlinearity {
public:
  Nonlinearity(double theta = 0.0) : theta_(theta) {}
  explicit Nonlinearity(std::function<double(double)> of_density)
      : of_density_(std::move(of_density)) {}

  double operator()(double density) const {
    return of_density_ ? of_density_(density) : theta_ * density;
  }
  bool vanishes() const { return !of_density_ && theta_ == 0.0; }
  bool is_cubic() const { return !of_density_; }
  double theta() const { return theta_; }

private:
  double theta_ = 0.0;
  std::function<double(double)> of_density_;
};

// Everything an integrator needs to know about the equation.
struct Model {
  RotationSchedule schedule = RotationSchedule::linear(0.0);
  TrapParams trap;
  std::optional<Nonlinearity> custom_nonlinearity;

  Nonlinearity nonlinearity() const {
    return custom_nonlinearity ? *custom_nonlinearity : Nonlinearity(trap.theta);
  }
};

struct RotationMatrix {
  int dim = 2;
  std::array<double, 9> m{}; // row-major 3x3 storage; upper-left dim x dim is used

  double operator()(int i, int j) const { return m[static_cast<std::size_t>(3 * i + j)]; }

  std::array<double, 3> apply(std::span<const double> xi) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        x[i] += (*this)(i, j) * xi[j];
    return x;
  }
};

// R(t) with x = R(t) xi; rows (cos w, sin w), (-sin w, cos w), plus e_3 in 3-D.
inline RotationMatrix rotation_matrix(const RotationSchedule& schedule, double t, int dim) {
  if (dim != 2 && dim != 3)
    throw ValidationError("rotation_matrix: dim must be 2 or 3");
  const double w = schedule.angle(t);
  const double c = std::cos(w), s = std::sin(w);
  RotationMatrix r;
  r.dim = dim;
  r.m = {c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0};
  return r;
}

// V(x) = 1/2 sum gamma_l^2 x_l^2
inline double lab_potential(const TrapParams& trap, std::span<const double> x) {
  double v = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l)
    v += 0.5 * trap.gamma[l] * trap.gamma[l] * x[l] * x[l];
  return v;
}

// W(xi, t) = V(R(t) xi) and its xi-gradient at a fixed rotation angle.
class RotatedTrap {
public:
  RotatedTrap(const TrapParams& trap, double angle)
      : c_(std::cos(angle)), s_(std::sin(angle)), g1_(trap.gamma[0] * trap.gamma[0]),
        g2_(trap.gamma[1] * trap.gamma[1]),
        g3_(trap.gamma.size() > 2 ? trap.gamma[2] * trap.gamma[2] : 0.0) {
    // Rotation-invariant in the (xi1, xi2) plane.
    if (g1_ == g2_) {
      c_ = 1.0;
      s_ = 0.0;
    }
  }

  double value(std::span<const double> xi) const {
    const double u = c_ * xi[0] + s_ * xi[1];
    const double v = -s_ * xi[0] + c_ * xi[1];
    double w = 0.5 * g1_ * u * u + 0.5 * g2_ * v * v;
    if (xi.size() == 3)
      w += 0.5 * g3_ * xi[2] * xi[2];
    return w;
  }

  std::array<double, 3> gradient(std::span<const double> xi) const {
    const double cross = (g1_ - g2_) * s_ * c_;
    std::array<double, 3> g{};
    g[0] = g1_ * c_ * c_ * xi[0] + g2_ * s_ * s_ * xi[0] + cross * xi[1];
    g[1] = g2_ * c_ * c_ * xi[1] + g1_ * s_ * s_ * xi[1] + cross * xi[0];
    if (xi.size() == 3)
      g[2] = g3_ * xi[2];
    return g;
  }

private:
  double c_, s_, g1_, g2_, g3_;
};

inline double rotating_potential_at(const TrapParams& trap, double angle,
                                    std::span<const double> xi) {
  return RotatedTrap(trap, angle).value(xi);
}

inline std::array<double, 3> rotating_potential_gradient_at(const TrapParams& trap, double angle,
                                                            std::span<const double> xi) {
  return RotatedTrap(trap, angle).gradient(xi);
}

// Real-valued multiplication potential sampled on a grid.
struct PotentialField {
  GridPtr grid;
  std::vector<double> values;
  double time = 0.0;

  PotentialField() = default;
  PotentialField(GridPtr g, double t = 0.0)
      : grid(std::move(g)), values(grid->total_points(), 0.0), time(t) {}
};

inline PotentialField potential_rotating(const GridPtr& grid, const RotationSchedule& schedule,
                                         const TrapParams& trap, double t) {
  trap.validate(grid->dim());
  PotentialField w(grid, t);
  const RotatedTrap rotated(trap, schedule.angle(t));
  grid->for_each_point(
      [&](std::size_t i, std::span<const double> xi) { w.values[i] = rotated.value(xi); });
  return w;
}

// One PotentialField per axis: d/dxi_l W(., t).
inline std::vector<PotentialField> grad_potential_rotating(const GridPtr& grid,
                                                           const RotationSchedule& schedule,
                                                           const TrapParams& trap, double t) {
  trap.validate(grid->dim());
  const int dim = grid->dim();
  std::vector<PotentialField> grad;
  for (int l = 0; l < dim; ++l)
    grad.emplace_back(grid, t);
  const RotatedTrap rotated(trap, schedule.angle(t));
  grid->for_each_point([&](std::size_t i, std::span<const double> xi) {
    const auto g = rotated.gradient(xi);
    for (int l = 0; l < dim; ++l)
      grad[static_cast<std::size_t>(l)].values[i] = g[static_cast<std::size_t>(l)];
  });
  return grad;
}

inline constexpr double modified_potential_prefactor = 1.0 / 25920.0;

/// Gradient-squared correction of the sixth-order modified scheme,
/// (1/25920) sum_l (d_l W(., t0 + c3 h) - d_l W(., t0 + c1 h))^2. Nonnegative.
inline PotentialField modified_potential(const GridPtr& grid, const RotationSchedule& schedule,
                                         const TrapParams& trap, double t0, double h) {
  trap.validate(grid->dim());
  const int dim = grid->dim();
  PotentialField out(grid, t0);
  const RotatedTrap first(trap, schedule.angle(t0 + gauss3::c1 * h));
  const RotatedTrap last(trap, schedule.angle(t0 + gauss3::c3 * h));
  grid->for_each_point([&](std::size_t i, std::span<const double> xi) {
    const auto g1 = first.gradient(xi);
    const auto g3 = last.gradient(xi);
    double sum = 0.0;
    for (int l = 0; l < dim; ++l) {
      const double d = g3[static_cast<std::size_t>(l)] - g1[static_cast<std::size_t>(l)];
      sum += d * d;
    }
    out.values[i] = modified_potential_prefactor * sum;
  });
  return out;
}

inline std::vector<double> nonlinearity(std::span<const double> density, const Nonlinearity& f) {
  std::vector<double> out(density.size());
  for (std::size_t i = 0; i < density.size(); ++i)
    out[i] = f(density[i]);
  return out;
}

// prod_l exp(-omega_l^2 x_l^2 / 2)
inline Field initial_gaussian(const GridPtr& grid, std::span<const double> weights,
                              double t0 = 0.0) {
  if (static_cast<int>(weights.size()) != grid->dim())
    throw ValidationError("initial_gaussian: need one weight per axis");
  Field f(grid, Frame::rotating, t0);
  grid->for_each_point([&](std::size_t i, std::span<const double> x) {
    double e = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l)
      e += weights[l] * weights[l] * x[l] * x[l];
    f[i] = std::exp(-0.5 * e);
  });
  return f;
}

// (x1 + i x2) exp(-(x1^2 + x2^2) / 2) / sqrt(pi): unit-norm singly quantized vortex.
inline Field initial_vortex(const GridPtr& grid, double t0 = 0.0) {
  if (grid->dim() != 2)
    throw ValidationError("initial_vortex: the vortex state is two-dimensional");
  Field f(grid, Frame::rotating, t0);
  const double norm = 1.0 / std::sqrt(std::numbers::pi);
  grid->for_each_point([&](std::size_t i, std::span<const double> x) {
    f[i] = norm * complex(x[0], x[1]) * std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1]));
  });
  return f;
}

} // namespace rgpe
