#pragma once

#include <rgpe/cfqm.hpp>
#include <rgpe/model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace rgpe::oracle {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr std::size_t max_dense_points = 4096;

inline Matrix commutator(const Matrix& x, const Matrix& y) { return x * y - y * x; }

/// Linear problem i u' = (A + B(t)) u with Hermitian A and B(t).
struct DenseProblem {
  Matrix A;
  std::function<Matrix(double)> B;

  Eigen::Index size() const { return A.rows(); }
  Matrix H(double t) const { return A + B(t); }
};

/**
 * -Delta/2 on the grid in matrix form, assembled from explicit Fourier modes
 * e^{i k.x}/sqrt(N) rather than through the FFT:  A = V diag(|k|^2/2) V^H.
 */
inline Matrix dense_laplacian(const Grid& grid) {
  const std::size_t n = grid.total_points();
  if (n > max_dense_points)
    throw ValidationError("dense oracle limited to " + std::to_string(max_dense_points) +
                          " grid points, got " + std::to_string(n));
  const auto N = static_cast<Eigen::Index>(n);
  std::vector<std::array<double, 3>> x(n), k(n);
  grid.for_each_point([&](std::size_t i, std::span<const double> xi) {
    std::copy(xi.begin(), xi.end(), x[i].begin());
  });
  grid.for_each_index([&](std::size_t i, std::span<const int> idx) {
    for (int a = 0; a < grid.dim(); ++a)
      k[i][static_cast<std::size_t>(a)] =
          grid.wavenumbers(a)[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
  });
  Matrix V(N, N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index p = 0; p < N; ++p)
    for (Eigen::Index q = 0; q < N; ++q) {
      double phase = 0.0;
      for (int a = 0; a < grid.dim(); ++a)
        phase += k[static_cast<std::size_t>(q)][static_cast<std::size_t>(a)] *
                 x[static_cast<std::size_t>(p)][static_cast<std::size_t>(a)];
      V(p, q) = std::polar(scale, phase);
    }
  Eigen::VectorXd d(N);
  const auto k2 = grid.half_k_squared();
  for (Eigen::Index q = 0; q < N; ++q)
    d(q) = k2[static_cast<std::size_t>(q)];
  Matrix A = V * d.asDiagonal() * V.adjoint();
  return 0.5 * (A + A.adjoint()).eval();
}

inline Matrix diagonal(std::span<const double> values) {
  const auto n = static_cast<Eigen::Index>(values.size());
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    m(i, i) = values[static_cast<std::size_t>(i)];
  return m;
}

/// H(t) = -Delta/2 + W(., t) on a small grid.
inline DenseProblem grid_problem(const GridPtr& grid, const RotationSchedule& schedule,
                                 const TrapParams& trap) {
  DenseProblem p;
  p.A = dense_laplacian(*grid);
  p.B = [grid, schedule, trap](double t) {
    return diagonal(potential_rotating(grid, schedule, trap, t).values);
  };
  return p;
}

inline Matrix build_dense(const GridPtr& grid, const RotationSchedule& schedule,
                          const TrapParams& trap, double t) {
  return grid_problem(grid, schedule, trap).H(t);
}

inline Vector to_vector(const Field& f) {
  return Eigen::Map<const Vector>(f.values().data(), static_cast<Eigen::Index>(f.size()));
}

inline Field to_field(const Vector& v, GridPtr grid, double time) {
  std::vector<complex> values(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    values[static_cast<std::size_t>(i)] = v(i);
  return Field(std::move(grid), std::move(values), Frame::rotating, time);
}

// Euclidean norm scaled by the cell volume, matching l2_norm on fields.
inline double grid_norm(const Vector& v, const Grid& grid) {
  return std::sqrt(grid.cell_volume()) * v.norm();
}

/// exp(X) for anti-Hermitian X via the Hermitian eigendecomposition of iX.
inline Matrix expm_anti_hermitian(const Matrix& X) {
  const Matrix K = std::complex<double>(0.0, 0.5) * (X - X.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(K);
  if (eig.info() != Eigen::Success)
    throw RuntimeError("eigendecomposition failed");
  Eigen::VectorXcd phase(K.rows());
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    phase(i) = std::polar(1.0, -eig.eigenvalues()(i));
  return eig.eigenvectors() * phase.asDiagonal() * eig.eigenvectors().adjoint();
}

// exp(-i tau H) for Hermitian H
inline Matrix propagator(const Matrix& H, double tau) {
  return expm_anti_hermitian(std::complex<double>(0.0, -tau) * H);
}

struct AlphaTriple {
  Matrix a1, a2, a3;
};

/// Taylor-type combinations of H sampled at the three Gauss nodes.
inline AlphaTriple alphas(const DenseProblem& p, double t0, double h) {
  const Matrix B1 = p.B(t0 + gauss3::c1 * h);
  const Matrix B2 = p.B(t0 + gauss3::c2 * h);
  const Matrix B3 = p.B(t0 + gauss3::c3 * h);
  const std::complex<double> mih(0.0, -h);
  return {mih * (p.A + B2), mih * (std::sqrt(15.0) / 3.0) * (B3 - B1),
          mih * (10.0 / 3.0) * (B3 - 2.0 * B2 + B1)};
}

inline Matrix magnus_omega6_modified(const AlphaTriple& a) {
  if (a.a1.rows() != a.a2.rows() || a.a1.rows() != a.a3.rows())
    throw ValidationError("magnus_omega6: dimension mismatch");
  const Matrix c12 = commutator(a.a1, a.a2);
  return a.a1 + a.a3 / 12.0 - c12 / 12.0 +
         commutator(a.a1, commutator(a.a1, a.a3)) / 360.0 -
         commutator(a.a2, c12) / 240.0 + commutator(a.a1, commutator(a.a1, c12)) / 720.0;
}

inline Matrix magnus_omega6(const AlphaTriple& a) {
  return magnus_omega6_modified(a) + commutator(a.a2, a.a3) / 240.0;
}

inline Matrix magnus6_propagator(const DenseProblem& p, double t0, double h) {
  return expm_anti_hermitian(magnus_omega6(alphas(p, t0, h)));
}

/// Product of exponential-midpoint micro-steps over [t0, t0 + h].
inline Vector midpoint_propagate(const DenseProblem& p, const Vector& u0, double t0, double h,
                                 int micro_steps = 10000) {
  const double d = h / micro_steps;
  Vector u = u0;
  for (int m = 0; m < micro_steps; ++m)
    u = propagator(p.H(t0 + (m + 0.5) * d), d) * u;
  return u;
}

/// e^{Omega6} applied over `micro_steps` equal substeps of [t0, t0 + h].
inline Vector dense_reference(const DenseProblem& p, const Vector& u0, double t0, double h,
                              int micro_steps = 256) {
  const double d = h / micro_steps;
  Vector u = u0;
  for (int m = 0; m < micro_steps; ++m)
    u = magnus6_propagator(p, t0 + m * d, d) * u;
  return u;
}

inline Vector dense_reference(const Field& u0, const Model& model, double t0, double h,
                              int micro_steps = 256) {
  if (!model.nonlinearity().vanishes())
    throw ValidationError("dense_reference is restricted to the linear case (theta = 0)");
  const auto p = grid_problem(u0.grid_ptr(), model.schedule, model.trap);
  return dense_reference(p, to_vector(u0), t0, h, micro_steps);
}

/// One CFQM step with exact stage exponentials.
inline Vector dense_cfqm_step(const DenseProblem& p, const CfqmScheme& s, const Vector& u0,
                              double t0, double h) {
  std::vector<Matrix> Bk;
  for (double c : s.nodes)
    Bk.push_back(p.B(t0 + c * h));
  Vector u = u0;
  for (int j = 0; j < s.stages(); ++j) {
    const auto& row = s.coeffs[static_cast<std::size_t>(j)];
    Matrix H = s.stage_sum(j) * p.A;
    for (std::size_t k = 0; k < Bk.size(); ++k)
      H += row[k] * Bk[k];
    u = propagator(H, h) * u;
  }
  return u;
}

/// One step of the modified sixth-order scheme with exact exponentials and the
/// correction (1/25920)[[A, D], D], D = B(t0 + c3 h) - B(t0 + c1 h), formed as
/// a matrix commutator. `correction_sign` scales it.
inline Vector dense_bbk_step(const DenseProblem& p, const Vector& u0, double t0, double h,
                             double correction_sign = 1.0) {
  const Matrix B1 = p.B(t0 + gauss3::c1 * h);
  const Matrix B2 = p.B(t0 + gauss3::c2 * h);
  const Matrix B3 = p.B(t0 + gauss3::c3 * h);
  const Matrix D = B3 - B1;
  const Matrix tilde = commutator(commutator(p.A, D), D) / 25920.0;
  const auto w = bbk::node_weights();
  auto bar = [&](int s) {
    const auto& r = w[static_cast<std::size_t>(s)];
    return (r[0] * B1 + r[1] * B2 + r[2] * B3).eval();
  };
  // [[A, D], D] is Hermitian for Hermitian A, D.
  const Matrix outer1 = bar(0) + correction_sign * h * h * tilde;
  const Matrix outer4 = bar(3) + correction_sign * h * h * tilde;
  Vector u = propagator(outer1, h) * u0;
  u = propagator(p.A + bar(1), 0.5 * h) * u;
  u = propagator(p.A + bar(2), 0.5 * h) * u;
  return propagator(outer4, h) * u;
}

/// Random Hermitian test problem of size n with non-commuting time dependence.
inline DenseProblem random_problem(int n, std::uint64_t seed) {
  std::uint64_t state = seed * 6364136223846793005ull + 1442695040888963407ull;
  auto uniform = [&state]() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  };
  auto hermitian = [&]() {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m(i, j) = {uniform(), uniform()};
    return (0.5 * (m + m.adjoint())).eval();
  };
  const Matrix A = hermitian(), X = hermitian(), Y = hermitian(), Z = hermitian();
  DenseProblem p;
  p.A = A;
  p.B = [X, Y, Z](double t) { return (std::cos(t) * X + std::sin(2.0 * t) * Y + t * t * Z).eval(); };
  return p;
}

/// Least-squares slope of log(error) against log(h), ignoring errors below
/// `floor` and non-finite entries.
inline double observed_order(std::span<const double> stepsizes, std::span<const double> errors,
                             double floor = 1e-12) {
  if (stepsizes.size() != errors.size())
    throw ValidationError("observed_order: stepsizes and errors differ in length");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] >= floor) || !std::isfinite(errors[i]) || !(stepsizes[i] > 0.0))
      continue;
    lx.push_back(std::log(stepsizes[i]));
    ly.push_back(std::log(errors[i]));
  }
  if (lx.size() < 3)
    throw ValidationError("observed_order needs at least 3 usable points, got " +
                          std::to_string(lx.size()));
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0)
    throw ValidationError("observed_order: stepsizes are all equal");
  return sxy / sxx;
}

struct TransformCheck {
  double max_deviation = 0.0;       // max |zbar(t) - e^{-omega(t) J} z(t)|
  double max_energy_mismatch = 0.0; // max |Hbar(zbar) - (H(z) + omega' q^T J p)|
};

/**
 * Compares the lab-frame classical system
 *   H(q, p, t) = |p|^2/2 + V(q) - omega'(t) q^T J p,   J = [[0, 1], [-1, 0]],
 * with the rotating-frame system Hbar = |pbar|^2/2 + V(R(t) qbar), both
 * integrated by classical fourth-order Runge-Kutta at fixed step `dt`.
 */
inline TransformCheck classical_transform_check(std::array<double, 2> q0, std::array<double, 2> p0,
                                                const RotationSchedule& schedule,
                                                const TrapParams& trap, double t0, double T,
                                                double dt = 1e-4) {
  trap.validate(2);
  using State = std::array<double, 4>;
  auto Jv = [](double a, double b) { return std::array<double, 2>{b, -a}; };
  auto lab_rhs = [&](double t, const State& z) {
    const double w = schedule.angular_velocity(t);
    const auto Jq = Jv(z[0], z[1]);
    const auto Jp = Jv(z[2], z[3]);
    const double g1 = trap.gamma[0] * trap.gamma[0], g2 = trap.gamma[1] * trap.gamma[1];
    return State{z[2] + w * Jq[0], z[3] + w * Jq[1], -g1 * z[0] + w * Jp[0],
                 -g2 * z[1] + w * Jp[1]};
  };
  auto rot_rhs = [&](double t, const State& z) {
    const double xi[2] = {z[0], z[1]};
    const auto g = rotating_potential_gradient_at(trap, schedule.angle(t), xi);
    return State{z[2], z[3], -g[0], -g[1]};
  };
  auto rk4 = [](auto&& f, double t, const State& z, double h) {
    auto axpy = [](const State& a, const State& b, double s) {
      State r;
      for (int i = 0; i < 4; ++i)
        r[i] = a[i] + s * b[i];
      return r;
    };
    const State k1 = f(t, z);
    const State k2 = f(t + 0.5 * h, axpy(z, k1, 0.5 * h));
    const State k3 = f(t + 0.5 * h, axpy(z, k2, 0.5 * h));
    const State k4 = f(t + h, axpy(z, k3, h));
    State r;
    for (int i = 0; i < 4; ++i)
      r[i] = z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return r;
  };
  // e^{-omega J} v = R(t)^T v
  auto to_rotating = [&](double t, const State& z) {
    const double w = schedule.angle(t), c = std::cos(w), s = std::sin(w);
    return State{c * z[0] - s * z[1], s * z[0] + c * z[1], c * z[2] - s * z[3],
                 s * z[2] + c * z[3]};
  };
  auto energy_lab = [&](double t, const State& z) {
    const double q[2] = {z[0], z[1]};
    const auto Jp = Jv(z[2], z[3]);
    return 0.5 * (z[2] * z[2] + z[3] * z[3]) + lab_potential(trap, q) -
           schedule.angular_velocity(t) * (z[0] * Jp[0] + z[1] * Jp[1]);
  };
  auto energy_rot = [&](double t, const State& z) {
    const double q[2] = {z[0], z[1]};
    return 0.5 * (z[2] * z[2] + z[3] * z[3]) +
           rotating_potential_at(trap, schedule.angle(t), q);
  };

  State z{q0[0], q0[1], p0[0], p0[1]};
  State zbar = to_rotating(t0, z);
  const auto steps = static_cast<long>(std::llround((T - t0) / dt));
  const double h = (T - t0) / static_cast<double>(steps);
  TransformCheck out;
  for (long n = 0; n <= steps; ++n) {
    const double t = t0 + n * h;
    const State mapped = to_rotating(t, z);
    double dev = 0.0;
    for (int i = 0; i < 4; ++i)
      dev = std::max(dev, std::abs(zbar[i] - mapped[i]));
    out.max_deviation = std::max(out.max_deviation, dev);
    const auto Jp = Jv(z[2], z[3]);
    const double coupling = schedule.angular_velocity(t) * (z[0] * Jp[0] + z[1] * Jp[1]);
    out.max_energy_mismatch = std::max(
        out.max_energy_mismatch, std::abs(energy_rot(t, zbar) - (energy_lab(t, z) + coupling)));
    if (n == steps)
      break;
    z = rk4(lab_rhs, t, z, h);
    zbar = rk4(rot_rhs, t, zbar, h);
  }
  return out;
}

/// Largest relative deviation between the analytic gradient of W(xi, t) and
/// central differences of W, over `samples` random points xi in
/// [-half_width, half_width]^dim and times t in [0, t_max].
inline double gradient_check(const TrapParams& trap, const RotationSchedule& schedule, int dim,
                             int samples = 1000, double step = 1e-5, std::uint64_t seed = 1,
                             double half_width = 5.0, double t_max = 20.0) {
  trap.validate(dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-half_width, half_width), time(0.0, t_max);
  const auto d = static_cast<std::size_t>(dim);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    std::array<double, 3> xi{coord(rng), coord(rng), dim == 3 ? coord(rng) : 0.0};
    const RotatedTrap w(trap, schedule.angle(time(rng)));
    const auto g = w.gradient({xi.data(), d});
    double err = 0.0, scale = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      auto xp = xi, xm = xi;
      xp[l] += step;
      xm[l] -= step;
      const double fd = (w.value({xp.data(), d}) - w.value({xm.data(), d})) / (2.0 * step);
      err = std::max(err, std::abs(fd - g[l]));
      scale = std::max(scale, std::abs(g[l]));
    }
    worst = std::max(worst, err / std::max(scale, 1e-300));
  }
  return worst;
}

} // namespace rgpe::oracle
