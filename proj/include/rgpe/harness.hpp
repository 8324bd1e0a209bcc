#pragma once

#include <rgpe/cfqm.hpp>
#include <rgpe/config.hpp>
#include <rgpe/fft.hpp>
#include <rgpe/field_io.hpp>
#include <rgpe/oracle.hpp>
#include <rgpe/spectral.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

namespace rgpe {

struct ConvergenceRow {
  std::string method;
  double h = 0.0;
  int n_steps = 0;
  double l2_error = 0.0; // +inf for a divergent run
  std::uint64_t transform_pairs = 0;
  double wall_ms = 0.0;
  bool diverged = false;
};

// Everything needed to start a trajectory.
struct Problem {
  GridPtr grid;
  Model model;
  Field initial;
  double t0 = 0.0;
  double T = 0.0;

  static Problem from_config(const RunConfig& c) {
    c.validate();
    auto grid = c.grid();
    return {grid, c.model(), initial_field(c, grid), c.t0, c.T};
  }
};

struct ReferenceSettings {
  std::string method = "bbk+rkn116";
  int refine = 10;          // reference stepsize = finest stepsize / refine
  double tolerance = 1e-11; // allowed discrepancy between h_ref and h_ref / 2
  bool project_norm = true; // rescale to the initial norm after every step
};

struct Reference {
  Field field;
  int n_steps = 0;
  double self_check = 0.0; // L2 distance between the h_ref and h_ref / 2 solutions
};

/// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  if (workers <= 0)
    workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error)
              error = std::current_exception();
          }
        }
      });
  }
  if (error)
    std::rethrow_exception(error);
}

/// evolve() followed by a rescale to the initial L2 norm after every step.
/// Every sub-flow is unitary, so this only removes the slow norm drift that
/// transform rounding accumulates over many thousands of steps.
inline Field evolve_norm_projected(const Problem& p, const Method& method, int n_steps) {
  if (n_steps < 1)
    throw ValidationError("evolve_norm_projected: need at least one step");
  const double target = l2_norm(p.initial);
  const double h = (p.T - p.t0) / n_steps;
  Field u = p.initial;
  for (int n = 0; n < n_steps; ++n) {
    u = method.step(std::move(u), p.t0 + n * h, h, p.model).field;
    const double scale = target / l2_norm(u);
    for (auto& v : u.values())
      v *= scale;
  }
  u.set_time(p.T);
  return u;
}

/// Reference solution at n_ref steps, verified against 2 n_ref steps.
inline Reference compute_reference(const Problem& p, int n_ref, const ReferenceSettings& s,
                                   int workers = 1) {
  const auto method = Method::parse(s.method);
  std::vector<Field> sols(2, p.initial);
  parallel_for(2, workers, [&](std::size_t i) {
    const int n = n_ref * static_cast<int>(i + 1);
    sols[i] = s.project_norm ? evolve_norm_projected(p, method, n)
                             : evolve(p.initial, p.t0, p.T, n, method, p.model).field;
  });
  const double diff = l2_error(sols[0], sols[1]);
  if (!(diff < s.tolerance))
    throw RuntimeError("reference self-check failed: " + s.method + " solutions with " +
                       std::to_string(n_ref) + " and " + std::to_string(2 * n_ref) +
                       " steps differ by " + detail::format_double(diff) + " (tolerance " +
                       detail::format_double(s.tolerance) + ")");
  return {std::move(sols[1]), n_ref, diff};
}

inline ConvergenceRow run_against(const Problem& p, const Method& method, int n_steps,
                                  const Field& reference) {
  ConvergenceRow row;
  row.method = method.name();
  row.n_steps = n_steps;
  row.h = (p.T - p.t0) / n_steps;
  const auto start = std::chrono::steady_clock::now();
  try {
    auto result = evolve(p.initial, p.t0, p.T, n_steps, method, p.model);
    row.l2_error = l2_error(result.field, reference);
    row.transform_pairs = result.report.transform_pairs_used;
  } catch (const DivergenceError&) {
    row.diverged = true;
    row.l2_error = std::numeric_limits<double>::infinity();
  }
  row.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

namespace detail {

inline std::vector<int> sorted_step_counts(std::vector<int> steps) {
  std::sort(steps.begin(), steps.end());
  if (std::adjacent_find(steps.begin(), steps.end()) != steps.end())
    throw ValidationError("step counts must be distinct");
  for (int n : steps)
    if (n < 1)
      throw ValidationError("step counts must be at least 1");
  return steps;
}

} // namespace detail

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  Reference reference;
};

/**
 * Global errors at T for every (method, n_steps) pair against one reference
 * computed with `ref.method` at refine * max(n_steps) steps. Rows are ordered
 * by method (as given) and then by decreasing h.
 */
inline ConvergenceStudy convergence_study(const Problem& p, const std::vector<std::string>& methods,
                                          std::vector<int> step_counts,
                                          const ReferenceSettings& ref = {}, int workers = 1) {
  step_counts = detail::sorted_step_counts(std::move(step_counts));
  if (ref.refine < 4)
    throw ValidationError("reference stepsize must be below a quarter of the smallest stepsize");
  std::vector<Method> parsed;
  for (const auto& m : methods)
    parsed.push_back(Method::parse(m));
  auto reference = compute_reference(p, ref.refine * step_counts.back(), ref, workers);

  std::vector<ConvergenceRow> rows(parsed.size() * step_counts.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const auto& method = parsed[i / step_counts.size()];
    const int n = step_counts[i % step_counts.size()];
    rows[i] = run_against(p, method, n, reference.field);
  });
  return {std::move(rows), std::move(reference)};
}

struct SelfConvergence {
  std::vector<ConvergenceRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();
};

/// Errors of `method` at each step count against the same method at 10x the
/// step count; needs at least four distinct step counts.
inline SelfConvergence self_convergence(const Problem& p, const std::string& method_name,
                                        std::vector<int> step_counts, int workers = 1) {
  step_counts = detail::sorted_step_counts(std::move(step_counts));
  if (step_counts.size() < 4)
    throw ValidationError("self-convergence needs at least four distinct stepsizes");
  const auto method = Method::parse(method_name);
  std::vector<ConvergenceRow> rows(step_counts.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const int n = step_counts[i];
    const auto fine = evolve(p.initial, p.t0, p.T, 10 * n, method, p.model).field;
    rows[i] = run_against(p, method, n, fine);
  });
  SelfConvergence out;
  out.rows = std::move(rows);
  std::vector<double> hs, es;
  for (const auto& r : out.rows) {
    hs.push_back(r.h);
    es.push_back(r.l2_error);
  }
  try {
    out.slope = oracle::observed_order(hs, es);
  } catch (const ValidationError&) {
  }
  return out;
}

inline void write_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "method,h,n_steps,l2_error,transform_pairs,wall_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%s,%llu,%.3f\n", r.method.c_str(), r.h,
                  r.n_steps, r.diverged ? "inf" : detail::format_double(r.l2_error).c_str(),
                  static_cast<unsigned long long>(r.transform_pairs), r.wall_ms);
    os << buf;
  }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows) {
  std::ofstream os(path);
  if (!os)
    throw RuntimeError("cannot open " + path.string() + " for writing");
  write_csv(os, rows);
}

/// Field values at the cell centres x + dx/2 by Fourier interpolation.
inline Field shift_half_cell(const Field& f) {
  auto s = forward_transform(f);
  const Grid& g = f.grid();
  g.for_each_index([&](std::size_t i, std::span<const int> idx) {
    double phase = 0.0;
    for (int a = 0; a < g.dim(); ++a)
      phase += g.wavenumbers(a)[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])] *
               0.5 * g.spacing(a);
    s.coeffs[i] *= std::polar(1.0, phase);
  });
  return inverse_transform(s, f.frame(), f.time());
}

/// Sample points carrying a nonzero phase winding (density zeros) whose
/// plaquette lies inside [-window, window]^2. Plaquettes where every corner
/// has density below `floor` times the maximum are ignored.
struct Vortex {
  double x = 0.0, y = 0.0;
  int charge = 0;
};

inline std::vector<Vortex> find_vortices(const Field& f, double window, double floor = 1e-8) {
  if (f.grid().dim() != 2)
    throw ValidationError("vortex detection is two-dimensional");
  const Field c = shift_half_cell(f);
  const Grid& g = f.grid();
  const int n0 = g.size(0), n1 = g.size(1);
  double peak = 0.0;
  for (const auto& v : c.values())
    peak = std::max(peak, std::norm(v));
  auto at = [&](int i, int j) { return c[static_cast<std::size_t>(i) * n1 + j]; };
  auto wrap = [](double d) {
    while (d > std::numbers::pi)
      d -= 2.0 * std::numbers::pi;
    while (d <= -std::numbers::pi)
      d += 2.0 * std::numbers::pi;
    return d;
  };
  std::vector<Vortex> out;
  for (int i = 0; i + 1 < n0; ++i)
    for (int j = 0; j + 1 < n1; ++j) {
      const double x = g.coordinate(0, i) + g.spacing(0);
      const double y = g.coordinate(1, j) + g.spacing(1);
      if (std::abs(x) > window || std::abs(y) > window)
        continue;
      const complex corner[4] = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      double dens = 0.0;
      for (const auto& v : corner)
        dens = std::max(dens, std::norm(v));
      if (dens < floor * peak)
        continue;
      double total = 0.0;
      for (int k = 0; k < 4; ++k)
        total += wrap(std::arg(corner[(k + 1) % 4]) - std::arg(corner[k]));
      const int charge = static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
      if (charge != 0)
        out.push_back({x, y, charge});
    }
  return out;
}

/// Trigonometric interpolant of a field evaluated at arbitrary points.
class FourierInterpolant {
public:
  explicit FourierInterpolant(const Field& f) : grid_(f.grid_ptr()), spec_(forward_transform(f)) {}

  complex operator()(std::span<const double> x) const {
    const Grid& g = *grid_;
    std::array<std::vector<complex>, 3> e;
    for (int a = 0; a < g.dim(); ++a) {
      const auto k = g.wavenumbers(a);
      e[static_cast<std::size_t>(a)].resize(k.size());
      const double offset = x[static_cast<std::size_t>(a)] + g.half_width(a);
      for (std::size_t m = 0; m < k.size(); ++m)
        e[static_cast<std::size_t>(a)][m] = std::polar(1.0, k[m] * offset);
    }
    complex sum = 0.0;
    g.for_each_index([&](std::size_t i, std::span<const int> idx) {
      complex term = spec_.coeffs[i];
      for (int a = 0; a < g.dim(); ++a)
        term *= e[static_cast<std::size_t>(a)][static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])];
      sum += term;
    });
    return sum;
  }

private:
  GridPtr grid_;
  Spectrum spec_;
};

/// Density sampled at lab coordinates x on the field's own grid, using
/// xi = R(t)^T x and Fourier interpolation of the rotating-frame solution.
inline std::vector<double> lab_frame_density(const Field& f, const RotationSchedule& schedule) {
  const Grid& g = f.grid();
  const FourierInterpolant interp(f);
  const auto R = rotation_matrix(schedule, f.time(), g.dim());
  std::vector<double> out(g.total_points());
  g.for_each_point([&](std::size_t i, std::span<const double> x) {
    std::array<double, 3> xi{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a)
      for (int b = 0; b < g.dim(); ++b)
        xi[static_cast<std::size_t>(a)] += R(b, a) * x[static_cast<std::size_t>(b)];
    out[i] = std::norm(interp(std::span<const double>(xi.data(), x.size())));
  });
  return out;
}

/// Plain-text matrix of a 2-D quantity restricted to [-window, window]^2:
/// first line "# x0 x1 ...", then one row per first-axis coordinate.
inline void write_density_matrix(const std::filesystem::path& path, const Grid& g,
                                 std::span<const double> values, double window) {
  if (g.dim() != 2)
    throw ValidationError("density matrices are written for two-dimensional grids");
  std::ofstream os(path);
  if (!os)
    throw RuntimeError("cannot open " + path.string() + " for writing");
  std::vector<int> cols;
  for (int j = 0; j < g.size(1); ++j)
    if (std::abs(g.coordinate(1, j)) <= window)
      cols.push_back(j);
  char buf[64];
  os << "#";
  for (int j : cols) {
    std::snprintf(buf, sizeof buf, " %.10g", g.coordinate(1, j));
    os << buf;
  }
  os << "\n";
  for (int i = 0; i < g.size(0); ++i) {
    if (std::abs(g.coordinate(0, i)) > window)
      continue;
    std::snprintf(buf, sizeof buf, "%.10g", g.coordinate(0, i));
    os << buf;
    for (int j : cols) {
      std::snprintf(buf, sizeof buf, " %.17g", values[static_cast<std::size_t>(i) * g.size(1) + j]);
      os << buf;
    }
    os << "\n";
  }
}

struct SnapshotRequest {
  std::vector<double> times;
  std::filesystem::path directory;
  SnapshotQuantity quantity = SnapshotQuantity::density;
  bool lab_frame = false;
  double window = 5.0;
};

inline std::string snapshot_stem(double t, bool partial) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_t%010.4f", partial ? "partial" : "snapshot", t);
  return buf;
}

/// Binary dump plus, for 2-D grids, a text matrix of the requested quantity.
inline std::vector<std::filesystem::path> write_snapshot(const Field& f, bool partial,
                                                         const SnapshotRequest& req,
                                                         const RotationSchedule& schedule) {
  std::filesystem::create_directories(req.directory);
  const std::string stem = snapshot_stem(f.time(), partial);
  std::vector<std::filesystem::path> written;
  written.push_back(req.directory / (stem + ".rgpe"));
  write_field_dump(written.back(), f);
  if (f.grid().dim() != 2)
    return written;
  const Grid& g = f.grid();
  if (req.quantity == SnapshotQuantity::density) {
    std::vector<double> dens;
    if (req.lab_frame) {
      dens = lab_frame_density(f, schedule);
    } else {
      for (const auto& v : f.values())
        dens.push_back(std::norm(v));
    }
    written.push_back(req.directory / (stem + (req.lab_frame ? "_density_lab.txt" : "_density.txt")));
    write_density_matrix(written.back(), g, dens, req.window);
  } else {
    std::vector<double> re, im;
    for (const auto& v : f.values()) {
      re.push_back(v.real());
      im.push_back(v.imag());
    }
    written.push_back(req.directory / (stem + "_real.txt"));
    write_density_matrix(written.back(), g, re, req.window);
    written.push_back(req.directory / (stem + "_imag.txt"));
    write_density_matrix(written.back(), g, im, req.window);
  }
  return written;
}

struct RunResult {
  Field field;
  StepReport report;
  double initial_norm = 0.0;
  double final_norm = 0.0;
  std::vector<std::filesystem::path> snapshots;

  double norm_drift() const { return std::abs(final_norm - initial_norm) / initial_norm; }
};

/// evolve() with snapshots written to disk; on divergence the last finite
/// state is written as a partial snapshot before the error propagates.
inline RunResult simulate(const Problem& p, const Method& method, int n_steps,
                          const SnapshotRequest& req) {
  RunResult out{p.initial, {}, l2_norm(p.initial), 0.0, {}};
  const bool writing = !req.times.empty() && !req.directory.empty();
  SnapshotSink sink;
  if (writing)
    sink = [&](const Field& f, bool partial) {
      auto paths = write_snapshot(f, partial, req, p.model.schedule);
      out.snapshots.insert(out.snapshots.end(), paths.begin(), paths.end());
    };
  auto r = evolve(p.initial, p.t0, p.T, n_steps, method, p.model,
                  writing ? std::span<const double>(req.times) : std::span<const double>{}, sink);
  out.field = std::move(r.field);
  out.report = r.report;
  out.final_norm = l2_norm(out.field);
  return out;
}

struct VortexRunResult {
  RunResult run;
  std::vector<Vortex> initial_vortices;
  std::vector<Vortex> final_vortices;
};

/// Vortex-lattice experiment: evolve, count density zeros in the display
/// window at the start and at T.
inline VortexRunResult vortex_run(const Problem& p, const std::string& method, int n_steps,
                                  const SnapshotRequest& req) {
  if (p.grid->dim() != 2)
    throw ValidationError("vortex_run needs a two-dimensional grid");
  VortexRunResult out{simulate(p, Method::parse(method), n_steps, req), {}, {}};
  out.initial_vortices = find_vortices(p.initial, req.window);
  out.final_vortices = find_vortices(out.run.field, req.window);
  return out;
}

} // namespace rgpe
