#pragma once

#include <rgpe/model.hpp>
#include <rgpe/spectral.hpp>
#include <rgpe/splitting.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rgpe {

/**
 * Commutator-free quasi-Magnus scheme
 *
 *   u1 = exp(-i h sum_k a[J-1][k] H(t0 + c_k h)) ... exp(-i h sum_k a[0][k] H(t0 + c_k h)) u0
 *
 * Rows of `coeffs` are stored in application order: row 0 acts first.
 */
struct CfqmScheme {
  std::string name;
  int order = 0;
  std::vector<double> nodes;
  std::vector<std::vector<double>> coeffs;

  int stages() const { return static_cast<int>(coeffs.size()); }
  int node_count() const { return static_cast<int>(nodes.size()); }

  double stage_sum(int j) const {
    double b = 0.0;
    for (double a : coeffs.at(static_cast<std::size_t>(j)))
      b += a;
    return b;
  }

  std::vector<double> stage_sums() const {
    std::vector<double> b;
    for (int j = 0; j < stages(); ++j)
      b.push_back(stage_sum(j));
    return b;
  }
};

namespace detail {

inline std::vector<CfqmScheme> make_cfqm_schemes() {
  const double r3 = std::sqrt(3.0);
  const std::vector<double> g3 = {gauss3::c1, gauss3::c2, gauss3::c3};
  std::vector<CfqmScheme> out;

  out.push_back({"cf2", 2, {0.5}, {{1.0}}});

  const double big = 0.25 + r3 / 6.0, small = 0.25 - r3 / 6.0;
  out.push_back({"cf4", 4, {0.5 - r3 / 6.0, 0.5 + r3 / 6.0}, {{big, small}, {small, big}}});

  // Alvermann & Fehske, CF4:3.
  const double r = -10.0 / 87.0 * std::sqrt(5.0 / 3.0);
  const std::vector<double> row1 = {37.0 / 240.0 - r, -1.0 / 30.0, 37.0 / 240.0 + r};
  out.push_back({"cf4af",
                 4,
                 g3,
                 {row1, {-11.0 / 360.0, 23.0 / 45.0, -11.0 / 360.0}, {row1[2], row1[1], row1[0]}}});

  // Palindromic six-exponential sixth-order table on the Gauss nodes, chosen to
  // minimize the leading (grade 7) error coefficient.
  const std::vector<std::vector<double>> half = {
      {0.40467327379628315, -0.10827979526565011, 0.027854656031105988},
      {-0.18547201200831431, 0.04507378463080796, -0.013547301033230562},
      {0.094062773241307157, 0.28542823285706442, -0.049793612249373648}};
  std::vector<std::vector<double>> rows6 = half;
  for (auto it = half.rbegin(); it != half.rend(); ++it)
    rows6.push_back({(*it)[2], (*it)[1], (*it)[0]});
  out.push_back({"cf6af", 6, g3, rows6});
  return out;
}

inline const std::vector<CfqmScheme>& cfqm_table() {
  static const std::vector<CfqmScheme> table = make_cfqm_schemes();
  return table;
}

} // namespace detail

inline const CfqmScheme& cfqm_registry(std::string_view name) {
  for (const auto& s : detail::cfqm_table())
    if (s.name == name)
      return s;
  throw ValidationError("unknown CFQM scheme '" + std::string(name) +
                        "' (known: cf2, cf4, cf4af, cf6af)");
}

inline std::vector<std::string> cfqm_names() {
  std::vector<std::string> names;
  for (const auto& s : detail::cfqm_table())
    names.push_back(s.name);
  return names;
}

inline std::string cfqm_checksum(const CfqmScheme& s) {
  std::vector<double> flat = s.nodes;
  for (const auto& row : s.coeffs)
    flat.insert(flat.end(), row.begin(), row.end());
  return detail::coefficient_checksum(flat);
}

// sum_k weights[k] * fields[k]
inline PotentialField combine_potentials(std::span<const PotentialField> fields,
                                         std::span<const double> weights, double time) {
  PotentialField out(fields.front().grid, time);
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const double w = weights[k];
    if (w == 0.0)
      continue;
    const auto& v = fields[k].values;
    for (std::size_t i = 0; i < v.size(); ++i)
      out.values[i] += w * v[i];
  }
  return out;
}

inline std::vector<PotentialField> node_potentials(std::span<const double> nodes,
                                                   const GridPtr& grid,
                                                   const RotationSchedule& schedule,
                                                   const TrapParams& trap, double t0, double h) {
  std::vector<PotentialField> w;
  w.reserve(nodes.size());
  for (double c : nodes)
    w.push_back(potential_rotating(grid, schedule, trap, t0 + c * h));
  return w;
}

/// sum_k a[j][k] W(., t0 + c_k h), with j zero-based in application order.
inline PotentialField stage_effective_potential(const CfqmScheme& scheme, int j,
                                                const GridPtr& grid,
                                                const RotationSchedule& schedule,
                                                const TrapParams& trap, double t0, double h) {
  if (j < 0 || j >= scheme.stages())
    throw ValidationError("stage index " + std::to_string(j) + " out of range for " +
                          scheme.name);
  const auto w = node_potentials(scheme.nodes, grid, schedule, trap, t0, h);
  return combine_potentials(w, scheme.coeffs[static_cast<std::size_t>(j)], t0);
}

struct StepReport {
  std::uint64_t transform_pairs_used = 0;
  std::uint64_t stages_executed = 0;
  std::chrono::nanoseconds wall_time{0};

  StepReport& operator+=(const StepReport& o) {
    transform_pairs_used += o.transform_pairs_used;
    stages_executed += o.stages_executed;
    wall_time += o.wall_time;
    return *this;
  }
};

struct StepResult {
  Field field;
  StepReport report;
};

namespace detail {

inline void require_step_input(const Field& field, double h, const Model& model) {
  if (field.frame() != Frame::rotating)
    throw ValidationError("steppers operate on rotating-frame fields");
  if (!std::isfinite(h) || h == 0.0)
    throw ValidationError("stepsize must be finite and nonzero");
  model.trap.validate(field.grid().dim());
}

inline void check_finite(const Field& field, const std::string& method, int stage, double t0) {
  if (!field.all_finite())
    throw DivergenceError(method + ": non-finite values after stage " + std::to_string(stage) +
                          " of the step starting at t = " + std::to_string(t0));
}

} // namespace detail

/// One CFQM step: stage j solves the autonomous GPE with kinetic weight b_j,
/// potential sum_k a_jk W(., t0 + c_k h) and nonlinearity b_j f, by splitting.
inline StepResult cfqm_step(Field field, double t0, double h, const CfqmScheme& cfqm,
                            const SplittingScheme& splitting, const Model& model) {
  const auto start = std::chrono::steady_clock::now();
  detail::require_step_input(field, h, model);
  const auto f = model.nonlinearity();
  const auto w = node_potentials(cfqm.nodes, field.grid_ptr(), model.schedule, model.trap, t0, h);
  StepReport report;
  for (int j = 0; j < cfqm.stages(); ++j) {
    const auto& row = cfqm.coeffs[static_cast<std::size_t>(j)];
    const auto p = combine_potentials(w, row, t0);
    report.transform_pairs_used += static_cast<std::uint64_t>(
        apply_splitting_inplace(field, splitting, h, cfqm.stage_sum(j), p, f));
    ++report.stages_executed;
    detail::check_finite(field, cfqm.name + "+" + splitting.name, j + 1, t0);
  }
  field.set_time(t0 + h);
  report.wall_time = std::chrono::steady_clock::now() - start;
  return {std::move(field), report};
}

namespace bbk {
inline const double a11 = (10.0 + std::sqrt(15.0)) / 180.0;
inline constexpr double a12 = -1.0 / 9.0;
inline const double a13 = (10.0 - std::sqrt(15.0)) / 180.0;
inline const double a21 = (15.0 + 8.0 * std::sqrt(15.0)) / 90.0;
inline constexpr double a22 = 2.0 / 3.0;
inline const double a23 = (15.0 - 8.0 * std::sqrt(15.0)) / 90.0;

// Node weights of the four stage potentials, in application order.
inline std::array<std::array<double, 3>, 4> node_weights() {
  return {{{a11, a12, a13}, {a21, a22, a23}, {a23, a22, a21}, {a13, a12, a11}}};
}

// Sign with which h^2 times the nonnegative gradient correction enters the
// outer pointwise stages.
inline constexpr double correction_sign = -1.0;
} // namespace bbk

/// Sixth-order modified scheme: two pointwise stages around two autonomous
/// GPE stages of effective duration h/2.
inline StepResult bbk_step(Field field, double t0, double h, const SplittingScheme& splitting,
                           const Model& model) {
  const auto start = std::chrono::steady_clock::now();
  detail::require_step_input(field, h, model);
  const auto f = model.nonlinearity();
  const GridPtr& grid = field.grid_ptr();
  const std::vector<double> nodes = {gauss3::c1, gauss3::c2, gauss3::c3};
  const auto w = node_potentials(nodes, grid, model.schedule, model.trap, t0, h);
  const auto weights = bbk::node_weights();
  const auto correction = modified_potential(grid, model.schedule, model.trap, t0, h);
  const std::string name = "bbk+" + splitting.name;
  const Nonlinearity none;
  StepReport report;

  auto outer = [&](int stage) {
    auto p = combine_potentials(w, weights[static_cast<std::size_t>(stage)], t0);
    for (std::size_t i = 0; i < p.values.size(); ++i)
      p.values[i] += bbk::correction_sign * h * h * correction.values[i];
    potential_flow_inplace(field, p, 0.0, none, h);
  };
  auto inner = [&](int stage) {
    const auto p = combine_potentials(w, weights[static_cast<std::size_t>(stage)], t0);
    report.transform_pairs_used +=
        static_cast<std::uint64_t>(apply_splitting_inplace(field, splitting, 0.5 * h, 1.0, p, f));
  };

  outer(0);
  detail::check_finite(field, name, 1, t0);
  inner(1);
  detail::check_finite(field, name, 2, t0);
  inner(2);
  detail::check_finite(field, name, 3, t0);
  outer(3);
  detail::check_finite(field, name, 4, t0);
  report.stages_executed = 4;
  field.set_time(t0 + h);
  report.wall_time = std::chrono::steady_clock::now() - start;
  return {std::move(field), report};
}

/// "cf6af+rkn116", "bbk+strang", ...
class Method {
public:
  static Method parse(std::string_view descriptor) {
    const auto plus = descriptor.find('+');
    if (plus == std::string_view::npos || descriptor.find('+', plus + 1) != std::string_view::npos)
      throw ValidationError("method descriptor '" + std::string(descriptor) +
                            "' must have the form <integrator>+<splitting>");
    const auto integrator = descriptor.substr(0, plus);
    const auto split = descriptor.substr(plus + 1);
    Method m;
    m.splitting_ = &splitting_registry(split);
    if (integrator != "bbk")
      m.cfqm_ = &cfqm_registry(integrator);
    return m;
  }

  bool is_bbk() const { return cfqm_ == nullptr; }
  const CfqmScheme* cfqm() const { return cfqm_; }
  const SplittingScheme& splitting() const { return *splitting_; }

  std::string name() const { return (is_bbk() ? "bbk" : cfqm_->name) + "+" + splitting_->name; }
  int integrator_order() const { return is_bbk() ? 6 : cfqm_->order; }
  int order() const { return std::min(integrator_order(), splitting_->order); }

  // Exponentials that require the kinetic part.
  int autonomous_stages() const { return is_bbk() ? 2 : cfqm_->stages(); }

  std::uint64_t transform_pairs_per_step() const {
    return static_cast<std::uint64_t>(autonomous_stages()) *
           static_cast<std::uint64_t>(splitting_->kinetic_flows());
  }

  StepResult step(Field field, double t0, double h, const Model& model) const {
    return is_bbk() ? bbk_step(std::move(field), t0, h, *splitting_, model)
                    : cfqm_step(std::move(field), t0, h, *cfqm_, *splitting_, model);
  }

private:
  const CfqmScheme* cfqm_ = nullptr;
  const SplittingScheme* splitting_ = nullptr;
};

inline std::vector<std::string> method_descriptors() {
  return {"cf2+strang", "cf4+rkn74",  "cf4af+rkn74", "cf6af+rkn116",
          "bbk+strang", "bbk+rkn74", "bbk+rkn116"};
}

struct EvolveResult {
  Field field;
  StepReport report;
};

// Receives each requested snapshot; `partial` marks the last finite state of
// an aborted run.
using SnapshotSink = std::function<void(const Field&, bool partial)>;

/**
 * n_steps uniform steps from t0 to T. A snapshot is emitted at the first step
 * boundary at or after each requested time (within 1e-9 h). On divergence the
 * last finite state is handed to the sink with partial = true and the error
 * is rethrown.
 */
inline EvolveResult evolve(Field field, double t0, double T, int n_steps, const Method& method,
                           const Model& model, std::span<const double> snapshot_times = {},
                           const SnapshotSink& sink = {}) {
  if (n_steps < 1)
    throw ValidationError("n_steps must be at least 1");
  if (!(T > t0))
    throw ValidationError("final time must exceed the initial time");
  std::vector<double> pending(snapshot_times.begin(), snapshot_times.end());
  std::sort(pending.begin(), pending.end());
  for (double s : pending)
    if (s < t0 || s > T)
      throw ValidationError("snapshot time " + std::to_string(s) + " outside [t0, T]");

  const double h = (T - t0) / n_steps;
  const double slack = 1e-9 * h;
  std::size_t next = 0;
  field.set_time(t0);
  auto emit_due = [&](const Field& f) {
    while (next < pending.size() && pending[next] <= f.time() + slack) {
      if (sink)
        sink(f, false);
      ++next;
    }
  };
  emit_due(field);

  StepReport total;
  for (int n = 0; n < n_steps; ++n) {
    const double tn = t0 + n * h;
    try {
      auto result = method.step(field, tn, h, model);
      field = std::move(result.field);
      total += result.report;
    } catch (const DivergenceError&) {
      if (sink)
        sink(field, true);
      throw;
    }
    field.set_time(n + 1 == n_steps ? T : t0 + (n + 1) * h);
    emit_due(field);
  }
  return {std::move(field), total};
}

} // namespace rgpe
