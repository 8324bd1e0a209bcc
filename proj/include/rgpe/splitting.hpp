#pragma once

#include <rgpe/model.hpp>
#include <rgpe/spectral.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rgpe {

/**
 * Splitting method for i u' = (A + B) u with A the kinetic part and B a
 * multiplication operator, written kinetic-first:
 *
 *   S(h) = B(beta_s h) A(alpha_s h) ... B(beta_1 h) A(alpha_1 h)
 *
 * so A(alpha_1 h) acts first. Tables published in kick-first (BAB) form are
 * stored with a leading alpha_1 = 0; zero-length flows are skipped, so the
 * cost of one application is the number of nonzero alphas.
 *
 * The Runge-Kutta-Nystrom tables assume [B, [B, [B, A]]] = 0, which holds for
 * a Laplacian A and a multiplication operator B. Nothing here checks that.
 */
struct SplittingScheme {
  std::string name;
  int order = 0;
  std::vector<std::pair<double, double>> pairs; // (alpha_l, beta_l)

  int kinetic_flows() const {
    int n = 0;
    for (const auto& [a, b] : pairs)
      n += a != 0.0 ? 1 : 0;
    return n;
  }
  double alpha_sum() const {
    double s = 0.0;
    for (const auto& p : pairs)
      s += p.first;
    return s;
  }
  double beta_sum() const {
    double s = 0.0;
    for (const auto& p : pairs)
      s += p.second;
    return s;
  }
};

namespace detail {

// Kick-first palindromic table b0 A(a0) b1 ... A(a_{m-1}) b_m -> kinetic-first pairs.
inline std::vector<std::pair<double, double>> from_kick_first(const std::vector<double>& drift,
                                                              const std::vector<double>& kick) {
  std::vector<std::pair<double, double>> pairs;
  pairs.emplace_back(0.0, kick.front());
  for (std::size_t i = 0; i < drift.size(); ++i)
    pairs.emplace_back(drift[i], kick[i + 1]);
  return pairs;
}

inline std::vector<SplittingScheme> make_splitting_schemes() {
  std::vector<SplittingScheme> schemes;
  schemes.push_back({"strang", 2, {{0.5, 1.0}, {0.5, 0.0}}});

  // Blanes & Moan (2002), SRKN_6^b: order 4, six kinetic flows, seven kicks.
  const std::vector<double> a74 = {0.245298957184271,  0.604872665711080,  -0.350171622895351,
                                   -0.350171622895351, 0.604872665711080,  0.245298957184271};
  const std::vector<double> b74 = {0.0829844064174052, 0.396309801498368,  -0.0390563049223486,
                                   0.1195241940131508, -0.0390563049223486, 0.396309801498368,
                                   0.0829844064174052};
  schemes.push_back({"rkn74", 4, from_kick_first(a74, b74)});

  // Blanes & Moan (2002), SRKN_11^b: order 6, eleven kinetic flows, twelve kicks.
  const std::vector<double> a116 = {
      0.123229775946271,  0.290553797799558,  -0.127049212625417, -0.246331761062075,
      0.357208872795928,  0.2047770542914700, 0.357208872795928,  -0.246331761062075,
      -0.127049212625417, 0.290553797799558,  0.123229775946271};
  const std::vector<double> b116 = {
      0.0414649985182624,  0.198128671918067,  -0.0400061921041533, 0.0752539843015807,
      -0.0115113874206879, 0.2366699247869311, 0.2366699247869311,  -0.0115113874206879,
      0.0752539843015807,  -0.0400061921041533, 0.198128671918067,  0.0414649985182624};
  schemes.push_back({"rkn116", 6, from_kick_first(a116, b116)});
  return schemes;
}

inline const std::vector<SplittingScheme>& splitting_table() {
  static const std::vector<SplittingScheme> table = make_splitting_schemes();
  return table;
}

// FNV-1a over the little-endian bytes of each coefficient.
inline std::string coefficient_checksum(const std::vector<double>& coeffs) {
  std::uint64_t h = 1469598103934665603ull;
  for (double c : coeffs) {
    std::uint64_t bits;
    std::memcpy(&bits, &c, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace detail

inline const SplittingScheme& splitting_registry(std::string_view name) {
  for (const auto& s : detail::splitting_table())
    if (s.name == name)
      return s;
  throw ValidationError("unknown splitting scheme '" + std::string(name) +
                        "' (known: strang, rkn74, rkn116)");
}

inline std::vector<std::string> splitting_names() {
  std::vector<std::string> names;
  for (const auto& s : detail::splitting_table())
    names.push_back(s.name);
  return names;
}

inline std::string splitting_checksum(const SplittingScheme& s) {
  std::vector<double> flat;
  for (const auto& [a, b] : s.pairs) {
    flat.push_back(a);
    flat.push_back(b);
  }
  return detail::coefficient_checksum(flat);
}

/// Exact flow of i u' = (P + b f(|u|^2)) u over duration tau.
/// The flow preserves |u| pointwise, so the density is frozen at entry.
inline void potential_flow_inplace(Field& field, const PotentialField& potential, double b,
                                   const Nonlinearity& f, double tau) {
  require_same_grid(field.grid(), *potential.grid, "potential_flow");
  if (tau == 0.0)
    return;
  auto u = field.values();
  const auto& p = potential.values;
  if (b == 0.0 || f.vanishes()) {
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] *= std::polar(1.0, -tau * p[i]);
    return;
  }
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] *= std::polar(1.0, -tau * (p[i] + b * f(std::norm(u[i]))));
}

inline Field potential_flow(Field field, const PotentialField& potential, double b,
                            const Nonlinearity& f, double tau) {
  potential_flow_inplace(field, potential, b, f, tau);
  return field;
}

/// One splitting step of length h for i u' = (-(b/2) Delta + P + b f(|u|^2)) u.
/// Returns the number of transform pairs spent.
inline int apply_splitting_inplace(Field& field, const SplittingScheme& scheme, double h,
                                   double b, const PotentialField& potential,
                                   const Nonlinearity& f) {
  int pairs = 0;
  for (const auto& [alpha, beta] : scheme.pairs) {
    if (alpha != 0.0) {
      kinetic_flow_inplace(field, alpha * h, b);
      ++pairs;
    }
    if (beta != 0.0)
      potential_flow_inplace(field, potential, b, f, beta * h);
  }
  return pairs;
}

inline Field apply_splitting(Field field, const SplittingScheme& scheme, double h, double b,
                             const PotentialField& potential, const Nonlinearity& f) {
  apply_splitting_inplace(field, scheme, h, b, potential, f);
  return field;
}

} // namespace rgpe
