#pragma once

#include <rgpe/fft.hpp>
#include <rgpe/grid.hpp>

#include <atomic>
#include <cstdint>

namespace rgpe {

namespace detail {
inline std::atomic<std::uint64_t>& transform_pair_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}
} // namespace detail

// Process-wide number of forward+inverse transform pairs spent in kinetic flows.
inline std::uint64_t transform_pair_count() {
  return detail::transform_pair_counter().load(std::memory_order_relaxed);
}

/// Exact flow of i u' = -(b/2) Delta u over duration tau, applied in place:
/// u <- F^{-1} exp(-i b tau |k|^2 / 2) F u. Counts one transform pair.
inline void kinetic_flow_inplace(Field& field, double tau, double b) {
  detail::transform_pair_counter().fetch_add(1, std::memory_order_relaxed);
  const double scale = b * tau;
  if (scale == 0.0)
    return;
  const Grid& grid = field.grid();
  auto& ws = detail::fft_workspace(grid);
  auto buf = ws.buffer();
  auto values = field.values();
  std::copy(values.begin(), values.end(), buf.begin());
  ws.forward();
  const auto phase = ws.kinetic_phase(grid, scale);
  const double inv_n = 1.0 / static_cast<double>(grid.total_points());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] *= phase[i] * inv_n;
  ws.backward();
  std::copy(buf.begin(), buf.end(), values.begin());
}

inline Field kinetic_flow(Field field, double tau, double b) {
  kinetic_flow_inplace(field, tau, b);
  return field;
}

// sqrt(cell volume * sum |u|^2)
inline double l2_norm(const Field& field) {
  double sum = 0.0;
  for (const complex& v : field.values())
    sum += std::norm(v);
  return std::sqrt(field.grid().cell_volume() * sum);
}

inline double l2_error(const Field& a, const Field& b) {
  require_same_grid(a.grid(), b.grid(), "l2_error");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    sum += std::norm(a[i] - b[i]);
  return std::sqrt(a.grid().cell_volume() * sum);
}

} // namespace rgpe
