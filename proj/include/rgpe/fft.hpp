#pragma once

#include <rgpe/grid.hpp>

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace rgpe {

namespace detail {

// The FFTW planner is not re-entrant; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place forward/backward plans on an aligned buffer for one grid shape.
class FftWorkspace {
public:
  explicit FftWorkspace(const Grid& grid) : n_(grid.total_points()) {
    buffer_ = reinterpret_cast<complex*>(fftw_malloc(sizeof(fftw_complex) * n_));
    if (buffer_ == nullptr)
      throw RuntimeError("fftw_malloc failed");
    std::vector<int> dims(grid.sizes().begin(), grid.sizes().end());
    auto* raw = reinterpret_cast<fftw_complex*>(buffer_);
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft(grid.dim(), dims.data(), raw, raw, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft(grid.dim(), dims.data(), raw, raw, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (forward_ == nullptr || backward_ == nullptr)
      throw RuntimeError("FFTW plan creation failed");
  }

  FftWorkspace(const FftWorkspace&) = delete;
  FftWorkspace& operator=(const FftWorkspace&) = delete;

  ~FftWorkspace() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buffer_);
  }

  std::span<complex> buffer() { return {buffer_, n_}; }
  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

  // exp(-i * scale * |k|^2 / 2) for the grid, memoized by scale.
  std::span<const complex> kinetic_phase(const Grid& grid, double scale) {
    auto it = phases_.find(scale);
    if (it != phases_.end())
      return it->second;
    if (phases_.size() >= max_cached_phases())
      phases_.clear();
    std::vector<complex> phase(n_);
    const auto k2 = grid.half_k_squared();
    for (std::size_t i = 0; i < n_; ++i)
      phase[i] = std::polar(1.0, -scale * k2[i]);
    return phases_.emplace(scale, std::move(phase)).first->second;
  }

private:
  std::size_t max_cached_phases() const {
    constexpr std::size_t budget_bytes = std::size_t{256} << 20;
    return std::clamp<std::size_t>(budget_bytes / (n_ * sizeof(complex)), 4, 512);
  }

  std::size_t n_;
  complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::map<double, std::vector<complex>> phases_;
};

// One workspace per (thread, grid shape).
inline FftWorkspace& fft_workspace(const Grid& grid) {
  thread_local std::map<std::vector<double>, std::unique_ptr<FftWorkspace>> cache;
  std::vector<double> key(grid.sizes().begin(), grid.sizes().end());
  key.insert(key.end(), grid.half_widths().begin(), grid.half_widths().end());
  auto& slot = cache[key];
  if (!slot)
    slot = std::make_unique<FftWorkspace>(grid);
  return *slot;
}

} // namespace detail

// Fourier coefficients of a Field, normalized so that a constant field c has
// coefficient c in the zero mode and the inverse transform needs no scaling.
struct Spectrum {
  GridPtr grid;
  std::vector<complex> coeffs;
};

inline Spectrum forward_transform(const Field& field) {
  const Grid& grid = field.grid();
  auto& ws = detail::fft_workspace(grid);
  auto buf = ws.buffer();
  std::copy(field.values().begin(), field.values().end(), buf.begin());
  ws.forward();
  const double inv_n = 1.0 / static_cast<double>(grid.total_points());
  Spectrum s{field.grid_ptr(), std::vector<complex>(buf.size())};
  for (std::size_t i = 0; i < buf.size(); ++i)
    s.coeffs[i] = buf[i] * inv_n;
  return s;
}

inline Field inverse_transform(const Spectrum& spectrum, Frame frame = Frame::rotating,
                               double time = 0.0) {
  const Grid& grid = *spectrum.grid;
  if (spectrum.coeffs.size() != grid.total_points())
    throw ValidationError("inverse_transform: coefficient count does not match grid");
  auto& ws = detail::fft_workspace(grid);
  auto buf = ws.buffer();
  std::copy(spectrum.coeffs.begin(), spectrum.coeffs.end(), buf.begin());
  ws.backward();
  return Field(spectrum.grid, std::vector<complex>(buf.begin(), buf.end()), frame, time);
}

} // namespace rgpe
