#pragma once

#include <rgpe/error.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rgpe {

using complex = std::complex<double>;

/**
 * Periodic rectangular grid on [-L_0, L_0) x ... x [-L_{d-1}, L_{d-1}).
 *
 * Axis 0 is the slowest-varying index in the flattened storage (row-major),
 * matching the layout FFTW expects for multi-dimensional transforms.
 * Wavenumbers use FFT ordering: k_n = (pi / L) n for
 * n = 0, ..., size/2 - 1, -size/2, ..., -1.
 */
class Grid {
public:
  Grid(int dim, std::vector<double> half_widths, std::vector<int> sizes)
      : dim_(dim), half_width_(std::move(half_widths)), size_(std::move(sizes)) {
    if (dim_ != 2 && dim_ != 3)
      throw ValidationError("grid dimension must be 2 or 3, got " + std::to_string(dim_));
    if (static_cast<int>(half_width_.size()) != dim_ || static_cast<int>(size_.size()) != dim_)
      throw ValidationError("grid needs exactly one half-width and one size per axis");
    for (int axis = 0; axis < dim_; ++axis) {
      const int n = size_[axis];
      if (n < 4 || n % 2 != 0)
        throw ValidationError("grid size on axis " + std::to_string(axis) +
                              " must be even and >= 4, got " + std::to_string(n));
      if (!(half_width_[axis] > 0.0) || !std::isfinite(half_width_[axis]))
        throw ValidationError("grid half-width on axis " + std::to_string(axis) +
                              " must be positive and finite");
    }
    total_ = 1;
    for (int axis = 0; axis < dim_; ++axis) {
      const int n = size_[axis];
      const double L = half_width_[axis];
      total_ *= static_cast<std::size_t>(n);
      spacing_.push_back(2.0 * L / n);
      std::vector<double> k(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        const int m = j < n / 2 ? j : j - n;
        k[static_cast<std::size_t>(j)] = std::numbers::pi / L * m;
      }
      wavenumber_.push_back(std::move(k));
    }
    half_k_squared_.resize(total_);
    for_each_index([&](std::size_t flat, std::span<const int> idx) {
      double k2 = 0.0;
      for (int axis = 0; axis < dim_; ++axis) {
        const double k = wavenumber_[axis][static_cast<std::size_t>(idx[axis])];
        k2 += k * k;
      }
      half_k_squared_[flat] = 0.5 * k2;
    });
  }

  int dim() const { return dim_; }
  double half_width(int axis) const { return half_width_[axis]; }
  int size(int axis) const { return size_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  const std::vector<double>& half_widths() const { return half_width_; }
  const std::vector<int>& sizes() const { return size_; }
  std::span<const double> wavenumbers(int axis) const { return wavenumber_[axis]; }

  std::size_t total_points() const { return total_; }

  // Product of the spacings; the quadrature weight of every grid point.
  double cell_volume() const {
    double v = 1.0;
    for (double s : spacing_)
      v *= s;
    return v;
  }

  // Coordinate of grid index j on an axis: -L + j * spacing.
  double coordinate(int axis, int j) const { return -half_width_[axis] + j * spacing_[axis]; }

  // |k|^2 / 2 for every flattened Fourier index.
  std::span<const double> half_k_squared() const { return half_k_squared_; }

  // Calls fn(flat_index, multi_index) in storage order.
  template <class Fn>
  void for_each_index(Fn&& fn) const {
    std::array<int, 3> idx{0, 0, 0};
    for (std::size_t flat = 0; flat < total_; ++flat) {
      fn(flat, std::span<const int>(idx.data(), static_cast<std::size_t>(dim_)));
      for (int axis = dim_ - 1; axis >= 0; --axis) {
        if (++idx[axis] < size_[axis])
          break;
        idx[axis] = 0;
      }
    }
  }

  // Calls fn(flat_index, coordinates) with the physical point of each index.
  template <class Fn>
  void for_each_point(Fn&& fn) const {
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for_each_index([&](std::size_t flat, std::span<const int> idx) {
      for (int axis = 0; axis < dim_; ++axis)
        x[axis] = coordinate(axis, idx[axis]);
      fn(flat, std::span<const double>(x.data(), static_cast<std::size_t>(dim_)));
    });
  }

  bool same_shape(const Grid& other) const {
    return dim_ == other.dim_ && size_ == other.size_ && half_width_ == other.half_width_;
  }

private:
  int dim_;
  std::vector<double> half_width_;
  std::vector<int> size_;
  std::vector<double> spacing_;
  std::vector<std::vector<double>> wavenumber_;
  std::vector<double> half_k_squared_;
  std::size_t total_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int dim, std::vector<double> half_widths, std::vector<int> sizes) {
  return std::make_shared<const Grid>(dim, std::move(half_widths), std::move(sizes));
}

enum class Frame : std::uint8_t { rotating = 0, lab = 1 };

inline const char* to_string(Frame f) { return f == Frame::rotating ? "rotating" : "lab"; }

// Complex state on a grid, tagged with its frame and time.
class Field {
public:
  Field(GridPtr grid, Frame frame = Frame::rotating, double time = 0.0)
      : grid_(std::move(grid)), values_(grid_->total_points()), frame_(frame), time_(time) {}

  Field(GridPtr grid, std::vector<complex> values, Frame frame, double time)
      : grid_(std::move(grid)), values_(std::move(values)), frame_(frame), time_(time) {
    if (values_.size() != grid_->total_points())
      throw ValidationError("field has " + std::to_string(values_.size()) +
                            " values but the grid has " +
                            std::to_string(grid_->total_points()) + " points");
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  std::span<complex> values() { return values_; }
  std::span<const complex> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  complex& operator[](std::size_t i) { return values_[i]; }
  const complex& operator[](std::size_t i) const { return values_[i]; }

  Frame frame() const { return frame_; }
  void set_frame(Frame f) { frame_ = f; }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  bool all_finite() const {
    for (const complex& v : values_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        return false;
    return true;
  }

private:
  GridPtr grid_;
  std::vector<complex> values_;
  Frame frame_;
  double time_;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (&a != &b && !a.same_shape(b))
    throw ValidationError(std::string(what) + ": grid mismatch");
}

} // namespace rgpe
