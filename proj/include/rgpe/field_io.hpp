#pragma once

#include <rgpe/grid.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace rgpe {

// Binary dump layout (little-endian):
//   "RGPE" | u32 version | u32 dim | u32 size[dim] | f64 half_width[dim]
//   | f64 time | u8 frame | (f64 re, f64 im) * total_points, row-major.
inline constexpr std::uint32_t field_dump_version = 1;

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw ValidationError("field dump truncated");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

} // namespace detail

inline void write_field_dump(std::ostream& os, const Field& field) {
  const Grid& g = field.grid();
  os.write("RGPE", 4);
  detail::write_le<std::uint32_t>(os, field_dump_version);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a)
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.size(a)));
  for (int a = 0; a < g.dim(); ++a)
    detail::write_le<double>(os, g.half_width(a));
  detail::write_le<double>(os, field.time());
  detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(field.frame()));
  for (const complex& v : field.values()) {
    detail::write_le<double>(os, v.real());
    detail::write_le<double>(os, v.imag());
  }
}

inline Field read_field_dump(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "RGPE", 4) != 0)
    throw ValidationError("not a field dump (bad magic)");
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != field_dump_version)
    throw ValidationError("unsupported field dump version " + std::to_string(version));
  const auto dim = static_cast<int>(detail::read_le<std::uint32_t>(is));
  if (dim != 2 && dim != 3)
    throw ValidationError("field dump has invalid dimension");
  std::vector<int> sizes(static_cast<std::size_t>(dim));
  std::vector<double> widths(static_cast<std::size_t>(dim));
  for (auto& s : sizes)
    s = static_cast<int>(detail::read_le<std::uint32_t>(is));
  for (auto& w : widths)
    w = detail::read_le<double>(is);
  const double time = detail::read_le<double>(is);
  const auto frame_code = detail::read_le<std::uint8_t>(is);
  if (frame_code > 1)
    throw ValidationError("field dump has invalid frame tag");
  auto grid = make_grid(dim, widths, sizes);
  std::vector<complex> values(grid->total_points());
  for (auto& v : values) {
    const double re = detail::read_le<double>(is);
    const double im = detail::read_le<double>(is);
    v = {re, im};
  }
  return Field(std::move(grid), std::move(values), static_cast<Frame>(frame_code), time);
}

inline void write_field_dump(const std::filesystem::path& path, const Field& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw RuntimeError("cannot open " + path.string() + " for writing");
  write_field_dump(os, field);
  if (!os)
    throw RuntimeError("failed writing " + path.string());
}

inline Field read_field_dump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw RuntimeError("cannot open " + path.string());
  return read_field_dump(is);
}

} // namespace rgpe
