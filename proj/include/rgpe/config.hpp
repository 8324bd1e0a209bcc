#pragma once

#include <rgpe/cfqm.hpp>
#include <rgpe/error.hpp>
#include <rgpe/model.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace rgpe {

enum class InitialState { gaussian, vortex };
enum class SnapshotQuantity { density, real_imag };

/**
 * Flat run description. Defaults describe the two-dimensional linear test
 * problem: [-10, 10]^2 with 64^2 points, T = 4, Omega = 0.5,
 * gamma = (0.8, 1.2), Gaussian initial state with weights (1.1, 0.9), and
 * stepsizes h = 4 / 2^m for m = 4..12.
 */
struct RunConfig {
  int dim = 2;
  std::vector<double> half_width = {10.0, 10.0};
  std::vector<int> size = {64, 64};
  double t0 = 0.0;
  double T = 4.0;
  std::vector<int> steps = {16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
  double omega = 0.5;
  std::vector<double> gamma = {0.8, 1.2};
  double theta = 0.0;
  InitialState initial_state = InitialState::gaussian;
  std::vector<double> weights = {1.1, 0.9};
  std::vector<std::string> methods = {"cf2+strang",   "cf4+rkn74",  "cf4af+rkn74",
                                      "cf6af+rkn116", "bbk+rkn116"};
  std::string reference_method = "bbk+rkn116";
  int reference_refine = 10;
  double reference_tolerance = 1e-11;
  std::vector<double> snapshot_times;
  SnapshotQuantity snapshot_quantity = SnapshotQuantity::density;
  bool lab_frame = false;
  double display_half_width = 5.0;
  std::string out;
  int workers = 0; // 0: available parallelism
  std::uint64_t seed = 1;

  bool operator==(const RunConfig&) const = default;

  void validate() const;
  Model model() const {
    Model m;
    m.schedule = RotationSchedule::linear(omega);
    m.trap = {gamma, theta};
    return m;
  }
  GridPtr grid() const { return make_grid(dim, half_width, size); }
};

inline const char* to_string(InitialState s) {
  return s == InitialState::gaussian ? "gaussian" : "vortex";
}
inline const char* to_string(SnapshotQuantity q) {
  return q == SnapshotQuantity::density ? "density" : "real_imag";
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty())
    return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ValidationError("config key '" + key + "': '" + text + "' is not a number");
  return v;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ValidationError("config key '" + key + "': '" + text + "' is not an integer");
  return v;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < INT32_MIN || v > INT32_MAX)
    throw ValidationError("config key '" + key + "': value out of range");
  return static_cast<int>(v);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes")
    return true;
  if (text == "false" || text == "0" || text == "no")
    return false;
  throw ValidationError("config key '" + key + "': expected true or false, got '" + text + "'");
}

template <class T, class Fn>
std::vector<T> parse_list(const std::string& key, const std::string& text, Fn&& one) {
  std::vector<T> out;
  for (const auto& item : split_list(text))
    out.push_back(one(key, item));
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class T, class Fn>
std::string join(const std::vector<T>& v, Fn&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i)
      s += ", ";
    s += fmt(v[i]);
  }
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = {
      {"dim", [](RunConfig& c, const auto& k, const auto& v) { c.dim = parse_int(k, v); }},
      {"half_width",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.half_width = parse_list<double>(k, v, parse_double);
       }},
      {"size",
       [](RunConfig& c, const auto& k, const auto& v) { c.size = parse_list<int>(k, v, parse_int); }},
      {"t0", [](RunConfig& c, const auto& k, const auto& v) { c.t0 = parse_double(k, v); }},
      {"T", [](RunConfig& c, const auto& k, const auto& v) { c.T = parse_double(k, v); }},
      {"steps",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.steps = parse_list<int>(k, v, parse_int);
       }},
      {"omega", [](RunConfig& c, const auto& k, const auto& v) { c.omega = parse_double(k, v); }},
      {"gamma",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.gamma = parse_list<double>(k, v, parse_double);
       }},
      {"theta", [](RunConfig& c, const auto& k, const auto& v) { c.theta = parse_double(k, v); }},
      {"initial_state",
       [](RunConfig& c, const auto& k, const auto& v) {
         if (v == "gaussian")
           c.initial_state = InitialState::gaussian;
         else if (v == "vortex")
           c.initial_state = InitialState::vortex;
         else
           throw ValidationError("config key '" + k + "': expected gaussian or vortex, got '" +
                                 v + "'");
       }},
      {"weights",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.weights = parse_list<double>(k, v, parse_double);
       }},
      {"methods", [](RunConfig& c, const auto&, const auto& v) { c.methods = split_list(v); }},
      {"reference_method",
       [](RunConfig& c, const auto&, const auto& v) { c.reference_method = v; }},
      {"reference_refine",
       [](RunConfig& c, const auto& k, const auto& v) { c.reference_refine = parse_int(k, v); }},
      {"reference_tolerance",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.reference_tolerance = parse_double(k, v);
       }},
      {"snapshot_times",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.snapshot_times = parse_list<double>(k, v, parse_double);
       }},
      {"snapshot_quantity",
       [](RunConfig& c, const auto& k, const auto& v) {
         if (v == "density")
           c.snapshot_quantity = SnapshotQuantity::density;
         else if (v == "real_imag")
           c.snapshot_quantity = SnapshotQuantity::real_imag;
         else
           throw ValidationError("config key '" + k + "': expected density or real_imag, got '" +
                                 v + "'");
       }},
      {"lab_frame",
       [](RunConfig& c, const auto& k, const auto& v) { c.lab_frame = parse_bool(k, v); }},
      {"display_half_width",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.display_half_width = parse_double(k, v);
       }},
      {"out", [](RunConfig& c, const auto&, const auto& v) { c.out = v; }},
      {"workers", [](RunConfig& c, const auto& k, const auto& v) { c.workers = parse_int(k, v); }},
      {"seed",
       [](RunConfig& c, const auto& k, const auto& v) {
         const long long s = parse_integer(k, v);
         if (s < 0)
           throw ValidationError("config key 'seed' must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
  };
  return setters;
}

} // namespace detail

/// Applies one `key = value` assignment; unknown keys are rejected.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  const auto& setters = detail::config_setters();
  const auto it = setters.find(key);
  if (it == setters.end())
    throw ValidationError("unknown config key '" + key + "'");
  it->second(c, key, value);
}

inline void RunConfig::validate() const {
  auto per_axis = [&](const char* key, std::size_t n) {
    if (static_cast<int>(n) != dim)
      throw ValidationError(std::string("config key '") + key + "' has " + std::to_string(n) +
                            " entries but dim = " + std::to_string(dim));
  };
  if (dim != 2 && dim != 3)
    throw ValidationError("config key 'dim' must be 2 or 3");
  per_axis("half_width", half_width.size());
  per_axis("size", size.size());
  per_axis("gamma", gamma.size());
  if (initial_state == InitialState::gaussian)
    per_axis("weights", weights.size());
  if (initial_state == InitialState::vortex && dim != 2)
    throw ValidationError("config key 'initial_state': vortex requires dim = 2");
  for (double w : half_width)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ValidationError("config key 'half_width' entries must be positive");
  for (int n : size)
    if (n < 4 || n % 2 != 0)
      throw ValidationError("config key 'size' entries must be even and at least 4");
  for (double g : gamma)
    if (!(g > 0.0) || !std::isfinite(g))
      throw ValidationError("config key 'gamma' entries must be positive");
  if (!std::isfinite(t0) || !std::isfinite(T) || !(T > t0))
    throw ValidationError("config keys 't0'/'T': need finite values with T > t0");
  if (steps.empty())
    throw ValidationError("config key 'steps' must list at least one step count");
  for (int n : steps)
    if (n < 1)
      throw ValidationError("config key 'steps' entries must be at least 1");
  if (!std::isfinite(omega))
    throw ValidationError("config key 'omega' must be finite");
  if (!std::isfinite(theta))
    throw ValidationError("config key 'theta' must be finite");
  if (methods.empty())
    throw ValidationError("config key 'methods' must name at least one method");
  for (const auto& m : methods) {
    try {
      Method::parse(m);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("config key 'methods': ") + e.what());
    }
  }
  try {
    Method::parse(reference_method);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config key 'reference_method': ") + e.what());
  }
  if (reference_refine < 1)
    throw ValidationError("config key 'reference_refine' must be at least 1");
  if (!(reference_tolerance > 0.0))
    throw ValidationError("config key 'reference_tolerance' must be positive");
  for (double s : snapshot_times)
    if (!(s >= t0 && s <= T))
      throw ValidationError("config key 'snapshot_times': " + detail::format_double(s) +
                            " lies outside [t0, T]");
  if (!(display_half_width > 0.0))
    throw ValidationError("config key 'display_half_width' must be positive");
  if (workers < 0)
    throw ValidationError("config key 'workers' must be nonnegative");
}

/// Parses `key = value` lines; '#' starts a comment. The result is validated.
inline RunConfig parse_config(std::istream& is, RunConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    const std::string text = detail::trim(line);
    if (text.empty())
      continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(text).substr(0, eq));
    const std::string value = detail::trim(std::string_view(text).substr(eq + 1));
    set_config_value(base, key, value);
  }
  base.validate();
  return base;
}

inline RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is)
    throw ValidationError("cannot open config file " + path.string());
  return parse_config(is, std::move(base));
}

inline RunConfig parse_config_string(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  return parse_config(is, std::move(base));
}

/// Every field written out; parse_config of the result reproduces the config.
inline std::string format_config(const RunConfig& c) {
  using detail::format_double;
  using detail::join;
  auto num = [](double v) { return format_double(v); };
  auto integer = [](int v) { return std::to_string(v); };
  auto str = [](const std::string& s) { return s; };
  std::ostringstream os;
  os << "dim = " << c.dim << "\n"
     << "half_width = " << join(c.half_width, num) << "\n"
     << "size = " << join(c.size, integer) << "\n"
     << "t0 = " << format_double(c.t0) << "\n"
     << "T = " << format_double(c.T) << "\n"
     << "steps = " << join(c.steps, integer) << "\n"
     << "omega = " << format_double(c.omega) << "\n"
     << "gamma = " << join(c.gamma, num) << "\n"
     << "theta = " << format_double(c.theta) << "\n"
     << "initial_state = " << to_string(c.initial_state) << "\n"
     << "weights = " << join(c.weights, num) << "\n"
     << "methods = " << join(c.methods, str) << "\n"
     << "reference_method = " << c.reference_method << "\n"
     << "reference_refine = " << c.reference_refine << "\n"
     << "reference_tolerance = " << format_double(c.reference_tolerance) << "\n"
     << "snapshot_times = " << join(c.snapshot_times, num) << "\n"
     << "snapshot_quantity = " << to_string(c.snapshot_quantity) << "\n"
     << "lab_frame = " << (c.lab_frame ? "true" : "false") << "\n"
     << "display_half_width = " << format_double(c.display_half_width) << "\n"
     << "out = " << c.out << "\n"
     << "workers = " << c.workers << "\n"
     << "seed = " << c.seed << "\n";
  return os.str();
}

/// Switches the per-axis defaults to the three-dimensional test problem.
inline void apply_dimension_defaults(RunConfig& c, int dim) {
  if (dim == 3) {
    c.half_width = {10.0, 10.0, 10.0};
    c.size = {64, 64, 64};
    c.gamma = {0.8, 1.2, 1.0};
    c.weights = {1.1, 0.9, 1.0};
  } else if (dim == 2) {
    c.half_width = {10.0, 10.0};
    c.size = {64, 64};
    c.gamma = {0.8, 1.2};
    c.weights = {1.1, 0.9};
  } else {
    throw ValidationError("dim must be 2 or 3");
  }
  c.dim = dim;
}

inline Field initial_field(const RunConfig& c, const GridPtr& grid) {
  return c.initial_state == InitialState::vortex ? initial_vortex(grid, c.t0)
                                                 : initial_gaussian(grid, c.weights, c.t0);
}

} // namespace rgpe
