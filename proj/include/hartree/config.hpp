#pragma once

// Experiment configuration: a flat `key = value` file (see docs/config.md),
// every value canonicalised on entry so that serialisation round-trips and
// the fingerprint depends only on meaning, not spelling.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hartree/error.hpp"
#include "hartree/fingerprint.hpp"
#include "hartree/paths.hpp"
#include "hartree/potentials.hpp"
#include "hartree/variational.hpp"

namespace hartree {

enum class ValueType { integer, unsigned64, real, real_or_auto, choice, boolean, int_list, real_list, point, text };

struct ConfigKey {
  std::string_view name;
  std::string_view fallback;
  ValueType type;
  std::vector<std::string_view> choices;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"dimension", "1", ValueType::integer, {}},
      {"grid.half_width", "6", ValueType::real, {}},
      {"grid.points", "121", ValueType::integer, {}},
      {"beta", "1", ValueType::real, {}},
      {"beta_list", "0.5,1,2", ValueType::real_list, {}},
      {"dt", "0.015625", ValueType::real, {}},
      {"dt_pde", "0", ValueType::real, {}},
      {"trap.family", "harmonic", ValueType::choice, {"harmonic", "quartic", "box"}},
      {"trap.strength", "1", ValueType::real, {}},
      {"trap.half_width", "1", ValueType::real, {}},
      {"pair.family", "ball", ValueType::choice, {"gaussian", "ball"}},
      {"pair.strength", "1", ValueType::real, {}},
      {"pair.range", "1", ValueType::real, {}},
      {"pair.rescaled", "true", ValueType::boolean, {}},
      {"alpha", "0", ValueType::real_or_auto, {}},
      {"init.kind", "point", ValueType::choice, {"point", "gaussian", "uniform_box"}},
      {"init.center", "0,0,0", ValueType::point, {}},
      {"init.width", "0", ValueType::real, {}},
      {"N", "2", ValueType::int_list, {}},
      {"replicas", "1000", ValueType::integer, {}},
      {"seed", "1", ValueType::unsigned64, {}},
      {"mollifier.epsilon", "0", ValueType::real, {}},
      {"tilt.kind", "zero", ValueType::choice, {"zero", "constant", "trap", "bump"}},
      {"tilt.value", "0", ValueType::real, {}},
      {"tilt.width", "1", ValueType::real, {}},
      {"density.kind", "mean", ValueType::choice, {"mean", "gaussian", "point"}},
      {"density.width", "1", ValueType::real, {}},
      {"rate.tol", "0.0001", ValueType::real, {}},
      {"rate.max_iter", "500", ValueType::integer, {}},
      {"solver.method", "dual", ValueType::choice, {"dual", "entropic"}},
      {"solver.step", "1", ValueType::real, {}},
      {"solver.max_iter", "20000", ValueType::integer, {}},
      {"solver.tol", "1e-10", ValueType::real, {}},
      {"solver.inner_tol", "1e-05", ValueType::real, {}},
      {"solver.inner_max_iter", "300", ValueType::integer, {}},
      {"solver.restarts", "0", ValueType::integer, {}},
      {"solver.max_sweeps", "200", ValueType::integer, {}},
      {"sample.write_paths", "false", ValueType::boolean, {}},
      {"output", "runs", ValueType::text, {}},
  };
  return keys;
}

namespace detail {

[[noreturn]] inline void config_error(std::string_view key, const std::string& what) {
  fail(ErrorKind::ConfigInvalid, std::string(key) + ": " + what);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const char* end = s.data() + s.size();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string canonical_value(const ConfigKey& key, std::string_view raw) {
  const std::string s = trim(raw);
  switch (key.type) {
    case ValueType::integer: {
      auto v = parse_number<long long>(s);
      if (!v) config_error(key.name, "expected an integer, got '" + s + "'");
      return std::to_string(*v);
    }
    case ValueType::unsigned64: {
      auto v = parse_number<std::uint64_t>(s);
      if (!v) config_error(key.name, "expected an unsigned 64-bit integer, got '" + s + "'");
      return std::to_string(*v);
    }
    case ValueType::real: {
      auto v = parse_number<double>(s);
      if (!v) config_error(key.name, "expected a finite number, got '" + s + "'");
      return format_double(*v);
    }
    case ValueType::real_or_auto: {
      if (s == "auto") return s;
      auto v = parse_number<double>(s);
      if (!v) config_error(key.name, "expected a finite number or 'auto', got '" + s + "'");
      return format_double(*v);
    }
    case ValueType::choice: {
      if (std::find(key.choices.begin(), key.choices.end(), s) == key.choices.end()) {
        std::string allowed;
        for (auto c : key.choices) allowed += (allowed.empty() ? "" : ", ") + std::string(c);
        config_error(key.name, "unknown value '" + s + "' (expected one of " + allowed + ")");
      }
      return s;
    }
    case ValueType::boolean: {
      if (s == "true" || s == "1" || s == "yes") return "true";
      if (s == "false" || s == "0" || s == "no") return "false";
      config_error(key.name, "expected true or false, got '" + s + "'");
    }
    case ValueType::int_list: {
      if (s.empty()) return s;
      std::string out;
      for (const auto& item : split_list(s)) {
        auto v = parse_number<long long>(item);
        if (!v) config_error(key.name, "expected a comma-separated integer list, got '" + s + "'");
        out += (out.empty() ? "" : ",") + std::to_string(*v);
      }
      return out;
    }
    case ValueType::real_list: {
      if (s.empty()) return s;
      std::string out;
      for (const auto& item : split_list(s)) {
        auto v = parse_number<double>(item);
        if (!v) config_error(key.name, "expected a comma-separated number list, got '" + s + "'");
        out += (out.empty() ? "" : ",") + format_double(*v);
      }
      return out;
    }
    case ValueType::point: {
      auto items = split_list(s);
      if (items.empty() || items.size() > 3) config_error(key.name, "expected 1 to 3 coordinates");
      std::string out;
      for (std::size_t a = 0; a < 3; ++a) {
        double v = 0.0;
        if (a < items.size()) {
          auto p = parse_number<double>(items[a]);
          if (!p) config_error(key.name, "expected comma-separated coordinates, got '" + s + "'");
          v = *p;
        }
        out += (a ? "," : "") + format_double(v);
      }
      return out;
    }
    case ValueType::text:
      if (s.empty()) config_error(key.name, "must not be empty");
      return s;
  }
  return s;
}

}  // namespace detail

/// Canonical key -> value map, seeded with defaults.
class ConfigTable {
 public:
  ConfigTable() {
    for (const auto& k : config_keys())
      values_[std::string(k.name)] = k.fallback.empty() ? std::string() : detail::canonical_value(k, k.fallback);
  }

  void set(std::string_view key, std::string_view raw) {
    const auto& keys = config_keys();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
    if (it == keys.end()) detail::config_error(key, "unknown configuration key");
    values_[std::string(key)] = detail::canonical_value(*it, raw);
  }

  /// `key = value` lines; `#` starts a comment; blank lines are ignored.
  void parse(std::string_view text, std::string_view source = "config") {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        fail(ErrorKind::ConfigInvalid,
             std::string(source) + ":" + std::to_string(lineno) + ": expected 'key = value'");
      set(detail::trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    }
  }

  /// `KEY=VALUE` as given to --set.
  void apply_override(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::ConfigInvalid, "--set " + std::string(kv) + ": expected KEY=VALUE");
    set(detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }

  const std::string& get(std::string_view key) const { return values_.at(std::string(key)); }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Canonical text; parsing it reproduces this table exactly.
  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  /// Hash of the subcommand and every key except the output location.
  std::string fingerprint(std::string_view subcommand) const {
    Fingerprint fp;
    fp.add("subcommand", subcommand);
    for (const auto& [k, v] : values_)
      if (k != "output") fp.add(k, v);
    return fp.hex();
  }

  bool operator==(const ConfigTable&) const = default;

 private:
  std::map<std::string, std::string> values_;
};

enum class TiltKind { zero, constant, trap, bump };
enum class DensityKind { mean, gaussian, point };

/// Typed view of a ConfigTable.
struct ExperimentConfig {
  int dimension = 1;
  double half_width = 6.0;
  int points = 121;
  double beta = 1.0;
  std::vector<double> beta_list;
  double dt = 1.0 / 64;
  double dt_pde = 0.0;
  TrapSpec trap;
  PairSpec pair;
  bool pair_rescaled = true;
  std::optional<double> alpha;  ///< empty: alpha(v)
  InitialDistribution init;
  std::vector<int> N;
  int replicas = 1000;
  std::uint64_t seed = 1;
  double mollifier_epsilon = 0.0;
  TiltKind tilt_kind = TiltKind::zero;
  double tilt_value = 0.0;
  double tilt_width = 1.0;
  DensityKind density_kind = DensityKind::mean;
  double density_width = 1.0;
  double rate_tol = 1e-4;
  int rate_max_iter = 500;
  VarOptions solver;
  bool write_paths = false;
  std::string output = "runs";

  GridSpec grid() const { return make_grid(dimension, half_width, points); }
};

namespace detail {

template <typename T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  if (s.empty()) return out;
  for (const auto& item : split_list(s)) out.push_back(*parse_number<T>(item));
  return out;
}

inline void check(bool ok, std::string_view key, const std::string& what) {
  if (!ok) config_error(key, what);
}

}  // namespace detail

/// Builds the typed config and checks field-level constraints that do not
/// depend on the subcommand. Throws ConfigInvalid naming the field.
inline ExperimentConfig build_config(const ConfigTable& t) {
  using detail::check;
  auto real = [&](std::string_view k) { return *detail::parse_number<double>(t.get(k)); };
  auto integer = [&](std::string_view k) { return static_cast<int>(*detail::parse_number<long long>(t.get(k))); };
  ExperimentConfig c;
  c.dimension = integer("dimension");
  check(c.dimension >= 1 && c.dimension <= 3, "dimension", "must be 1, 2 or 3");
  c.half_width = real("grid.half_width");
  check(c.half_width > 0.0, "grid.half_width", "must be positive");
  c.points = integer("grid.points");
  check(c.points >= 8, "grid.points", "must be >= 8");
  c.beta = real("beta");
  check(c.beta > 0.0, "beta", "must be positive");
  c.beta_list = detail::parse_list<double>(t.get("beta_list"));
  c.dt = real("dt");
  check(c.dt > 0.0, "dt", "must be positive");
  c.dt_pde = real("dt_pde");
  check(c.dt_pde >= 0.0, "dt_pde", "must be >= 0 (0 selects h^2/(4d))");
  if (c.dt_pde > 0.0) {
    const double h = 2.0 * c.half_width / (c.points - 1);
    check(c.dt_pde <= h * h / (4.0 * c.dimension) * (1.0 + 1e-12), "dt_pde", "must not exceed h^2/(4 d)");
  }

  const std::string& tf = t.get("trap.family");
  if (tf == "box") {
    check(real("trap.half_width") > 0.0, "trap.half_width", "must be positive");
    c.trap = TrapSpec::box(real("trap.half_width"));
  } else {
    check(real("trap.strength") >= 0.0, "trap.strength", "must be >= 0");
    c.trap = tf == "harmonic" ? TrapSpec::harmonic(real("trap.strength")) : TrapSpec::quartic(real("trap.strength"));
  }
  check(real("pair.strength") >= 0.0, "pair.strength", "must be >= 0");
  check(real("pair.range") > 0.0, "pair.range", "must be positive");
  c.pair = t.get("pair.family") == "ball" ? PairSpec::ball(real("pair.strength"), real("pair.range"), c.dimension)
                                          : PairSpec::gaussian(real("pair.strength"), real("pair.range"), c.dimension);
  c.pair_rescaled = t.get("pair.rescaled") == "true";
  if (t.get("alpha") != "auto") {
    c.alpha = real("alpha");
    check(*c.alpha >= 0.0, "alpha", "must be >= 0");
  }

  const auto center_v = detail::parse_list<double>(t.get("init.center"));
  const Point center{center_v[0], center_v[1], center_v[2]};
  const std::string& ik = t.get("init.kind");
  const double iw = real("init.width");
  if (ik == "point") {
    c.init = InitialDistribution::point(center);
  } else {
    check(iw > 0.0, "init.width", "must be positive for " + ik + " initial laws");
    c.init = ik == "gaussian" ? InitialDistribution::gaussian(center, iw) : InitialDistribution::uniform_box(iw, center);
  }
  try {
    c.init.validate(c.trap, c.dimension);
  } catch (const Error& e) {
    detail::config_error("init", e.what());
  }

  c.N = detail::parse_list<int>(t.get("N"));
  for (int n : c.N) check(n >= 1, "N", "entries must be >= 1");
  c.replicas = integer("replicas");
  check(c.replicas >= 0, "replicas", "must be >= 0");
  c.seed = *detail::parse_number<std::uint64_t>(t.get("seed"));
  c.mollifier_epsilon = real("mollifier.epsilon");
  check(c.mollifier_epsilon >= 0.0, "mollifier.epsilon", "must be >= 0 (0 selects 3h)");

  const std::string& tk = t.get("tilt.kind");
  c.tilt_kind = tk == "zero" ? TiltKind::zero : tk == "constant" ? TiltKind::constant : tk == "trap" ? TiltKind::trap : TiltKind::bump;
  c.tilt_value = real("tilt.value");
  c.tilt_width = real("tilt.width");
  check(c.tilt_width > 0.0, "tilt.width", "must be positive");
  const std::string& dk = t.get("density.kind");
  c.density_kind = dk == "mean" ? DensityKind::mean : dk == "gaussian" ? DensityKind::gaussian : DensityKind::point;
  c.density_width = real("density.width");
  check(c.density_width > 0.0, "density.width", "must be positive");
  c.rate_tol = real("rate.tol");
  check(c.rate_tol > 0.0, "rate.tol", "must be positive");
  c.rate_max_iter = integer("rate.max_iter");
  check(c.rate_max_iter >= 0, "rate.max_iter", "must be >= 0");

  c.solver.method = t.get("solver.method") == "dual" ? ChiMethod::dual_mirror : ChiMethod::entropic;
  c.solver.step = real("solver.step");
  check(c.solver.step > 0.0, "solver.step", "must be positive");
  c.solver.max_iter = integer("solver.max_iter");
  check(c.solver.max_iter > 0, "solver.max_iter", "must be positive");
  c.solver.tol = real("solver.tol");
  check(c.solver.tol > 0.0, "solver.tol", "must be positive");
  c.solver.inner_tol = real("solver.inner_tol");
  check(c.solver.inner_tol > 0.0, "solver.inner_tol", "must be positive");
  c.solver.inner_max_iter = integer("solver.inner_max_iter");
  check(c.solver.inner_max_iter > 0, "solver.inner_max_iter", "must be positive");
  c.solver.restarts = integer("solver.restarts");
  check(c.solver.restarts >= 0, "solver.restarts", "must be >= 0");
  c.solver.max_sweeps = integer("solver.max_sweeps");
  check(c.solver.max_sweeps > 0, "solver.max_sweeps", "must be positive");
  c.solver.seed = c.seed;
  c.solver.dt_pde = c.dt_pde;
  c.write_paths = t.get("sample.write_paths") == "true";
  c.output = t.get("output");
  return c;
}

}  // namespace hartree
