#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "rlf/core.hpp"
#include "rlf/flow.hpp"
#include "rlf/io.hpp"
#include "rlf/presets.hpp"
#include "rlf/weakcalc.hpp"

namespace rlf::expcli {

/// Raised by run() when validate() is nonempty; carries every diagnostic.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diags) : Error(join(diags)), diagnostics_(std::move(diags)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& d) {
    std::string m = "invalid configuration";
    for (const auto& s : d) m += "\n  " + s;
    return m;
  }
  std::vector<std::string> diagnostics_;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"flow", "density", "defect",     "taylor",   "tt", "tts", "dtt",
                                                 "weaklie", "renorm", "commutator", "quotient", "fh", "all"};
  return names;
}

struct CloudSpec {
  Box<2> box = Box<2>::cube(1.0);
  int resolution = 64;   // midpoint cells per axis
  std::uint64_t seed = 7;
  int points = 16;       // sample points for the pointwise experiments
};

struct Schedules {
  std::vector<double> t{0.1, 0.5};
  std::vector<double> s{0.1, 0.5};
  std::vector<double> h{1e-1, 1e-2, 1e-3};
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025, 0.0125};
  std::vector<double> delta{1e-2, 1e-3};
  std::vector<double> small{1e-2};  // t = s values for the Taylor check
};

struct ExperimentConfig {
  std::string suite = "all";
  std::string preset = "hamiltonian_pair";
  PresetParams params;
  FlowConfig flow;
  CloudSpec cloud;
  Schedules schedules;
  double q = 2.0;
  std::uint64_t panel_seed = 11;
  int panel_random = 4;
  double density_T = 1.0;
  double fh_eps_level = 1e-2;
  std::string output = "out";

  // Problems found while reading the file (type mismatches, unknown keys).
  std::vector<std::string> parse_issues;
};

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& issues) : issues_(issues) {}

  template <class T>
  void get(const YAML::Node& map, const std::string& path, const char* key, T& out) {
    const YAML::Node n = map[key];
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      issues_.push_back(join(path, key) + ": expected " + type_name<T>());
    }
  }

  /// Reports keys of `map` outside `allowed`. A non-map node is an issue.
  bool check_map(const YAML::Node& map, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!map) return false;
    if (!map.IsMap()) {
      issues_.push_back((path.empty() ? std::string("<root>") : path) + ": expected a mapping");
      return false;
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : map) {
      const auto k = kv.first.as<std::string>();
      if (!ok.count(k)) issues_.push_back(join(path, k.c_str()) + ": unknown key");
    }
    return true;
  }

  static std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_same_v<T, int>) return "an integer";
    else if constexpr (std::is_same_v<T, std::uint64_t>) return "a nonnegative integer";
    else if constexpr (std::is_same_v<T, double>) return "a number";
    else return "a list of numbers";
  }

  std::vector<std::string>& issues_;
};

}  // namespace detail

inline ExperimentConfig parse_config(const YAML::Node& root) {
  ExperimentConfig c;
  detail::Reader r(c.parse_issues);
  if (!r.check_map(root, "", {"suite", "preset", "flow", "cloud", "schedules", "q", "panel", "density", "fh", "output"}))
    return c;
  r.get(root, "", "suite", c.suite);
  r.get(root, "", "q", c.q);
  r.get(root, "", "output", c.output);

  if (const auto p = root["preset"]; r.check_map(p, "preset", {"name", "params"})) {
    r.get(p, "preset", "name", c.preset);
    if (const auto pp = p["params"];
        r.check_map(pp, "preset.params", {"alpha", "r_cut", "lambda_amp", "dilation", "half_width"})) {
      r.get(pp, "preset.params", "alpha", c.params.alpha);
      r.get(pp, "preset.params", "r_cut", c.params.r_cut);
      r.get(pp, "preset.params", "lambda_amp", c.params.lambda_amp);
      r.get(pp, "preset.params", "dilation", c.params.dilation);
      r.get(pp, "preset.params", "half_width", c.params.half_width);
    }
  }
  if (const auto f = root["flow"]; r.check_map(f, "flow", {"dt", "eps_schedule", "kernel_nodes"})) {
    r.get(f, "flow", "dt", c.flow.dt);
    r.get(f, "flow", "eps_schedule", c.flow.eps_schedule);
    r.get(f, "flow", "kernel_nodes", c.flow.kernel_nodes);
  }
  if (const auto cl = root["cloud"]; r.check_map(cl, "cloud", {"half_width", "lo", "hi", "resolution", "seed", "points"})) {
    double hw = std::numeric_limits<double>::quiet_NaN();
    r.get(cl, "cloud", "half_width", hw);
    if (cl["half_width"]) c.cloud.box = Box<2>::cube(hw);
    for (const char* key : {"lo", "hi"}) {
      std::vector<double> v;
      r.get(cl, "cloud", key, v);
      if (!cl[key]) continue;
      if (v.size() != 2) {
        c.parse_issues.push_back(std::string("cloud.") + key + ": expected 2 coordinates");
        continue;
      }
      (key[0] == 'l' ? c.cloud.box.lo : c.cloud.box.hi) = Vec2(v[0], v[1]);
    }
    r.get(cl, "cloud", "resolution", c.cloud.resolution);
    r.get(cl, "cloud", "seed", c.cloud.seed);
    r.get(cl, "cloud", "points", c.cloud.points);
  }
  if (const auto s = root["schedules"]; r.check_map(s, "schedules", {"t", "s", "h", "eps", "delta", "small"})) {
    r.get(s, "schedules", "t", c.schedules.t);
    r.get(s, "schedules", "s", c.schedules.s);
    r.get(s, "schedules", "h", c.schedules.h);
    r.get(s, "schedules", "eps", c.schedules.eps);
    r.get(s, "schedules", "delta", c.schedules.delta);
    r.get(s, "schedules", "small", c.schedules.small);
  }
  if (const auto p = root["panel"]; r.check_map(p, "panel", {"seed", "random"})) {
    r.get(p, "panel", "seed", c.panel_seed);
    r.get(p, "panel", "random", c.panel_random);
  }
  if (const auto d = root["density"]; r.check_map(d, "density", {"T"})) r.get(d, "density", "T", c.density_T);
  if (const auto f = root["fh"]; r.check_map(f, "fh", {"eps_level"})) r.get(f, "fh", "eps_level", c.fh_eps_level);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    ExperimentConfig c;
    c.parse_issues.push_back("<file>: " + std::string(e.what()));
    return c;
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  try {
    return parse_config(YAML::LoadFile(path));
  } catch (const YAML::BadFile&) {
    ExperimentConfig c;
    c.parse_issues.push_back("<file>: cannot read '" + path + "'");
    return c;
  } catch (const YAML::Exception& e) {
    ExperimentConfig c;
    c.parse_issues.push_back("<file>: " + std::string(e.what()));
    return c;
  }
}

/// --seed: one number drives both the cloud subsample and the panel.
inline void override_seed(ExperimentConfig& c, std::uint64_t seed) {
  c.cloud.seed = seed;
  c.panel_seed = seed;
}

namespace detail {

inline void check_schedule(std::vector<std::string>& out, const char* path, const std::vector<double>& v,
                           bool positive, bool nonzero) {
  if (v.empty()) {
    out.push_back(std::string(path) + ": must be nonempty");
    return;
  }
  for (double x : v) {
    if (!std::isfinite(x)) out.push_back(std::string(path) + ": entries must be finite");
    else if (positive && !(x > 0.0)) out.push_back(std::string(path) + ": entries must be positive");
    else if (nonzero && x == 0.0) out.push_back(std::string(path) + ": entries must be nonzero");
    else continue;
    return;
  }
}

}  // namespace detail

/// Every problem that would make run() refuse the config, each prefixed by
/// the dotted path of the offending field. Empty means valid.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> out = c.parse_issues;
  bool known_suite = false;
  for (const auto& s : suite_names()) known_suite = known_suite || s == c.suite;
  if (!known_suite) out.push_back("suite: unknown suite '" + c.suite + "'");

  for (auto& d : preset_diagnostics(c.preset, c.params)) out.push_back(std::move(d));

  try {
    c.flow.validate();
  } catch (const ParameterError& e) {
    out.push_back(e.what());
  }

  if (c.cloud.resolution < 16)
    out.push_back("cloud.resolution: must be at least 16 per axis (got " + std::to_string(c.cloud.resolution) + ")");
  if (!((c.cloud.box.extent().array() > 0.0).all()) || !c.cloud.box.lo.allFinite() || !c.cloud.box.hi.allFinite()) {
    out.push_back("cloud: box must have positive finite extent");
  } else if (c.params.half_width > 0.0) {
    const Box<2> domain = Box<2>::cube(c.params.half_width);
    if (!((c.cloud.box.lo.array() >= domain.lo.array()).all() && (c.cloud.box.hi.array() <= domain.hi.array()).all()))
      out.push_back("cloud: box must lie inside the preset domain [-half_width, half_width]^2");
  }
  const bool uses_panel = c.suite == "all" || c.suite == "tt" || c.suite == "tts" || c.suite == "dtt" ||
                          c.suite == "weaklie" || c.suite == "renorm";
  if (uses_panel && c.cloud.resolution >= 16 && (c.cloud.box.extent().array() > 0.0).all()) {
    // Smallest panel bump radius is 0.1 of the shorter box side.
    const Vec2 ext = c.cloud.box.extent();
    const int need = static_cast<int>(std::ceil(kCellsPerRadius * ext.maxCoeff() / (0.1 * ext.minCoeff()) - 1e-9));
    if (c.cloud.resolution < need)
      out.push_back("cloud.resolution: the test-function panel needs at least " + std::to_string(need) +
                    " cells per axis (got " + std::to_string(c.cloud.resolution) + ")");
  }
  if (c.cloud.points < 1) out.push_back("cloud.points: must be at least 1");

  detail::check_schedule(out, "schedules.t", c.schedules.t, false, false);
  detail::check_schedule(out, "schedules.s", c.schedules.s, false, false);
  detail::check_schedule(out, "schedules.h", c.schedules.h, false, true);
  detail::check_schedule(out, "schedules.eps", c.schedules.eps, true, false);
  detail::check_schedule(out, "schedules.delta", c.schedules.delta, true, false);
  detail::check_schedule(out, "schedules.small", c.schedules.small, true, false);

  if (!(c.q >= 1.0) || !std::isfinite(c.q)) out.push_back("q: norm exponent must be a finite number >= 1");
  if (c.panel_random < 0) out.push_back("panel.random: must be nonnegative");
  if (!(c.density_T > 0.0) || !std::isfinite(c.density_T)) out.push_back("density.T: must be positive and finite");
  if (!(c.fh_eps_level > 0.0)) out.push_back("fh.eps_level: must be positive");
  if (c.output.empty()) out.push_back("output: must be a nonempty directory name");
  return out;
}

/// Fixed-order YAML of every effective setting except the output directory,
/// so the same run written to two places carries the same hash.
inline std::string canonical_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto list = [&](const std::vector<double>& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << fmt(v[i]);
    os << "]\n";
  };
  os << "suite: " << c.suite << '\n';
  os << "preset:\n  name: " << c.preset << "\n  params:\n";
  os << "    alpha: " << fmt(c.params.alpha) << "\n    r_cut: " << fmt(c.params.r_cut)
     << "\n    lambda_amp: " << fmt(c.params.lambda_amp) << "\n    dilation: " << fmt(c.params.dilation)
     << "\n    half_width: " << fmt(c.params.half_width) << '\n';
  os << "flow:\n  dt: " << fmt(c.flow.dt) << "\n  eps_schedule: ";
  list(c.flow.eps_schedule);
  os << "  kernel_nodes: " << c.flow.kernel_nodes << '\n';
  os << "cloud:\n  lo: [" << fmt(c.cloud.box.lo[0]) << ", " << fmt(c.cloud.box.lo[1]) << "]\n  hi: ["
     << fmt(c.cloud.box.hi[0]) << ", " << fmt(c.cloud.box.hi[1]) << "]\n  resolution: " << c.cloud.resolution
     << "\n  seed: " << c.cloud.seed << "\n  points: " << c.cloud.points << '\n';
  os << "schedules:\n";
  os << "  t: ";
  list(c.schedules.t);
  os << "  s: ";
  list(c.schedules.s);
  os << "  h: ";
  list(c.schedules.h);
  os << "  eps: ";
  list(c.schedules.eps);
  os << "  delta: ";
  list(c.schedules.delta);
  os << "  small: ";
  list(c.schedules.small);
  os << "q: " << fmt(c.q) << '\n';
  os << "panel:\n  seed: " << c.panel_seed << "\n  random: " << c.panel_random << '\n';
  os << "density:\n  T: " << fmt(c.density_T) << '\n';
  os << "fh:\n  eps_level: " << fmt(c.fh_eps_level) << '\n';
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace rlf::expcli
