#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rlf {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

inline constexpr const char* kVersion = "0.3.1";

// ---------------------------------------------------------------------------
// Errors. Every failure mode of the library maps to one of these.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundaryMarginError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class UnknownPresetError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Trajectory left the declared box. `exit_time` is the first sampled time
/// outside; `index` is the cloud index when raised from a cloud transport.
class EscapeError : public Error {
 public:
  EscapeError(double exit_time, std::ptrdiff_t index = -1)
      : Error(message(exit_time, index)), exit_time_(exit_time), index_(index) {}

  double exit_time() const { return exit_time_; }
  std::ptrdiff_t index() const { return index_; }

 private:
  static std::string message(double t, std::ptrdiff_t index) {
    std::string m = "trajectory escaped the declared box at t=" + std::to_string(t);
    if (index >= 0) m += " (cloud point " + std::to_string(index) + ")";
    return m;
  }

  double exit_time_;
  std::ptrdiff_t index_;
};

/// A density sample outside the Liouville bounds.
class BoundViolationError : public Error {
 public:
  BoundViolationError(std::string what, double time, double value, double bound)
      : Error(what + ": t=" + std::to_string(time) + " value=" + std::to_string(value) +
              " bound=" + std::to_string(bound)),
        time_(time),
        value_(value),
        bound_(bound) {}

  double time() const { return time_; }
  double value() const { return value_; }
  double bound() const { return bound_; }

 private:
  double time_, value_, bound_;
};

// ---------------------------------------------------------------------------

enum class Regularity { smooth, lipschitz, sobolev };

inline const char* to_string(Regularity r) {
  switch (r) {
    case Regularity::smooth: return "smooth";
    case Regularity::lipschitz: return "lipschitz";
    case Regularity::sobolev: return "sobolev";
  }
  return "?";
}

/// Axis-aligned box [lo, hi].
template <int Dim>
struct Box {
  Vec<Dim> lo;
  Vec<Dim> hi;

  static Box cube(double half_width) {
    return {Vec<Dim>::Constant(-half_width), Vec<Dim>::Constant(half_width)};
  }

  bool contains(const Vec<Dim>& z) const {
    return ((z - lo).array() >= 0.0).all() && ((hi - z).array() >= 0.0).all();
  }

  /// True when z is at least `margin` away from every face.
  bool contains_with_margin(const Vec<Dim>& z, double margin) const {
    return ((z - lo).array() >= margin).all() && ((hi - z).array() >= margin).all();
  }

  /// True when the closed ball B_r(c) lies inside the box.
  bool contains_ball(const Vec<Dim>& c, double r) const { return contains_with_margin(c, r); }

  Vec<Dim> extent() const { return hi - lo; }
  Vec<Dim> center() const { return 0.5 * (lo + hi); }
  double volume() const { return extent().prod(); }
  double diameter() const { return extent().norm(); }
};

// ---------------------------------------------------------------------------

/// Rows of (parameter, value) with an optional fitted log-log slope.
struct ConvergenceReport {
  std::string name;
  std::vector<std::pair<double, double>> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool passed = true;
  std::string detail;
};

/// Least-squares slope of log(value) against log(param).
inline double report_slope(const std::vector<std::pair<double, double>>& rows) {
  if (rows.size() < 3) throw NumericError("report_slope needs at least 3 rows");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [p, v] : rows) {
    if (!(p > 0.0) || !(v > 0.0)) throw NumericError("report_slope needs positive params and values");
    const double x = std::log(p), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(rows.size());
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw NumericError("report_slope: degenerate parameter column");
  return (n * sxy - sx * sy) / den;
}

// ---------------------------------------------------------------------------

/// Runs body(i) for i in [0, n) across hardware threads. Each index is
/// handled by exactly one worker; callers write only to slot i.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(hw, n / 64 + 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(n, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Seeded generator with a portable uniform draw (the standard
/// distributions are implementation-defined, the engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rlf
