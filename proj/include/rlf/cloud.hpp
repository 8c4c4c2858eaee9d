#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "rlf/core.hpp"

namespace rlf {

/// Quadrature-weighted sample points: cell midpoints of a uniform grid of
/// `resolution` cells per axis over `box`. Weights are the cell volume, so
/// they sum to the box volume. `seed` drives deterministic subsampling.
template <int Dim>
struct PointCloud {
  Box<Dim> box;
  int resolution = 0;
  std::uint64_t seed = 0;
  std::vector<Vec<Dim>> points;
  std::vector<double> weights;

  static PointCloud midpoint(const Box<Dim>& box, int resolution, std::uint64_t seed = 0) {
    if (resolution < 1) throw ParameterError("cloud resolution must be at least 1");
    if (!((box.extent().array() > 0.0).all())) throw ParameterError("cloud box must have positive extent");
    PointCloud c;
    c.box = box;
    c.resolution = resolution;
    c.seed = seed;
    const Vec<Dim> cell = box.extent() / resolution;
    const double w = cell.prod();
    std::size_t n = 1;
    for (int d = 0; d < Dim; ++d) n *= static_cast<std::size_t>(resolution);
    c.points.reserve(n);
    c.weights.assign(n, w);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t r = k;
      Vec<Dim> z;
      for (int d = Dim - 1; d >= 0; --d) {
        z[d] = box.lo[d] + (static_cast<double>(r % resolution) + 0.5) * cell[d];
        r /= resolution;
      }
      c.points.push_back(z);
    }
    return c;
  }

  std::size_t size() const { return points.size(); }

  /// Same box at half the resolution; used for quadrature error estimates.
  PointCloud coarsened() const { return midpoint(box, std::max(1, resolution / 2), seed); }

  /// The lattice moved by half a cell along every axis; points past the
  /// upper faces are kept, so integrands supported inside the box see the
  /// same rule with a different phase.
  PointCloud half_shifted() const {
    PointCloud out = *this;
    const Vec<Dim> shift = 0.5 * box.extent() / resolution;
    for (auto& p : out.points) p += shift;
    return out;
  }

  /// The sub-cloud of points inside the closed ball B_r(c), weights kept.
  PointCloud restricted_to_ball(const Vec<Dim>& c, double r) const {
    PointCloud out;
    out.box = box;
    out.resolution = resolution;
    out.seed = seed;
    for (std::size_t i = 0; i < size(); ++i) {
      if ((points[i] - c).norm() <= r) {
        out.points.push_back(points[i]);
        out.weights.push_back(weights[i]);
      }
    }
    return out;
  }

  /// n distinct points drawn deterministically from `seed`.
  std::vector<Vec<Dim>> subsample(std::size_t n) const {
    std::vector<std::size_t> idx(size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    n = std::min(n, idx.size());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(idx.size() - i));
      std::swap(idx[i], idx[std::min(j, idx.size() - 1)]);
    }
    std::vector<Vec<Dim>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(points[idx[i]]);
    return out;
  }
};

/// Sum of weights * f(points).
template <int Dim, class F>
double integrate(F&& f, const PointCloud<Dim>& cloud) {
  double acc = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double v = f(cloud.points[i]);
    if (!std::isfinite(v)) throw NumericError("integrate: non-finite integrand value");
    acc += cloud.weights[i] * v;
  }
  return acc;
}

struct QuadratureValue {
  double value;
  double error_estimate;
};

/// Integral on the cloud plus |difference| to the half-resolution cloud.
template <int Dim, class F>
QuadratureValue integrate_with_estimate(F&& f, const PointCloud<Dim>& cloud) {
  const double fine = integrate(f, cloud);
  const double coarse = integrate(f, cloud.coarsened());
  return {fine, std::abs(fine - coarse)};
}

/// Weighted L^q norm (sum w |v|^q)^(1/q) of per-point vectors.
template <int Dim>
double lq_norm(const std::vector<Vec<Dim>>& values, const std::vector<double>& weights, double q) {
  if (!(q >= 1.0)) throw ParameterError("norm exponent must be at least 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * std::pow(values[i].norm(), q);
  return std::pow(acc, 1.0 / q);
}

}  // namespace rlf
