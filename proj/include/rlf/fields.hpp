#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rlf/core.hpp"

namespace rlf {

// ---------------------------------------------------------------------------
// Scalar building blocks

/// Standard bump exp(-1/(1-u^2)) on |u| < 1, zero outside.
inline double bump_profile(double u) {
  const double a = 1.0 - u * u;
  return a > 0.0 ? std::exp(-1.0 / a) : 0.0;
}

/// bump_profile'(u) / u, finite at u = 0.
inline double bump_profile_dlog(double u) {
  const double a = 1.0 - u * u;
  return a > 0.0 ? std::exp(-1.0 / a) * (-2.0 / (a * a)) : 0.0;
}

namespace detail {
inline double step_kernel(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }
inline double step_kernel_d(double u) { return u > 0.0 ? std::exp(-1.0 / u) / (u * u) : 0.0; }
}  // namespace detail

/// Smooth radial cutoff: 1 on [0, R], 0 on [2R, inf), C-infinity in between.
inline double cutoff(double r, double radius) {
  if (r <= radius) return 1.0;
  if (r >= 2.0 * radius) return 0.0;
  const double u = (r - radius) / radius;
  const double a = detail::step_kernel(1.0 - u), b = detail::step_kernel(u);
  return a / (a + b);
}

inline double cutoff_derivative(double r, double radius) {
  if (r <= radius || r >= 2.0 * radius) return 0.0;
  const double u = (r - radius) / radius;
  const double a = detail::step_kernel(1.0 - u), b = detail::step_kernel(u);
  const double da = -detail::step_kernel_d(1.0 - u), db = detail::step_kernel_d(u);
  return ((da * (a + b) - a * (da + db)) / ((a + b) * (a + b))) / radius;
}

// ---------------------------------------------------------------------------

/// A vector field on R^Dim with optional analytic derivatives.
///
/// `domain` is the box where the field is exercised: `sup_norm` and
/// `div_sup` bound |eval| and |div| there, and flows must stay inside it.
/// `holder` is the Hoelder exponent of the field for sobolev-tagged fields
/// (1 otherwise); it sets the convergence order expected from the integrator.
template <int Dim>
struct VecField {
  static_assert(Dim >= 1);
  using Point = Vec<Dim>;
  using Jacobian = Mat<Dim>;

  std::string name;
  std::function<Point(const Point&)> eval;
  std::function<Jacobian(const Point&)> jac;  // row i = gradient of component i
  std::function<double(const Point&)> div;
  double sup_norm = 0.0;
  double div_sup = 0.0;
  Regularity regularity = Regularity::smooth;
  double holder = 1.0;
  Box<Dim> domain = Box<Dim>::cube(1.0);

  Point operator()(const Point& z) const { return eval(z); }
  bool has_jacobian() const { return static_cast<bool>(jac); }
  bool has_divergence() const { return static_cast<bool>(div) || has_jacobian(); }

  double divergence(const Point& z) const {
    if (div) return div(z);
    if (jac) return jac(z).trace();
    throw CapabilityError("field '" + name + "' has no divergence");
  }

  static constexpr int dim() { return Dim; }
};

/// Order of accuracy the fixed-step integrator can deliver on this field.
template <int Dim>
double integrator_order(const VecField<Dim>& f) {
  switch (f.regularity) {
    case Regularity::smooth: return 4.0;
    case Regularity::lipschitz: return 2.0;
    case Regularity::sobolev: return 1.0 + f.holder;
  }
  return 1.0;
}

/// Central-difference Jacobian, entry (i,j) = (F_i(z+h e_j) - F_i(z-h e_j)) / 2h.
template <int Dim>
Mat<Dim> fd_jacobian(const VecField<Dim>& f, const Vec<Dim>& z, double h) {
  if (!(h > 0.0)) throw ParameterError("fd_jacobian: step must be positive");
  if (!f.domain.contains_with_margin(z, h))
    throw BoundaryMarginError("fd_jacobian: point closer than h to the boundary of the test box");
  Mat<Dim> J;
  for (int j = 0; j < Dim; ++j) {
    Vec<Dim> zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    J.col(j) = (f.eval(zp) - f.eval(zm)) / (2.0 * h);
  }
  return J;
}

template <int Dim>
double fd_divergence(const VecField<Dim>& f, const Vec<Dim>& z, double h) {
  return fd_jacobian(f, z, h).trace();
}

/// Analytic Jacobian when present, otherwise central differences with step h.
template <int Dim>
Mat<Dim> jacobian(const VecField<Dim>& f, const Vec<Dim>& z, double h = 1e-4) {
  return f.has_jacobian() ? f.jac(z) : fd_jacobian(f, z, h);
}

template <int Dim>
double divergence(const VecField<Dim>& f, const Vec<Dim>& z, double h = 1e-4) {
  return f.has_divergence() ? f.divergence(z) : fd_divergence(f, z, h);
}

/// Richardson consistency of the central-difference Jacobian: max entry
/// difference between steps h and h/2.
template <int Dim>
double fd_jacobian_consistency(const VecField<Dim>& f, const Vec<Dim>& z, double h) {
  return (fd_jacobian(f, z, h) - fd_jacobian(f, z, 0.5 * h)).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Field constructors

template <int Dim>
VecField<Dim> constant_field(const Vec<Dim>& c, const Box<Dim>& domain, std::string name = "constant") {
  VecField<Dim> f;
  f.name = std::move(name);
  f.eval = [c](const Vec<Dim>&) { return c; };
  f.jac = [](const Vec<Dim>&) { return Mat<Dim>::Zero().eval(); };
  f.div = [](const Vec<Dim>&) { return 0.0; };
  f.sup_norm = c.norm();
  f.div_sup = 0.0;
  f.domain = domain;
  return f;
}

/// z -> cutoff(|z|, r_cut) A z. Exactly linear on the ball of radius r_cut.
template <int Dim>
VecField<Dim> linear_field(const Mat<Dim>& A, double r_cut, const Box<Dim>& domain,
                           std::string name = "linear") {
  if (!(r_cut > 0.0)) throw ParameterError("linear_field: r_cut must be positive");
  VecField<Dim> f;
  f.name = std::move(name);
  f.eval = [A, r_cut](const Vec<Dim>& z) -> Vec<Dim> {
    const double r = z.norm();
    if (r <= r_cut) return A * z;
    return cutoff(r, r_cut) * (A * z);
  };
  f.jac = [A, r_cut](const Vec<Dim>& z) -> Mat<Dim> {
    const double r = z.norm();
    if (r <= r_cut) return A;
    const Vec<Dim> grad = cutoff_derivative(r, r_cut) / r * z;
    return cutoff(r, r_cut) * A + (A * z) * grad.transpose();
  };
  f.div = [A, r_cut](const Vec<Dim>& z) -> double {
    const double r = z.norm();
    if (r <= r_cut) return A.trace();
    const Vec<Dim> grad = cutoff_derivative(r, r_cut) / r * z;
    return cutoff(r, r_cut) * A.trace() + grad.dot(A * z);
  };
  // |Az| is convex, so its maximum over the box sits at a corner.
  double sup = 0.0;
  bool inside = true;
  for (int mask = 0; mask < (1 << Dim); ++mask) {
    Vec<Dim> corner;
    for (int i = 0; i < Dim; ++i) corner[i] = (mask >> i) & 1 ? domain.hi[i] : domain.lo[i];
    sup = std::max(sup, (A * corner).norm());
    inside = inside && corner.norm() <= r_cut;
  }
  if (inside) {
    f.sup_norm = sup;
    f.div_sup = std::abs(A.trace());
  } else {
    // Outside the exact region fall back to crude global bounds.
    const double op = A.operatorNorm();
    f.sup_norm = 2.0 * r_cut * op;
    f.div_sup = std::abs(A.trace()) + 2.0 * r_cut * op * 4.0 / r_cut;
  }
  f.domain = domain;
  return f;
}

/// Scales a field by a constant; derivatives follow.
template <int Dim>
VecField<Dim> scaled(const VecField<Dim>& f, double a) {
  VecField<Dim> g = f;
  g.name = f.name + "*" + std::to_string(a);
  g.eval = [e = f.eval, a](const Vec<Dim>& z) -> Vec<Dim> { return a * e(z); };
  if (f.jac) g.jac = [j = f.jac, a](const Vec<Dim>& z) -> Mat<Dim> { return a * j(z); };
  if (f.div) g.div = [d = f.div, a](const Vec<Dim>& z) { return a * d(z); };
  g.sup_norm = std::abs(a) * f.sup_norm;
  g.div_sup = std::abs(a) * f.div_sup;
  return g;
}

// ---------------------------------------------------------------------------
// Mollification

/// rho_eps(u) = profile(|u|/eps) / (normalization * eps^Dim).
template <int Dim>
struct MollifierKernel {
  double epsilon;
  double normalization;
  bool reflected = false;

  explicit MollifierKernel(double eps) : epsilon(eps), normalization(unit_mass()) {
    if (!(eps > 0.0)) throw ParameterError("mollifier scale must be positive");
  }

  /// Integral of the unscaled profile over R^Dim, via the radial reduction.
  static double unit_mass() {
    static const double mass = [] {
      const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * Dim) / boost::math::tgamma(0.5 * Dim);
      auto radial = [](double r) { return bump_profile(r) * std::pow(r, Dim - 1); };
      return sphere * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(radial, 0.0, 1.0, 15, 1e-14);
    }();
    return mass;
  }

  MollifierKernel reflect() const {
    MollifierKernel k = *this;
    k.reflected = !reflected;
    return k;
  }

  double operator()(const Vec<Dim>& u) const {
    const Vec<Dim> v = reflected ? Vec<Dim>(-u) : u;
    return bump_profile(v.norm() / epsilon) / (normalization * std::pow(epsilon, Dim));
  }

  Vec<Dim> gradient(const Vec<Dim>& u) const {
    const Vec<Dim> v = reflected ? Vec<Dim>(-u) : u;
    const double s = v.norm() / epsilon;
    const Vec<Dim> g = bump_profile_dlog(s) / (epsilon * epsilon) * v / (normalization * std::pow(epsilon, Dim));
    return reflected ? Vec<Dim>(-g) : g;
  }
};

/// Lattice sampling of a kernel and of its analytic gradient at offsets
/// k * spacing. The weights are renormalized so that the discrete mass is
/// exactly 1 and the discrete first moment of each derivative kernel is
/// exactly -1; this keeps constants and linear functions exact.
template <int Dim>
struct DiscreteKernel {
  double spacing = 0.0;
  std::vector<Eigen::Array<int, Dim, 1>> steps;
  std::vector<Vec<Dim>> offsets;
  std::vector<double> weights;
  std::vector<Vec<Dim>> gradient_weights;

  DiscreteKernel(const MollifierKernel<Dim>& k, double h) : spacing(h) {
    if (!(k.epsilon >= 2.0 * h))
      throw ResolutionError("kernel under-resolved: epsilon must be at least twice the sampling step");
    const int m = static_cast<int>(std::floor(k.epsilon / h));
    const double cell = std::pow(h, Dim);
    Eigen::Array<int, Dim, 1> idx = Eigen::Array<int, Dim, 1>::Constant(-m);
    double mass = 0.0;
    Vec<Dim> moment = Vec<Dim>::Zero();
    while (true) {
      const Vec<Dim> y = idx.template cast<double>().matrix() * h;
      if (y.norm() < k.epsilon) {
        const double w = k(y) * cell;
        const Vec<Dim> g = k.gradient(y) * cell;
        steps.push_back(idx);
        offsets.push_back(y);
        weights.push_back(w);
        gradient_weights.push_back(g);
        mass += w;
        moment -= g.cwiseProduct(y);
      }
      int d = Dim - 1;
      while (d >= 0 && idx[d] == m) idx[d--] = -m;
      if (d < 0) break;
      ++idx[d];
    }
    for (auto& w : weights) w /= mass;
    for (auto& g : gradient_weights) g = g.cwiseQuotient(moment);
  }

  std::size_t size() const { return offsets.size(); }
};

/// The mollified field F * rho_eps, evaluated by lattice quadrature with
/// `nodes_per_radius` samples across the kernel radius. Derivatives use the
/// analytic kernel gradient.
template <int Dim>
VecField<Dim> mollified(const VecField<Dim>& f, const MollifierKernel<Dim>& k, int nodes_per_radius = 4) {
  auto dk = std::make_shared<const DiscreteKernel<Dim>>(k, k.epsilon / nodes_per_radius);
  VecField<Dim> g;
  g.name = f.name + "_eps" + std::to_string(k.epsilon);
  g.eval = [e = f.eval, dk](const Vec<Dim>& z) -> Vec<Dim> {
    Vec<Dim> acc = Vec<Dim>::Zero();
    for (std::size_t i = 0; i < dk->size(); ++i) acc += dk->weights[i] * e(z - dk->offsets[i]);
    return acc;
  };
  g.jac = [e = f.eval, dk](const Vec<Dim>& z) -> Mat<Dim> {
    Mat<Dim> acc = Mat<Dim>::Zero();
    for (std::size_t i = 0; i < dk->size(); ++i) acc += e(z - dk->offsets[i]) * dk->gradient_weights[i].transpose();
    return acc;
  };
  g.sup_norm = f.sup_norm;
  g.div_sup = f.div_sup;
  g.regularity = Regularity::smooth;
  g.holder = 1.0;
  g.domain = f.domain;
  return g;
}

// ---------------------------------------------------------------------------

/// Vector samples on a uniform lattice covering `box`, row-major (last axis
/// fastest).
template <int Dim>
struct GridField {
  using Index = Eigen::Array<int, Dim, 1>;

  Box<Dim> box;
  double spacing = 0.0;
  Index counts;
  std::vector<Vec<Dim>> samples;

  GridField() = default;

  GridField(const Box<Dim>& b, double h) : box(b), spacing(h) {
    if (!(h > 0.0)) throw ParameterError("grid spacing must be positive");
    for (int i = 0; i < Dim; ++i) {
      const double n = b.extent()[i] / h;
      const double r = std::round(n);
      if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, n))
        throw ParameterError("grid extent must be a positive multiple of the spacing");
      counts[i] = static_cast<int>(r) + 1;
    }
    samples.assign(static_cast<std::size_t>(counts.prod()), Vec<Dim>::Zero());
  }

  static GridField sample(const VecField<Dim>& f, const Box<Dim>& b, double h) {
    GridField g(b, h);
    for (std::size_t i = 0; i < g.size(); ++i) g.samples[i] = f.eval(g.node(i));
    return g;
  }

  std::size_t size() const { return samples.size(); }

  std::size_t flat(const Index& idx) const {
    std::size_t k = 0;
    for (int d = 0; d < Dim; ++d) k = k * static_cast<std::size_t>(counts[d]) + static_cast<std::size_t>(idx[d]);
    return k;
  }

  Index multi(std::size_t k) const {
    Index idx;
    for (int d = Dim - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(k % static_cast<std::size_t>(counts[d]));
      k /= static_cast<std::size_t>(counts[d]);
    }
    return idx;
  }

  bool valid(const Index& idx) const { return (idx >= 0).all() && (idx < counts).all(); }

  Vec<Dim> node(const Index& idx) const { return box.lo + spacing * idx.template cast<double>().matrix(); }
  Vec<Dim> node(std::size_t k) const { return node(multi(k)); }

  double max_norm() const {
    double m = 0.0;
    for (const auto& v : samples) m = std::max(m, v.norm());
    return m;
  }

  /// Multilinear interpolation; z must lie in the box.
  Vec<Dim> interpolate(const Vec<Dim>& z) const {
    Index base;
    Vec<Dim> frac;
    for (int d = 0; d < Dim; ++d) {
      const double u = (z[d] - box.lo[d]) / spacing;
      int i = static_cast<int>(std::floor(u));
      i = std::clamp(i, 0, counts[d] - 2);
      base[d] = i;
      frac[d] = std::clamp(u - i, 0.0, 1.0);
    }
    Vec<Dim> acc = Vec<Dim>::Zero();
    for (int mask = 0; mask < (1 << Dim); ++mask) {
      double w = 1.0;
      Index idx = base;
      for (int d = 0; d < Dim; ++d) {
        const bool up = (mask >> d) & 1;
        idx[d] += up;
        w *= up ? frac[d] : 1.0 - frac[d];
      }
      if (w != 0.0) acc += w * samples[flat(idx)];
    }
    return acc;
  }

  /// The interpolant as a (Lipschitz) vector field on the grid box.
  VecField<Dim> as_field(std::string name = "grid") const {
    auto self = std::make_shared<const GridField>(*this);
    VecField<Dim> f;
    f.name = std::move(name);
    f.eval = [self](const Vec<Dim>& z) { return self->interpolate(z); };
    f.sup_norm = max_norm();
    f.regularity = Regularity::lipschitz;
    f.domain = box;
    return f;
  }
};

/// Discrete convolution with the scaled kernel, zero-padded outside the box.
template <int Dim>
GridField<Dim> mollify(const GridField<Dim>& f, const MollifierKernel<Dim>& k) {
  const DiscreteKernel<Dim> dk(k, f.spacing);
  GridField<Dim> out = f;
  parallel_for(f.size(), [&](std::size_t n) {
    const auto idx = f.multi(n);
    Vec<Dim> acc = Vec<Dim>::Zero();
    for (std::size_t i = 0; i < dk.size(); ++i) {
      const auto src = (idx - dk.steps[i]).eval();
      if (f.valid(src)) acc += dk.weights[i] * f.samples[f.flat(src)];
    }
    out.samples[n] = acc;
  });
  return out;
}

}  // namespace rlf
