#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rlf/fields.hpp"

namespace rlf {

using Vec2 = Vec<2>;
using Mat2 = Mat<2>;

struct PresetParams {
  double alpha = 0.5;        // Hoelder exponent of the non-Lipschitz shear
  double r_cut = 10.0;       // radius where the smooth cutoff starts
  double lambda_amp = 0.25;  // amplitude of lambda(w) = 1 + amp*sin(w)
  double dilation = 0.3;     // B = dilation * I for linear_commuting
  double half_width = 4.0;   // domain box is [-half_width, half_width]^2
};

/// A pair of 2D fields with everything known about them in closed form.
/// Flow maps may be empty; where present they are exact on the domain box.
struct PresetPair {
  std::string name;
  VecField<2> x;
  VecField<2> y;
  bool commuting = true;
  std::function<Vec2(const Vec2&)> bracket;
  std::function<Vec2(const Vec2&, double)> flow_x;
  std::function<Vec2(const Vec2&, double)> flow_y;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"constants",        "linear_commuting",
                                                 "nilpotent_shears", "rotation_dilation_cutoff",
                                                 "hamiltonian_pair", "nonlipschitz_shear_pair"};
  return names;
}

/// Parameter-range diagnostics for a preset; empty when valid.
inline std::vector<std::string> preset_diagnostics(const std::string& name, const PresetParams& p) {
  std::vector<std::string> out;
  bool known = false;
  for (const auto& n : preset_names()) known = known || n == name;
  if (!known) out.push_back("preset.name: unknown preset '" + name + "'");
  if (!(p.r_cut > 0.0)) out.push_back("preset.params.r_cut: must be positive");
  if (!(p.half_width > 0.0)) out.push_back("preset.params.half_width: must be positive");
  if (name == "nonlipschitz_shear_pair") {
    if (!(p.alpha > 0.0 && p.alpha < 1.0)) out.push_back("preset.params.alpha: must lie in (0, 1)");
    if (!(std::abs(p.lambda_amp) < 1.0)) out.push_back("preset.params.lambda_amp: |amp| must be below 1");
  }
  return out;
}

namespace detail {

inline Mat2 rotation(double angle) {
  Mat2 r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

inline Mat2 perp() {
  Mat2 j;
  j << 0.0, -1.0, 1.0, 0.0;
  return j;
}

/// f(|z|) J z for a radial profile f with derivative df; divergence free.
inline VecField<2> swirl(std::function<double(double)> f, std::function<double(double)> df, double sup_norm,
                         const Box<2>& domain, std::string name) {
  VecField<2> v;
  v.name = std::move(name);
  v.eval = [f](const Vec2& z) -> Vec2 { return f(z.norm()) * Vec2(-z[1], z[0]); };
  v.jac = [f, df](const Vec2& z) -> Mat2 {
    const double r = z.norm();
    const Vec2 jz(-z[1], z[0]);
    Mat2 m = f(r) * perp();
    if (r > 0.0) m += jz * (df(r) / r * z).transpose();
    return m;
  };
  v.div = [](const Vec2&) { return 0.0; };
  v.sup_norm = sup_norm;
  v.div_sup = 0.0;
  v.domain = domain;
  return v;
}

inline Vec2 bracket_from_jacobians(const VecField<2>& x, const VecField<2>& y, const Vec2& z) {
  return y.jac(z) * x.eval(z) - x.jac(z) * y.eval(z);
}

}  // namespace detail

/// The 1D profile g(x) = |x|^alpha cutoff(|x|) of the non-Lipschitz shear
/// and its antiderivative G with G(0) = 0.
struct ShearProfile {
  double alpha;
  double r_cut;

  double g(double x) const { return std::pow(std::abs(x), alpha) * cutoff(std::abs(x), r_cut); }

  /// Classical derivative for x != 0; the singular line x = 0 maps to 0.
  double dg(double x) const {
    const double a = std::abs(x);
    if (a == 0.0) return 0.0;
    const double s = x > 0.0 ? 1.0 : -1.0;
    return s * (alpha * std::pow(a, alpha - 1.0) * cutoff(a, r_cut) + std::pow(a, alpha) * cutoff_derivative(a, r_cut));
  }

  double G(double x) const {
    const double a = std::abs(x);
    const double s = x >= 0.0 ? 1.0 : -1.0;
    if (a <= r_cut) return s * std::pow(a, alpha + 1.0) / (alpha + 1.0);
    const double tail = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [this](double u) { return g(u); }, r_cut, std::min(a, 2.0 * r_cut), 10, 1e-13);
    return s * (std::pow(r_cut, alpha + 1.0) / (alpha + 1.0) + tail);
  }
};

/// Builds one of the named preset pairs.
inline PresetPair preset_pair(const std::string& name, const PresetParams& p = {}) {
  {
    bool known = false;
    for (const auto& n : preset_names()) known = known || n == name;
    if (!known) throw UnknownPresetError("unknown preset '" + name + "'");
  }
  const auto diags = preset_diagnostics(name, p);
  if (!diags.empty()) throw ParameterError(diags.front());

  const Box<2> box = Box<2>::cube(p.half_width);
  const double corner = std::sqrt(2.0) * p.half_width;
  const double rc = p.r_cut;
  PresetPair out;
  out.name = name;

  if (name == "constants") {
    out.x = constant_field<2>(Vec2(1.0, 0.0), box, "e1");
    out.y = constant_field<2>(Vec2(0.0, 1.0), box, "e2");
    out.bracket = [](const Vec2&) { return Vec2::Zero().eval(); };
    out.flow_x = [](const Vec2& z, double t) -> Vec2 { return z + Vec2(t, 0.0); };
    out.flow_y = [](const Vec2& z, double s) -> Vec2 { return z + Vec2(0.0, s); };
  } else if (name == "linear_commuting") {
    // A = a I + b J (spiral), B = beta I: AB = BA.
    const double a = 0.2, b = 1.0, beta = p.dilation;
    Mat2 A = a * Mat2::Identity() + b * detail::perp();
    out.x = linear_field<2>(A, rc, box, "spiral");
    out.y = linear_field<2>(beta * Mat2::Identity(), rc, box, "dilation");
    out.bracket = [x = out.x, y = out.y](const Vec2& z) { return detail::bracket_from_jacobians(x, y, z); };
    out.flow_x = [a, b](const Vec2& z, double t) -> Vec2 { return std::exp(a * t) * (detail::rotation(b * t) * z); };
    out.flow_y = [beta](const Vec2& z, double s) -> Vec2 { return std::exp(beta * s) * z; };
  } else if (name == "nilpotent_shears") {
    Mat2 A, B;
    A << 0.0, 1.0, 0.0, 0.0;
    B << 0.0, 0.0, 1.0, 0.0;
    out.commuting = false;
    out.x = linear_field<2>(A, rc, box, "shear_up");
    out.y = linear_field<2>(B, rc, box, "shear_down");
    out.bracket = [A, B](const Vec2& z) -> Vec2 { return (B * A - A * B) * z; };
    out.flow_x = [A](const Vec2& z, double t) -> Vec2 { return z + t * (A * z); };
    out.flow_y = [B](const Vec2& z, double s) -> Vec2 { return z + s * (B * z); };
  } else if (name == "rotation_dilation_cutoff") {
    out.x = linear_field<2>(detail::perp(), rc, box, "rotation");
    out.y = linear_field<2>(Mat2::Identity(), rc, box, "dilation");
    // [chi J z, chi z] = -chi r chi'(r) J z; zero inside r_cut.
    out.bracket = [rc](const Vec2& z) -> Vec2 {
      const double r = z.norm();
      return -cutoff(r, rc) * r * cutoff_derivative(r, rc) * Vec2(-z[1], z[0]);
    };
    out.flow_x = [rc](const Vec2& z, double t) -> Vec2 { return detail::rotation(t * cutoff(z.norm(), rc)) * z; };
    out.flow_y = [](const Vec2& z, double s) -> Vec2 { return std::exp(s) * z; };
  } else if (name == "hamiltonian_pair") {
    // H = |z|^2/2, X = grad-perp H, Y = H X, both cut off radially.
    auto fx = [rc](double r) { return cutoff(r, rc); };
    auto dfx = [rc](double r) { return cutoff_derivative(r, rc); };
    auto fy = [rc](double r) { return 0.5 * r * r * cutoff(r, rc); };
    auto dfy = [rc](double r) { return r * cutoff(r, rc) + 0.5 * r * r * cutoff_derivative(r, rc); };
    const double rmax = std::min(corner, 2.0 * rc);
    out.x = detail::swirl(fx, dfx, rmax, box, "hamiltonian_rotation");
    out.y = detail::swirl(fy, dfy, 0.5 * rmax * rmax * rmax, box, "energy_scaled_rotation");
    out.bracket = [](const Vec2&) { return Vec2::Zero().eval(); };
    out.flow_x = [fx](const Vec2& z, double t) -> Vec2 { return detail::rotation(t * fx(z.norm())) * z; };
    out.flow_y = [fy](const Vec2& z, double s) -> Vec2 { return detail::rotation(s * fy(z.norm())) * z; };
  } else {  // nonlipschitz_shear_pair
    const ShearProfile sh{p.alpha, rc};
    const double amp = p.lambda_amp;
    const double gmax = std::pow(std::min(p.half_width, 2.0 * rc), p.alpha);
    auto w = [sh](const Vec2& z) { return sh.G(z[0]) - z[1]; };
    auto lambda = [amp](double v) { return 1.0 + amp * std::sin(v); };
    auto dlambda = [amp](double v) { return amp * std::cos(v); };

    VecField<2> x;
    x.name = "shear_rough";
    x.eval = [sh](const Vec2& z) -> Vec2 { return Vec2(1.0, sh.g(z[0])); };
    x.jac = [sh](const Vec2& z) -> Mat2 {
      Mat2 m = Mat2::Zero();
      m(1, 0) = sh.dg(z[0]);
      return m;
    };
    x.div = [](const Vec2&) { return 0.0; };
    x.sup_norm = std::sqrt(1.0 + gmax * gmax);
    x.regularity = Regularity::sobolev;
    x.holder = p.alpha;
    x.domain = box;

    VecField<2> y = x;
    y.name = "shear_rough_scaled";
    y.eval = [sh, w, lambda](const Vec2& z) -> Vec2 { return lambda(w(z)) * Vec2(1.0, sh.g(z[0])); };
    y.jac = [sh, w, lambda, dlambda](const Vec2& z) -> Mat2 {
      const double wz = w(z);
      const Vec2 xz(1.0, sh.g(z[0]));
      Mat2 dx = Mat2::Zero();
      dx(1, 0) = sh.dg(z[0]);
      return lambda(wz) * dx + dlambda(wz) * xz * Vec2(sh.g(z[0]), -1.0).transpose();
    };
    y.sup_norm = (1.0 + std::abs(amp)) * x.sup_norm;

    out.x = x;
    out.y = y;
    out.bracket = [](const Vec2&) { return Vec2::Zero().eval(); };
    auto fx = [sh](const Vec2& z, double t) -> Vec2 { return Vec2(z[0] + t, z[1] + sh.G(z[0] + t) - sh.G(z[0])); };
    out.flow_x = fx;
    out.flow_y = [fx, w, lambda](const Vec2& z, double s) -> Vec2 { return fx(z, s * lambda(w(z))); };
  }
  return out;
}

}  // namespace rlf
