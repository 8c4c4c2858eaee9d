#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "rlf/cloud.hpp"
#include "rlf/fields.hpp"

namespace rlf {

/// Fixed-step classical RK4 configuration. A nonempty `eps_schedule`
/// selects the mollify-then-flow route; the smallest scale is the one used.
struct FlowConfig {
  double dt = 1e-3;
  std::vector<double> eps_schedule;
  int kernel_nodes = 4;  // lattice samples per kernel radius for on-the-fly mollification

  void validate() const {
    if (!(dt > 0.0)) throw ParameterError("flow.dt must be positive");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
      if (!(eps_schedule[i] > 0.0)) throw ParameterError("flow.eps_schedule entries must be positive");
      if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1]))
        throw ParameterError("flow.eps_schedule must be strictly decreasing");
    }
    if (kernel_nodes < 2) throw ParameterError("flow.kernel_nodes must be at least 2");
  }

  FlowConfig raw() const { return FlowConfig{dt, {}, kernel_nodes}; }
};

template <int Dim>
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec<Dim>> states;
  std::vector<double> density;     // empty when not tracked
  std::vector<Mat<Dim>> jacobian;  // empty when not tracked

  std::size_t size() const { return times.size(); }
  bool has_density() const { return !density.empty(); }
  bool has_jacobian() const { return !jacobian.empty(); }
};

struct DensityReport {
  double t_max = 0.0;
  double xi_min = 0.0;
  double xi_max = 0.0;
  double bound = 1.0;
  double lipschitz_estimate = 0.0;
};

/// Position error budget of the integrator over a path of time length |t|:
/// 50 dt^order |t| scale.
inline double integrator_budget(double dt, double order, double t, double scale) {
  return 50.0 * std::pow(dt, order) * std::abs(t) * scale;
}

namespace detail {

inline std::size_t step_count(double t, double dt) {
  const double ratio = std::abs(t) / dt;
  if (ratio > 1e8) throw ParameterError("flow: |t|/dt exceeds 1e8 steps");
  return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-9)));
}

template <int Dim>
bool inside(const Box<Dim>& box, const Vec<Dim>& z) {
  return z.allFinite() && box.contains(z);
}

/// Kahan-compensated running sum: a translation flow lands on z + t up to
/// one final rounding instead of accumulating one rounding per step.
template <int Dim>
struct Compensated {
  Vec<Dim> value;
  Vec<Dim> carry = Vec<Dim>::Zero();
  explicit Compensated(const Vec<Dim>& v) : value(v) {}
  void add(const Vec<Dim>& inc) {
    const Vec<Dim> y = inc - carry;
    const Vec<Dim> t = value + y;
    carry = (t - value) - y;
    value = t;
  }
};

}  // namespace detail

/// The field the integrator actually sees under `cfg`.
template <int Dim>
VecField<Dim> effective_field(const VecField<Dim>& f, const FlowConfig& cfg) {
  if (cfg.eps_schedule.empty()) return f;
  return mollified(f, MollifierKernel<Dim>(cfg.eps_schedule.back()), cfg.kernel_nodes);
}

/// RK4 from 0 to t with ceil(|t|/dt) equal steps; negative t runs the same
/// scheme on the negated field.
template <int Dim>
Vec<Dim> integrate_flow(const VecField<Dim>& f, double dt, Vec<Dim> z, double t) {
  if (t == 0.0) return z;
  const std::size_t n = detail::step_count(t, dt);
  const double h = t / static_cast<double>(n);
  detail::Compensated<Dim> acc(z);
  for (std::size_t k = 0; k < n; ++k) {
    z = acc.value;
    const Vec<Dim> k1 = f.eval(z);
    const Vec<Dim> k2 = f.eval(z + 0.5 * h * k1);
    const Vec<Dim> k3 = f.eval(z + 0.5 * h * k2);
    const Vec<Dim> k4 = f.eval(z + h * k3);
    acc.add(h * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0));
    if (!detail::inside(f.domain, acc.value)) throw EscapeError(static_cast<double>(k + 1) * h);
  }
  return acc.value;
}

template <int Dim>
Vec<Dim> flow_point(const VecField<Dim>& f, const FlowConfig& cfg, const Vec<Dim>& z, double t) {
  cfg.validate();
  if (cfg.eps_schedule.empty()) return integrate_flow(f, cfg.dt, z, t);
  return integrate_flow(effective_field(f, cfg), cfg.dt, z, t);
}

/// Flow of z at every scale of the schedule, largest scale first.
template <int Dim>
std::vector<Vec<Dim>> flow_point_scales(const VecField<Dim>& f, const FlowConfig& cfg, const Vec<Dim>& z, double t) {
  cfg.validate();
  std::vector<Vec<Dim>> out;
  for (double eps : cfg.eps_schedule)
    out.push_back(integrate_flow(mollified(f, MollifierKernel<Dim>(eps), cfg.kernel_nodes), cfg.dt, z, t));
  return out;
}

/// Applies the flow to each point. Escapes are reported with the smallest
/// offending index.
template <int Dim>
std::vector<Vec<Dim>> flow_points(const VecField<Dim>& f, const FlowConfig& cfg, const std::vector<Vec<Dim>>& pts,
                                  double t) {
  cfg.validate();
  const VecField<Dim> g = effective_field(f, cfg);
  std::vector<Vec<Dim>> out(pts.size());
  std::vector<double> escaped(pts.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(pts.size(), [&](std::size_t i) {
    try {
      out[i] = integrate_flow(g, cfg.dt, pts[i], t);
    } catch (const EscapeError& e) {
      escaped[i] = e.exit_time();
    }
  });
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!std::isnan(escaped[i])) throw EscapeError(escaped[i], static_cast<std::ptrdiff_t>(i));
  return out;
}

template <int Dim>
PointCloud<Dim> flow_cloud(const VecField<Dim>& f, const FlowConfig& cfg, const PointCloud<Dim>& cloud, double t) {
  PointCloud<Dim> out = cloud;
  out.points = flow_points(f, cfg, cloud.points, t);
  return out;
}

/// Weighted L^q norm over the cloud of Phi_t(Phi_s(z)) - Phi_{t+s}(z).
template <int Dim>
double group_defect(const VecField<Dim>& f, const FlowConfig& cfg, const PointCloud<Dim>& cloud, double t, double s,
                    double q) {
  const auto ps = flow_points(f, cfg, cloud.points, s);
  const auto pts = flow_points(f, cfg, ps, t);
  const auto direct = flow_points(f, cfg, cloud.points, t + s);
  std::vector<Vec<Dim>> diff(cloud.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = pts[i] - direct[i];
  return lq_norm(diff, cloud.weights, q);
}

/// Integrates the flow together with the Liouville density
/// d/dt xi = div(F)(Phi_t) xi, xi(0) = 1, and, when the field has an
/// analytic Jacobian, the variational equation d/dt J = DF(Phi_t) J.
/// With `fd_fallback` the divergence may come from central differences.
template <int Dim>
Trajectory<Dim> jacobian_density(const VecField<Dim>& field, const FlowConfig& cfg, const Vec<Dim>& z0, double t_max,
                                 bool fd_fallback = false, double fd_step = 1e-4) {
  cfg.validate();
  if (!std::isfinite(t_max)) throw ParameterError("jacobian_density: t_max must be finite");
  const VecField<Dim> f = effective_field(field, cfg);
  if (!f.has_divergence() && !fd_fallback)
    throw CapabilityError("jacobian_density: field '" + f.name + "' has no divergence");
  const bool track_j = f.has_jacobian();
  auto div = [&](const Vec<Dim>& z) { return f.has_divergence() ? f.divergence(z) : fd_divergence(f, z, fd_step); };

  Trajectory<Dim> tr;
  Vec<Dim> z = z0;
  double xi = 1.0;
  Mat<Dim> J = Mat<Dim>::Identity();
  tr.times.push_back(0.0);
  tr.states.push_back(z);
  tr.density.push_back(xi);
  if (track_j) tr.jacobian.push_back(J);
  if (t_max == 0.0) return tr;

  const std::size_t n = detail::step_count(t_max, cfg.dt);
  const double h = t_max / static_cast<double>(n);
  detail::Compensated<Dim> zacc(z);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec<Dim> z1 = z;
    const Vec<Dim> a1 = f.eval(z1);
    const Vec<Dim> z2 = z + 0.5 * h * a1;
    const Vec<Dim> a2 = f.eval(z2);
    const Vec<Dim> z3 = z + 0.5 * h * a2;
    const Vec<Dim> a3 = f.eval(z3);
    const Vec<Dim> z4 = z + h * a3;
    const Vec<Dim> a4 = f.eval(z4);

    const double d1 = div(z1), d2 = div(z2), d3 = div(z3), d4 = div(z4);
    const double x1 = d1 * xi;
    const double x2 = d2 * (xi + 0.5 * h * x1);
    const double x3 = d3 * (xi + 0.5 * h * x2);
    const double x4 = d4 * (xi + h * x3);
    xi += (h / 6.0) * (x1 + 2.0 * x2 + 2.0 * x3 + x4);

    if (track_j) {
      const Mat<Dim> j1 = f.jac(z1) * J;
      const Mat<Dim> j2 = f.jac(z2) * (J + 0.5 * h * j1);
      const Mat<Dim> j3 = f.jac(z3) * (J + 0.5 * h * j2);
      const Mat<Dim> j4 = f.jac(z4) * (J + h * j3);
      J += (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
    }

    zacc.add(h * ((a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0));
    z = zacc.value;
    const double t = static_cast<double>(k + 1) * h;
    if (!detail::inside(f.domain, z)) throw EscapeError(t);
    tr.times.push_back(t);
    tr.states.push_back(z);
    tr.density.push_back(xi);
    if (track_j) tr.jacobian.push_back(J);
  }
  return tr;
}

/// Checks exp(-T d)(1-tol) <= xi(t) <= exp(T d)(1+tol) for |t| <= T and the
/// discrete time-Lipschitz bound d exp(T d)(1+tol), d = div_sup.
template <int Dim>
DensityReport density_bounds_check(const Trajectory<Dim>& tr, double div_sup, double T, double tol = 1e-6) {
  if (!tr.has_density()) throw CapabilityError("density_bounds_check: trajectory has no density track");
  DensityReport rep;
  rep.t_max = T;
  rep.bound = std::exp(T * div_sup);
  const double lo = std::exp(-T * div_sup) * (1.0 - tol);
  const double hi = rep.bound * (1.0 + tol);
  const double lip_bound = div_sup * rep.bound * (1.0 + tol);
  const double t_lim = T * (1.0 + 1e-12);

  rep.xi_min = std::numeric_limits<double>::infinity();
  rep.xi_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    if (std::abs(tr.times[k]) > t_lim) continue;
    const double xi = tr.density[k];
    if (tr.times[k] == 0.0 && xi != 1.0) throw BoundViolationError("density at t=0 differs from 1", 0.0, xi, 1.0);
    if (xi < lo) throw BoundViolationError("density below lower bound", tr.times[k], xi, lo);
    if (xi > hi) throw BoundViolationError("density above upper bound", tr.times[k], xi, hi);
    rep.xi_min = std::min(rep.xi_min, xi);
    rep.xi_max = std::max(rep.xi_max, xi);
    if (k > 0 && std::abs(tr.times[k - 1]) <= t_lim) {
      const double lip = std::abs(xi - tr.density[k - 1]) / std::abs(tr.times[k] - tr.times[k - 1]);
      if (lip > lip_bound) throw BoundViolationError("density time-Lipschitz bound", tr.times[k], lip, lip_bound);
      rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, lip);
    }
  }
  return rep;
}

/// Stability of mollify-then-flow: rows (eps, L^1 cloud distance between the
/// flow at scale eps and at the smallest scale), largest eps first. Passes
/// when the distances are nonincreasing up to a 10% slack.
template <int Dim>
ConvergenceReport stability_study(const GridField<Dim>& rough, const FlowConfig& cfg, const PointCloud<Dim>& cloud,
                                  double t) {
  cfg.validate();
  if (cfg.eps_schedule.empty()) throw ParameterError("stability_study needs a nonempty eps_schedule");
  std::vector<std::vector<Vec<Dim>>> images;
  for (double eps : cfg.eps_schedule) {
    const VecField<Dim> f = mollify(rough, MollifierKernel<Dim>(eps)).as_field("mollified");
    images.push_back(flow_points(f, cfg.raw(), cloud.points, t));
  }
  ConvergenceReport rep;
  rep.name = "stability";
  const auto& finest = images.back();
  for (std::size_t k = 0; k < images.size(); ++k) {
    std::vector<Vec<Dim>> diff(cloud.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = images[k][i] - finest[i];
    rep.rows.emplace_back(cfg.eps_schedule[k], lq_norm(diff, cloud.weights, 1.0));
  }
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    if (rep.rows[k].second > 1.1 * rep.rows[k - 1].second + 1e-14) {
      rep.passed = false;
      rep.detail = "distance increased at eps=" + std::to_string(rep.rows[k].first);
    }
  }
  return rep;
}

}  // namespace rlf
