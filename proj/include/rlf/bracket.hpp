#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rlf/flow.hpp"

namespace rlf {

/// Sign relating the flow commutator to the bracket:
///   Phi_t^X(Phi_s^Y z) - Phi_s^Y(Phi_t^X z) = kTaylorSign * t s [X,Y](z) + o(t^2 + s^2)
/// with [X,Y] = DY X - DX Y. Fixed by the exact affine computation
/// e^{tA} e^{sB} - e^{sB} e^{tA} = ts (AB - BA) + O(3) = -ts [X,Y].
inline constexpr double kTaylorSign = -1.0;

/// [X,Y](z) = DY(z) X(z) - DX(z) Y(z). Analytic Jacobians when present,
/// central differences with step h otherwise.
template <int Dim>
Vec<Dim> lie_bracket(const VecField<Dim>& x, const VecField<Dim>& y, const Vec<Dim>& z, double h = 1e-4) {
  return jacobian(y, z, h) * x.eval(z) - jacobian(x, z, h) * y.eval(z);
}

/// Per-point commutator images Phi_t^X(Phi_s^Y z) - Phi_s^Y(Phi_t^X z).
template <int Dim>
std::vector<Vec<Dim>> commutator_images(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                                        const std::vector<Vec<Dim>>& pts, double t, double s) {
  const auto a = flow_points(x, cfg, flow_points(y, cfg, pts, s), t);
  const auto b = flow_points(y, cfg, flow_points(x, cfg, pts, t), s);
  std::vector<Vec<Dim>> d(pts.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

/// Weighted L^q cloud norm of Phi_t^X o Phi_s^Y - Phi_s^Y o Phi_t^X.
template <int Dim>
double commutativity_defect(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                            const PointCloud<Dim>& cloud, double t, double s, double q) {
  return lq_norm(commutator_images(x, y, cfg, cloud.points, t, s), cloud.weights, q);
}

/// Integrator budget for a commutator defect: 50 dt^p (|t|+|s|) diam, with
/// p the order the integrator reaches on the rougher field.
template <int Dim>
double defect_budget(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                     const PointCloud<Dim>& cloud, double t, double s) {
  const double p = std::min(integrator_order(x), integrator_order(y));
  return integrator_budget(cfg.dt, p, std::abs(t) + std::abs(s), cloud.box.diameter());
}

struct DefectRow {
  double t = 0.0, s = 0.0, q = 1.0;
  double defect = 0.0;
  double quadrature_error = 0.0;
  double budget = 0.0;
  double tolerance = 0.0;
  bool small = true;  // defect <= tolerance
};

/// Defect with its composed tolerance (integrator budget plus the change of
/// the norm between the cloud and its half-resolution version).
template <int Dim>
DefectRow commutativity_check(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                              const PointCloud<Dim>& cloud, double t, double s, double q) {
  DefectRow r;
  r.t = t;
  r.s = s;
  r.q = q;
  r.defect = commutativity_defect(x, y, cfg, cloud, t, s, q);
  const double coarse = commutativity_defect(x, y, cfg, cloud.coarsened(), t, s, q);
  r.quadrature_error = std::abs(r.defect - coarse);
  r.budget = defect_budget(x, y, cfg, cloud, t, s);
  r.tolerance = r.budget + r.quadrature_error;
  r.small = r.defect <= r.tolerance;
  return r;
}

/// commutativity_check for several exponents from one set of flow images
/// per cloud. Rows come back in the order of `qs`.
template <int Dim>
std::vector<DefectRow> commutativity_checks(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                                            const PointCloud<Dim>& cloud, double t, double s,
                                            const std::vector<double>& qs) {
  const auto coarse_cloud = cloud.coarsened();
  const auto fine = commutator_images(x, y, cfg, cloud.points, t, s);
  const auto coarse = commutator_images(x, y, cfg, coarse_cloud.points, t, s);
  const double budget = defect_budget(x, y, cfg, cloud, t, s);
  std::vector<DefectRow> rows;
  for (double q : qs) {
    DefectRow r;
    r.t = t;
    r.s = s;
    r.q = q;
    r.defect = lq_norm(fine, cloud.weights, q);
    r.quadrature_error = std::abs(r.defect - lq_norm(coarse, coarse_cloud.weights, q));
    r.budget = budget;
    r.tolerance = r.budget + r.quadrature_error;
    r.small = r.defect <= r.tolerance;
    rows.push_back(r);
  }
  return rows;
}

/// Flags a pair as non-commuting when defect/(ts) at t = s = 1e-2 exceeds
/// ten times the integrator budget.
template <int Dim>
bool detect_noncommuting(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                         const PointCloud<Dim>& cloud, double q = 1.0) {
  constexpr double ts = 1e-2;
  const double d = commutativity_defect(x, y, cfg, cloud, ts, ts, q);
  return d / (ts * ts) > 10.0 * defect_budget(x, y, cfg, cloud, ts, ts);
}

/// Measured commutator defect at z and its first-order prediction
/// kTaylorSign * t s [X,Y](z).
template <int Dim>
std::pair<Vec<Dim>, Vec<Dim>> taylor_remainder(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                                               const Vec<Dim>& z, double t, double s, double h = 1e-4) {
  const Vec<Dim> a = flow_point(x, cfg, flow_point(y, cfg, z, s), t);
  const Vec<Dim> b = flow_point(y, cfg, flow_point(x, cfg, z, t), s);
  return {a - b, kTaylorSign * t * s * lie_bracket(x, y, z, h)};
}

/// J(t) Y(z) - Y(Phi_t^X z), with J the variational Jacobian of the X-flow.
template <int Dim>
Vec<Dim> pushforward_defect(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg, const Vec<Dim>& z,
                            double t) {
  if (!x.has_jacobian()) throw CapabilityError("pushforward_defect: field '" + x.name + "' has no Jacobian");
  const auto tr = jacobian_density(x, cfg, z, t);
  if (!tr.has_jacobian()) throw CapabilityError("pushforward_defect: no Jacobian track");
  return tr.jacobian.back() * y.eval(z) - y.eval(tr.states.back());
}

/// Residual of d/dt A = DX(Phi_t) A for A(t) = Y(Phi_t^X z): rows
/// (t, |centered d/dt A - DX(Phi_t) Y(Phi_t)|) on `samples`+1 equispaced
/// times in [0, t_max]. The time derivative uses a step of cfg.dt.
template <int Dim>
ConvergenceReport mixed_ode_residual(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                                     const Vec<Dim>& z, double t_max, double tolerance = 1e-5, int samples = 50,
                                     double fd_step = 1e-4) {
  cfg.validate();
  ConvergenceReport rep;
  rep.name = "mixed_ode";
  const VecField<Dim> xf = effective_field(x, cfg);
  const double delta = cfg.dt;
  Vec<Dim> p = z;
  double worst = 0.0;
  for (int k = 0; k <= samples; ++k) {
    const double t = t_max * k / samples;
    if (k > 0) p = integrate_flow(xf, cfg.dt, p, t_max / samples);
    const Vec<Dim> ahead = integrate_flow(xf, delta, p, delta);
    const Vec<Dim> behind = integrate_flow(xf, delta, p, -delta);
    const Vec<Dim> dA = (y.eval(ahead) - y.eval(behind)) / (2.0 * delta);
    const double r = (dA - jacobian(x, p, fd_step) * y.eval(p)).norm();
    rep.rows.emplace_back(t, r);
    worst = std::max(worst, r);
  }
  rep.passed = worst <= tolerance;
  rep.detail = "max residual " + std::to_string(worst);
  return rep;
}

}  // namespace rlf
