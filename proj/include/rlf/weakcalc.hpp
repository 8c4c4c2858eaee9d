#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "rlf/bracket.hpp"

namespace rlf {

// ---------------------------------------------------------------------------
// Test functions

/// phi(z) = v eta(|z-c|/r), eta(u) = exp(-1/(1-u^2)) on u < 1.
template <int Dim>
struct BumpTest {
  Vec<Dim> center = Vec<Dim>::Zero();
  double radius = 1.0;
  Vec<Dim> direction = Vec<Dim>::UnitX();

  BumpTest() = default;
  BumpTest(const Vec<Dim>& c, double r, const Vec<Dim>& v) : center(c), radius(r), direction(v) {
    if (!(r > 0.0)) throw ParameterError("bump radius must be positive");
    const double n = v.norm();
    if (!(n > 0.0)) throw ParameterError("bump direction must be nonzero");
    direction = v / n;
  }

  Vec<Dim> value(const Vec<Dim>& z) const { return direction * bump_profile((z - center).norm() / radius); }

  /// D phi_ij = v_i d_j eta(|z-c|/r).
  Mat<Dim> gradient(const Vec<Dim>& z) const {
    const Vec<Dim> d = z - center;
    const double u = d.norm() / radius;
    if (u >= 1.0) return Mat<Dim>::Zero();
    return direction * (bump_profile_dlog(u) / (radius * radius) * d).transpose();
  }
};

/// Type-erased test function with a ball containing its support.
template <int Dim>
struct TestFunction {
  Vec<Dim> center = Vec<Dim>::Zero();
  double radius = 1.0;
  std::function<Vec<Dim>(const Vec<Dim>&)> value;
  std::function<Mat<Dim>(const Vec<Dim>&)> gradient;

  TestFunction() = default;
  TestFunction(const BumpTest<Dim>& b)  // NOLINT: bumps are test functions
      : center(b.center),
        radius(b.radius),
        value([b](const Vec<Dim>& z) { return b.value(z); }),
        gradient([b](const Vec<Dim>& z) { return b.gradient(z); }) {}
};

/// Parameter type for evaluators: non-deduced, so bumps convert implicitly.
template <int Dim>
using TestArg = std::type_identity_t<TestFunction<Dim>>;

/// a phi1 + b phi2, supported in the smallest ball containing both supports.
template <int Dim>
TestFunction<Dim> combine(double a, const TestFunction<Dim>& p1, double b, const TestFunction<Dim>& p2) {
  TestFunction<Dim> out;
  const Vec<Dim> d = p2.center - p1.center;
  const double dist = d.norm();
  if (dist + p2.radius <= p1.radius) {
    out.center = p1.center;
    out.radius = p1.radius;
  } else if (dist + p1.radius <= p2.radius) {
    out.center = p2.center;
    out.radius = p2.radius;
  } else {
    out.radius = 0.5 * (dist + p1.radius + p2.radius);
    out.center = p1.center + (out.radius - p1.radius) / dist * d;
  }
  out.value = [=](const Vec<Dim>& z) -> Vec<Dim> { return a * p1.value(z) + b * p2.value(z); };
  out.gradient = [=](const Vec<Dim>& z) -> Mat<Dim> { return a * p1.gradient(z) + b * p2.gradient(z); };
  return out;
}

/// Fixed panel of 4 centers x 2 directions inside `box`, plus `n_random`
/// bumps drawn from `seed`. Every support lies inside `box`.
template <int Dim>
std::vector<BumpTest<Dim>> bump_panel(const Box<Dim>& box, std::uint64_t seed, int n_random = 4) {
  const Vec<Dim> c = box.center(), ext = box.extent();
  const double m = ext.minCoeff();
  std::vector<BumpTest<Dim>> out;
  const double fixed_r = 0.2 * m;
  const Vec<Dim> dir_a = Vec<Dim>::Unit(0);
  const Vec<Dim> dir_b = Dim > 1 ? Vec<Dim>::Unit(1).eval() : (-Vec<Dim>::Unit(0)).eval();
  for (int k = 0; k < 4; ++k) {
    Vec<Dim> off = Vec<Dim>::Zero();
    if constexpr (Dim == 1) {
      off[0] = (k % 2 ? 0.25 : -0.25) * (k < 2 ? 1.0 : 0.4) * ext[0];
    } else {
      off[0] = (k % 2 ? 0.25 : -0.25) * ext[0];
      off[1] = (k / 2 ? 0.25 : -0.25) * ext[1];
    }
    out.emplace_back(c + off, fixed_r, dir_a);
    out.emplace_back(c + off, fixed_r, dir_b);
  }
  Rng rng(seed);
  for (int k = 0; k < n_random; ++k) {
    const double r = rng.uniform(0.1, 0.25) * m;
    Vec<Dim> center, dir;
    for (int d = 0; d < Dim; ++d) center[d] = rng.uniform(box.lo[d] + r, box.hi[d] - r);
    do {
      for (int d = 0; d < Dim; ++d) dir[d] = rng.uniform(-1.0, 1.0);
    } while (dir.norm() < 1e-3);
    out.emplace_back(center, r, dir);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weak pairings

struct WeakReport {
  std::string experiment;
  double value = 0.0;
  double quadrature_error_estimate = 0.0;
  double budget = 0.0;  // integrator and finite-difference share of the tolerance
  double tolerance = 0.0;
  bool small = true;  // |value| <= tolerance

  const char* verdict() const { return small ? "pass" : "fail"; }
};

/// One quadrature node's contribution: the integrand, the sum of the
/// magnitudes of its terms (roundoff scale) and a pointwise error bound
/// coming from inexact inputs such as integrated flows.
struct WeakSample {
  double value = 0.0;
  double magnitude = 0.0;
  double slack = 0.0;
};

/// Relative roundoff floor applied to the summed term magnitudes.
inline constexpr double kRoundoffFloor = 1e-13;

/// Cloud cells per support radius a pairing needs. The coarsened cloud then
/// keeps half of them, enough for its difference to estimate the error.
inline constexpr double kCellsPerRadius = 6.0;

namespace detail {

template <int Dim>
void require_coverage(const PointCloud<Dim>& cloud, const TestFunction<Dim>& phi) {
  if (!cloud.box.contains_ball(phi.center, phi.radius))
    throw CoverageError("cloud box does not cover the test-function support");
  const double cell = (cloud.box.extent() / cloud.resolution).maxCoeff();
  if (phi.radius < kCellsPerRadius * cell)
    throw ResolutionError("cloud resolves the test-function radius with fewer than " +
                          std::to_string(static_cast<int>(kCellsPerRadius)) + " cells");
}

template <int Dim>
std::vector<std::size_t> support_indices(const PointCloud<Dim>& cloud, const TestFunction<Dim>& phi) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if ((cloud.points[i] - phi.center).norm() < phi.radius) idx.push_back(i);
  return idx;
}

struct WeakSums {
  double value = 0.0, magnitude = 0.0, slack = 0.0;
};

template <int Dim, class Sampler>
WeakSums weak_sums(const PointCloud<Dim>& cloud, const TestFunction<Dim>& phi, const Sampler& sample) {
  const auto idx = support_indices(cloud, phi);
  std::vector<WeakSample> s(idx.size());
  parallel_for(idx.size(), [&](std::size_t k) { s[k] = sample(cloud.points[idx[k]]); });
  WeakSums out;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (!std::isfinite(s[k].value)) throw NumericError("weak pairing: non-finite integrand value");
    const double w = cloud.weights[idx[k]];
    out.value += w * s[k].value;
    out.magnitude += w * s[k].magnitude;
    out.slack += w * s[k].slack;
  }
  return out;
}

}  // namespace detail

/// Midpoint quadrature of a pairing over the cloud points in supp phi. The
/// error estimate is the larger change under halving the resolution and
/// under a half-cell shift of the lattice; either alone can cancel by
/// accident. The tolerance is that estimate + integrated slack + roundoff
/// floor.
template <int Dim, class Sampler>
WeakReport weak_quadrature(std::string experiment, const PointCloud<Dim>& cloud, const TestArg<Dim>& phi,
                           const Sampler& sample) {
  detail::require_coverage(cloud, phi);
  const auto fine = detail::weak_sums(cloud, phi, sample);
  const auto coarse = detail::weak_sums(cloud.coarsened(), phi, sample);
  const auto shifted = detail::weak_sums(cloud.half_shifted(), phi, sample);
  WeakReport r;
  r.experiment = std::move(experiment);
  r.value = fine.value;
  r.quadrature_error_estimate = std::max(std::abs(fine.value - coarse.value), std::abs(fine.value - shifted.value)) +
                                kRoundoffFloor * fine.magnitude;
  r.budget = fine.slack;
  r.tolerance = r.quadrature_error_estimate + r.budget;
  r.small = std::abs(r.value) <= r.tolerance;
  return r;
}

namespace detail {

/// Integrand of int (Yp, phi) + (P, Dphi Y) + div Y (phi, P) for the image
/// P of z with Yp = Y(P); `err` bounds |P - exact image| and is turned into
/// slack through the Lipschitz sensitivities of each term.
template <int Dim>
WeakSample transport_sample(const VecField<Dim>& y, const TestFunction<Dim>& phi, const Vec<Dim>& z,
                            const Vec<Dim>& p, double err) {
  const Vec<Dim> yz = y.eval(z);
  const Vec<Dim> ph = phi.value(z);
  const Vec<Dim> dphi_y = phi.gradient(z) * yz;
  const double dv = divergence(y, z);
  const Vec<Dim> yp = y.eval(p);
  const double t1 = yp.dot(ph), t2 = p.dot(dphi_y), t3 = dv * ph.dot(p);
  WeakSample s;
  s.value = t1 + t2 + t3;
  s.magnitude = std::abs(t1) + std::abs(t2) + std::abs(t3);
  if (err > 0.0) {
    const double lip_y = y.has_jacobian() ? y.jac(p).norm() : 0.0;
    s.slack = err * (dphi_y.norm() + std::abs(dv) * ph.norm() + lip_y * ph.norm());
  }
  return s;
}

template <int Dim>
double flow_error(const VecField<Dim>& f, const FlowConfig& cfg, double t) {
  return integrator_budget(cfg.dt, integrator_order(f), t, std::max(1.0, f.sup_norm));
}

}  // namespace detail

/// T_t(phi) = int (Y o Phi_t^X, phi) + (Phi_t^X, Dphi Y) + div Y (phi, Phi_t^X) dz.
template <int Dim>
WeakReport eval_Tt(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg, double t,
                   const TestArg<Dim>& phi, const PointCloud<Dim>& cloud) {
  cfg.validate();
  const VecField<Dim> xf = effective_field(x, cfg);
  const double err = detail::flow_error(x, cfg, t);
  return weak_quadrature("tt", cloud, phi, [&](const Vec<Dim>& z) {
    return detail::transport_sample(y, phi, z, integrate_flow(xf, cfg.dt, z, t), err);
  });
}

/// T_{t,s}: as T_t with Phi_t^X o Phi_s^Y in place of Phi_t^X. At s = 0 the
/// computation coincides with eval_Tt.
template <int Dim>
WeakReport eval_Tts(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg, double t, double s,
                    const TestArg<Dim>& phi, const PointCloud<Dim>& cloud) {
  cfg.validate();
  const VecField<Dim> xf = effective_field(x, cfg);
  const VecField<Dim> yf = effective_field(y, cfg);
  const double err = detail::flow_error(x, cfg, t) + detail::flow_error(y, cfg, s);
  auto r = weak_quadrature("tts", cloud, phi, [&](const Vec<Dim>& z) {
    const Vec<Dim> p = integrate_flow(xf, cfg.dt, integrate_flow(yf, cfg.dt, z, s), t);
    return detail::transport_sample(y, phi, z, p, err);
  });
  return r;
}

struct DerivativeCheck {
  double delta = 0.0;
  double derivative = 0.0;  // (T_delta - T_-delta) / (2 delta)
  double pairing = 0.0;     // int ([X,Y], phi)
  double quadrature_error = 0.0;
  double tolerance = 0.0;  // 5 delta^2 + quadrature error
  bool agree = true;
  double disagreement() const { return std::abs(derivative - pairing); }
};

/// Centered time derivative of T_t at 0 against the bracket pairing.
template <int Dim>
DerivativeCheck dTt_dt_zero(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                            const TestArg<Dim>& phi, const PointCloud<Dim>& cloud, double delta,
                            double fd_step = 1e-4) {
  cfg.validate();
  if (!(delta > 0.0)) throw ParameterError("dTt_dt_zero: delta must be positive");
  const VecField<Dim> xf = effective_field(x, cfg);
  const auto d = weak_quadrature("dtt", cloud, phi, [&](const Vec<Dim>& z) {
    const auto a = detail::transport_sample(y, phi, z, integrate_flow(xf, cfg.dt, z, delta), 0.0);
    const auto b = detail::transport_sample(y, phi, z, integrate_flow(xf, cfg.dt, z, -delta), 0.0);
    return WeakSample{(a.value - b.value) / (2.0 * delta), (a.magnitude + b.magnitude) / (2.0 * delta), 0.0};
  });
  const auto p = weak_quadrature("bracket_pairing", cloud, phi, [&](const Vec<Dim>& z) {
    const double v = lie_bracket(x, y, z, fd_step).dot(phi.value(z));
    return WeakSample{v, std::abs(v), 0.0};
  });
  DerivativeCheck c;
  c.delta = delta;
  c.derivative = d.value;
  c.pairing = p.value;
  c.quadrature_error = d.quadrature_error_estimate + p.quadrature_error_estimate;
  c.tolerance = 5.0 * delta * delta + c.quadrature_error;
  c.agree = c.disagreement() <= c.tolerance;
  return c;
}

template <int Dim>
using PointMap = std::function<Vec<Dim>(const Vec<Dim>&)>;

/// Pointwise error bound of an approximate map; zero when exact.
template <int Dim>
using ErrorDensity = std::function<double(const Vec<Dim>&)>;

/// int (F, Dphi Y) + div Y (F, phi) + (f, phi) dz: vanishes iff f is the weak
/// Lie derivative of F along Y (against phi).
template <int Dim>
WeakReport weak_lie_residual(const PointMap<Dim>& F, const VecField<Dim>& y, const PointMap<Dim>& f,
                             const TestArg<Dim>& phi, const PointCloud<Dim>& cloud,
                             const ErrorDensity<Dim>& slack = {}) {
  return weak_quadrature("weaklie", cloud, phi, [&](const Vec<Dim>& z) {
    const Vec<Dim> ph = phi.value(z);
    const Vec<Dim> Fz = F(z);
    const double t1 = Fz.dot(phi.gradient(z) * y.eval(z));
    const double t2 = divergence(y, z) * Fz.dot(ph);
    const double t3 = f(z).dot(ph);
    return WeakSample{t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3), slack ? slack(z) : 0.0};
  });
}

/// weak_lie_residual with F = Phi_s^Y and f = Y o Phi_s^Y, sharing one flow
/// per node and budgeting the integrator error.
template <int Dim>
WeakReport weak_lie_flow_residual(const VecField<Dim>& y, const FlowConfig& cfg, double s,
                                  const TestArg<Dim>& phi, const PointCloud<Dim>& cloud) {
  cfg.validate();
  const VecField<Dim> yf = effective_field(y, cfg);
  const double err = detail::flow_error(y, cfg, s);
  auto r = weak_quadrature("weaklie", cloud, phi, [&](const Vec<Dim>& z) {
    return detail::transport_sample(y, phi, z, integrate_flow(yf, cfg.dt, z, s), err);
  });
  return r;
}

/// A smooth map R^Dim -> R^Out with its Jacobian.
template <int Dim, int Out>
struct SmoothMap {
  std::function<Eigen::Matrix<double, Out, 1>(const Vec<Dim>&)> eval;
  std::function<Eigen::Matrix<double, Out, Dim>(const Vec<Dim>&)> jac;
};

template <int Dim>
using RenormMap = SmoothMap<Dim, Dim>;

/// g(a) = cutoff(|a|, R) a: the identity on B_R.
template <int Dim>
RenormMap<Dim> identity_renormalizer(double R) {
  RenormMap<Dim> g;
  g.eval = [R](const Vec<Dim>& a) -> Vec<Dim> { return cutoff(a.norm(), R) * a; };
  g.jac = [R](const Vec<Dim>& a) -> Mat<Dim> {
    const double n = a.norm();
    Mat<Dim> m = cutoff(n, R) * Mat<Dim>::Identity();
    if (n > 0.0) m += a * (cutoff_derivative(n, R) / n * a).transpose();
    return m;
  };
  return g;
}

/// g(a) = cutoff(|a|, R) a_1 a: quadratic on B_R.
template <int Dim>
RenormMap<Dim> quadratic_renormalizer(double R) {
  RenormMap<Dim> g;
  g.eval = [R](const Vec<Dim>& a) -> Vec<Dim> { return cutoff(a.norm(), R) * a[0] * a; };
  g.jac = [R](const Vec<Dim>& a) -> Mat<Dim> {
    const double n = a.norm();
    Mat<Dim> q = a[0] * Mat<Dim>::Identity();
    q.col(0) += a;
    Mat<Dim> m = cutoff(n, R) * q;
    if (n > 0.0) m += (a[0] * a) * (cutoff_derivative(n, R) / n * a).transpose();
    return m;
  };
  return g;
}

/// Residual of div(g(a) (x) b) = Dg(a) f - div b (Dg(a) a - g(a)) against phi.
/// The triple must satisfy div(a (x) b) = f weakly; this is checked first
/// and a failure raises InvalidInputError.
template <int Dim>
WeakReport renorm_residual(const PointMap<Dim>& a, const VecField<Dim>& b, const PointMap<Dim>& f,
                           const RenormMap<Dim>& g, const TestArg<Dim>& phi, const PointCloud<Dim>& cloud,
                           const ErrorDensity<Dim>& slack = {}) {
  const auto pre = weak_quadrature("renorm_precondition", cloud, phi, [&](const Vec<Dim>& z) {
    const Vec<Dim> ph = phi.value(z);
    const double t1 = a(z).dot(phi.gradient(z) * b.eval(z));
    const double t2 = f(z).dot(ph);
    return WeakSample{t1 + t2, std::abs(t1) + std::abs(t2), slack ? slack(z) : 0.0};
  });
  if (!pre.small)
    throw InvalidInputError("renorm_residual: input does not satisfy div(a (x) b) = f (residual " +
                            std::to_string(pre.value) + ", tolerance " + std::to_string(pre.tolerance) + ")");
  return weak_quadrature("renorm", cloud, phi, [&](const Vec<Dim>& z) {
    const Vec<Dim> az = a(z), ph = phi.value(z), bz = b.eval(z);
    const Vec<Dim> ga = g.eval(az);
    const Mat<Dim> dg = g.jac(az);
    const double db = divergence(b, z);
    const double t1 = ga.dot(phi.gradient(z) * bz);
    const double t2 = (dg * f(z)).dot(ph);
    const double t3 = -db * (dg * az - ga).dot(ph);
    const double sl = slack ? slack(z) * (1.0 + dg.norm()) : 0.0;
    return WeakSample{t1 + t2 + t3, std::abs(t1) + std::abs(t2) + std::abs(t3), sl};
  });
}

// ---------------------------------------------------------------------------
// Commutator, quotients, measure convergence

template <int Dim>
using ScalarMap = std::function<double(const Vec<Dim>&)>;

/// L^1 cloud norm of R_eps[u,b] = sum_j (u * d_j rho) b_j + (u * rho) div b
/// - sum_j (u b_j) * d_j rho, all convolutions by lattice quadrature with
/// `nodes_per_radius` nodes across the kernel radius.
template <int Dim>
double commutator_residual(const ScalarMap<Dim>& u, const VecField<Dim>& b, const MollifierKernel<Dim>& k,
                           const PointCloud<Dim>& cloud, int nodes_per_radius = 8) {
  if (nodes_per_radius < 2) throw ResolutionError("commutator_residual: kernel needs at least 2 nodes per radius");
  const DiscreteKernel<Dim> dk(k, k.epsilon / nodes_per_radius);
  std::vector<double> r(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    const Vec<Dim>& z = cloud.points[i];
    double u_rho = 0.0;
    Vec<Dim> u_drho = Vec<Dim>::Zero(), ub_drho = Vec<Dim>::Zero();
    for (std::size_t m = 0; m < dk.size(); ++m) {
      const Vec<Dim> w = z - dk.offsets[m];
      const double uw = u(w);
      u_rho += dk.weights[m] * uw;
      u_drho += uw * dk.gradient_weights[m];
      ub_drho += uw * b.eval(w).cwiseProduct(dk.gradient_weights[m]);
    }
    r[i] = std::abs(u_drho.dot(b.eval(z)) + u_rho * divergence(b, z) - ub_drho.sum());
  });
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!std::isfinite(r[i])) throw NumericError("commutator_residual: non-finite value");
    acc += cloud.weights[i] * r[i];
  }
  return acc;
}

/// Rows (eps, commutator L^1 norm) over a schedule with the fitted slope.
template <int Dim>
ConvergenceReport commutator_study(const ScalarMap<Dim>& u, const VecField<Dim>& b,
                                   const std::vector<double>& eps_schedule, const PointCloud<Dim>& cloud,
                                   int nodes_per_radius = 8) {
  ConvergenceReport rep;
  rep.name = "commutator";
  for (double eps : eps_schedule)
    rep.rows.emplace_back(eps, commutator_residual(u, b, MollifierKernel<Dim>(eps), cloud, nodes_per_radius));
  for (std::size_t k = 1; k < rep.rows.size(); ++k)
    if (rep.rows[k].second > rep.rows[k - 1].second) rep.passed = false;
  if (rep.rows.size() >= 3) {
    bool positive = true;
    for (const auto& row : rep.rows) positive = positive && row.second > 0.0;
    if (positive) rep.slope = report_slope(rep.rows);
  }
  return rep;
}

template <int Dim>
struct QuotientResult {
  double h = 0.0;
  std::vector<Vec<Dim>> quotients;  // Delta_h at each cloud point
  double distance = 0.0;            // L^q norm of Delta_h - Y o Phi_t^X
  double lq = 0.0;                  // L^q norm of Delta_h
  double sup = 0.0;                 // max |Delta_h| over the cloud
};

/// Delta_h(z) = (Phi_t^X(Phi_h^Y z) - Phi_t^X z) / h against Y o Phi_t^X.
template <int Dim>
QuotientResult<Dim> incremental_quotient(const VecField<Dim>& x, const VecField<Dim>& y, const FlowConfig& cfg,
                                         const PointCloud<Dim>& cloud, double t, double h, double q) {
  if (h == 0.0) throw ParameterError("incremental_quotient: h must be nonzero");
  const auto base = flow_points(x, cfg, cloud.points, t);
  const auto moved = flow_points(x, cfg, flow_points(y, cfg, cloud.points, h), t);
  const VecField<Dim> yf = effective_field(y, cfg);
  QuotientResult<Dim> r;
  r.h = h;
  r.quotients.resize(cloud.size());
  std::vector<Vec<Dim>> diff(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    r.quotients[i] = (moved[i] - base[i]) / h;
    diff[i] = r.quotients[i] - yf.eval(base[i]);
    r.sup = std::max(r.sup, r.quotients[i].norm());
  }
  r.distance = lq_norm(diff, cloud.weights, q);
  r.lq = lq_norm(r.quotients, cloud.weights, q);
  return r;
}

/// Rows (h, fraction of cloud weight in B_R(center) where
/// F_h = |f(Phi_h^Y z) - f(z) - h df(z) Y(z)| / |h| exceeds eps_level).
/// Passes when the fractions are nonincreasing and the last is below 1%.
template <int Dim, int Out>
ConvergenceReport fh_measure_trend(const SmoothMap<Dim, Out>& f, const VecField<Dim>& y, const FlowConfig& cfg,
                                   double R, double eps_level, const std::vector<double>& h_schedule,
                                   const PointCloud<Dim>& cloud, const Vec<Dim>& center = Vec<Dim>::Zero()) {
  const auto ball = cloud.restricted_to_ball(center, R);
  if (ball.size() == 0) throw CoverageError("fh_measure_trend: no cloud points in B_R");
  double total = 0.0;
  for (double w : ball.weights) total += w;
  ConvergenceReport rep;
  rep.name = "fh_measure";
  for (double h : h_schedule) {
    if (h == 0.0) throw ParameterError("fh_measure_trend: h must be nonzero");
    const auto moved = flow_points(y, cfg, ball.points, h);
    double bad = 0.0;
    for (std::size_t i = 0; i < ball.size(); ++i) {
      const Vec<Dim>& z = ball.points[i];
      const double F = (f.eval(moved[i]) - f.eval(z) - h * (f.jac(z) * y.eval(z))).norm() / std::abs(h);
      if (F > eps_level) bad += ball.weights[i];
    }
    rep.rows.emplace_back(h, bad / total);
  }
  for (std::size_t k = 1; k < rep.rows.size(); ++k)
    if (rep.rows[k].second > rep.rows[k - 1].second) rep.passed = false;
  if (!rep.rows.empty() && !(rep.rows.back().second < 0.01)) rep.passed = false;
  return rep;
}

}  // namespace rlf
