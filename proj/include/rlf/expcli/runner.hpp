#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlf/bracket.hpp"
#include "rlf/io.hpp"
#include "rlf/weakcalc.hpp"
#include "rlf/expcli/config.hpp"

namespace rlf::expcli {

inline constexpr double kNa = std::numeric_limits<double>::quiet_NaN();

/// One table line. Parameters that do not apply are NaN and print empty.
/// `sensitive` rows test a property that holds only for commuting pairs.
struct ReportRow {
  std::string experiment;
  std::string operation;  // library call that produced the value
  std::string preset;
  double t = kNa, s = kNa, h = kNa, eps = kNa, q = kNa;
  double value = kNa;
  double tolerance = kNa;
  std::string verdict;  // pass | fail | error
  std::string detail;
  bool sensitive = false;
};

struct Provenance {
  std::string version = kVersion;
  std::string config_hash;
  std::uint64_t cloud_seed = 0;
  std::uint64_t panel_seed = 0;
  std::string suite;
  std::string preset;
};

struct RunReport {
  std::vector<ReportRow> rows;
  std::string verdict;  // pass | fail | non-commuting detected
  Provenance provenance;
  std::vector<DefectRow> defects;
  std::vector<std::pair<WeakReport, ParamMap>> weak;
  std::optional<Trajectory<2>> trajectory;

  bool passed() const { return verdict == "pass"; }
};

/// Commuting-only failures alone give "non-commuting detected"; errors or
/// any failure of a general identity give "fail".
inline std::string global_verdict(const std::vector<ReportRow>& rows) {
  bool detected = false;
  for (const auto& r : rows) {
    if (r.verdict == "pass") continue;
    if (r.verdict == "error" || !r.sensitive) return "fail";
    detected = true;
  }
  return detected ? "non-commuting detected" : "pass";
}

namespace detail {

struct TaskOutput {
  std::vector<ReportRow> rows;
  std::vector<DefectRow> defects;
  std::vector<std::pair<WeakReport, ParamMap>> weak;
  std::optional<Trajectory<2>> trajectory;
};

struct Task {
  std::string experiment;  // used for the error row
  std::string operation;
  bool sensitive = false;
  std::function<TaskOutput()> body;
};

/// Everything the suites share, built once per run.
struct Context {
  const ExperimentConfig& cfg;
  PresetPair pair;
  PointCloud<2> cloud;
  std::vector<Vec2> points;
  std::vector<BumpTest<2>> panel;

  explicit Context(const ExperimentConfig& c)
      : cfg(c),
        pair(preset_pair(c.preset, c.params)),
        cloud(PointCloud<2>::midpoint(c.cloud.box, c.cloud.resolution, c.cloud.seed)),
        points(cloud.subsample(static_cast<std::size_t>(c.cloud.points))),
        panel(bump_panel(c.cloud.box, c.panel_seed, c.panel_random)) {}

  ReportRow row(std::string experiment, std::string operation, bool sensitive) const {
    ReportRow r;
    r.experiment = std::move(experiment);
    r.operation = std::move(operation);
    r.preset = cfg.preset;
    r.sensitive = sensitive;
    return r;
  }
};

inline constexpr double kCommutatorFloor = 1e-12;  // below this R_eps is roundoff
inline constexpr double kQuotientTarget = 1e-3;    // Delta_h distance required once |h| <= this
inline constexpr double kQuotientFloor = 1e-12;    // exact quotients stop decreasing at roundoff

inline const char* verdict_of(bool ok) { return ok ? "pass" : "fail"; }

inline std::string phi_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "/phi%02zu", i);
  return buf;
}

inline ReportRow finish(ReportRow r, double value, double tolerance) {
  r.value = value;
  r.tolerance = tolerance;
  r.verdict = verdict_of(std::isfinite(value) && value <= tolerance);
  return r;
}

inline ReportRow weak_row(ReportRow r, const WeakReport& w) {
  r.value = std::abs(w.value);
  r.tolerance = w.tolerance;
  r.verdict = w.verdict();
  return r;
}

struct NamedField {
  const char* tag;
  const VecField<2>* field;
};

inline std::vector<NamedField> both(const Context& ctx) { return {{"x", &ctx.pair.x}, {"y", &ctx.pair.y}}; }

// Group property Phi_t o Phi_s = Phi_{t+s} for each field, plus mollified
// stability when a scale schedule is configured.
inline void flow_suite(const Context& ctx, std::vector<Task>& tasks) {
  const auto& c = ctx.cfg;
  for (const auto& nf : both(ctx))
    for (double t : c.schedules.t)
      for (double s : c.schedules.s) {
        const std::string exp = std::string("flow_") + nf.tag;
        tasks.push_back({exp, "group_defect", false, [&ctx, nf, t, s, exp] {
                           const auto& c = ctx.cfg;
                           const double v = group_defect(*nf.field, c.flow, ctx.cloud, t, s, c.q);
                           const double coarse = group_defect(*nf.field, c.flow, ctx.cloud.coarsened(), t, s, c.q);
                           const double order = c.flow.eps_schedule.empty() ? integrator_order(*nf.field) : 4.0;
                           const double tol = integrator_budget(c.flow.dt, order,
                                                                std::abs(t) + std::abs(s) + std::abs(t + s),
                                                                std::max(1.0, nf.field->sup_norm)) +
                                              std::abs(v - coarse) + kRoundoffFloor;
                           auto r = ctx.row(exp, "group_defect", false);
                           r.t = t;
                           r.s = s;
                           r.q = c.q;
                           return TaskOutput{{finish(r, v, tol)}, {}, {}, {}};
                         }});
      }
  if (c.flow.eps_schedule.empty()) return;
  tasks.push_back({"stability_x", "stability_study", false, [&ctx] {
                     const auto& c = ctx.cfg;
                     const double h = 0.5 * c.flow.eps_schedule.back();
                     const Box<2> domain = Box<2>::cube(c.params.half_width);
                     const auto grid = GridField<2>::sample(ctx.pair.x, domain, c.params.half_width / std::ceil(c.params.half_width / h));
                     const auto rep = stability_study(grid, c.flow, ctx.cloud, c.schedules.t.front());
                     TaskOutput out;
                     double prev = std::numeric_limits<double>::infinity();
                     for (const auto& [eps, d] : rep.rows) {
                       auto r = ctx.row("stability_x", "stability_study", false);
                       r.t = c.schedules.t.front();
                       r.eps = eps;
                       r.q = 1.0;
                       const double tol = std::isinf(prev) ? d : 1.1 * prev + 1e-14;
                       out.rows.push_back(finish(r, d, tol));
                       prev = d;
                     }
                     return out;
                   }});
}

// Liouville density bounds forward and backward in time, and det J = 1 for
// divergence-free fields.
inline void density_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (const auto& nf : both(ctx))
    for (double sign : {1.0, -1.0}) {
      const std::string exp = std::string("density_") + nf.tag;
      tasks.push_back({exp, "jacobian_density", false, [&ctx, nf, sign, exp] {
                         const auto& c = ctx.cfg;
                         const double T = c.density_T;
                         const double d = nf.field->div_sup;
                         const bool div_free = d == 0.0;
                         double dev = 0.0, detj = 0.0;
                         std::string violation;
                         TaskOutput out;
                         for (std::size_t i = 0; i < ctx.points.size(); ++i) {
                           const auto tr = jacobian_density(*nf.field, c.flow, ctx.points[i], sign * T);
                           try {
                             density_bounds_check(tr, d, T);
                           } catch (const BoundViolationError& e) {
                             if (violation.empty()) violation = e.what();
                           }
                           for (double xi : tr.density) dev = std::max(dev, std::abs(xi - 1.0));
                           for (const auto& J : tr.jacobian) detj = std::max(detj, std::abs(J.determinant() - 1.0));
                           if (i == 0 && sign > 0.0 && nf.tag[0] == 'x') out.trajectory = tr;
                         }
                         auto r = ctx.row(exp, "jacobian_density", false);
                         r.t = sign * T;
                         const double tol = div_free ? 1e-9 : std::exp(T * d) * (1.0 + 1e-6) - 1.0;
                         r = finish(r, dev, tol);
                         if (!violation.empty()) {
                           r.verdict = "fail";
                           r.detail = violation;
                         }
                         out.rows.push_back(r);
                         if (div_free && nf.field->has_jacobian()) {
                           auto rj = ctx.row(exp + "_detj", "jacobian_density", false);
                           rj.t = sign * T;
                           out.rows.push_back(finish(rj, detj, 1e-6));
                         }
                         return out;
                       }});
    }
}

// Commutativity defect over the (t, s) grid plus the small-time detector.
inline void defect_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (double t : ctx.cfg.schedules.t)
    for (double s : ctx.cfg.schedules.s)
      tasks.push_back({"defect", "commutativity_check", true, [&ctx, t, s] {
                         const auto& c = ctx.cfg;
                         const auto d = commutativity_check(ctx.pair.x, ctx.pair.y, c.flow, ctx.cloud, t, s, c.q);
                         auto r = ctx.row("defect", "commutativity_check", true);
                         r.t = t;
                         r.s = s;
                         r.q = c.q;
                         r.value = d.defect;
                         r.tolerance = d.tolerance;
                         r.verdict = verdict_of(d.small);
                         return TaskOutput{{r}, {d}, {}, {}};
                       }});
  tasks.push_back({"defect_detect", "detect_noncommuting", true, [&ctx] {
                     const auto& c = ctx.cfg;
                     constexpr double ts = 1e-2;
                     auto r = ctx.row("defect_detect", "detect_noncommuting", true);
                     r.t = r.s = ts;
                     r.q = c.q;
                     r.value = commutativity_defect(ctx.pair.x, ctx.pair.y, c.flow, ctx.cloud, ts, ts, c.q) / (ts * ts);
                     r.tolerance = 10.0 * defect_budget(ctx.pair.x, ctx.pair.y, c.flow, ctx.cloud, ts, ts);
                     r.verdict = verdict_of(!detect_noncommuting(ctx.pair.x, ctx.pair.y, c.flow, ctx.cloud, c.q));
                     return TaskOutput{{r}, {}, {}, {}};
                   }});
}

// Pointwise: first-order Taylor identity of the defect (holds for any pair)
// and the mixed ODE residual (zero only for commuting pairs).
inline void taylor_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (double tau : ctx.cfg.schedules.small)
    tasks.push_back({"taylor", "taylor_remainder", false, [&ctx, tau] {
                       const auto& c = ctx.cfg;
                       double err = 0.0, scale = 0.0;
                       for (const auto& z : ctx.points) {
                         const auto [d, pred] = taylor_remainder(ctx.pair.x, ctx.pair.y, c.flow, z, tau, tau);
                         err = std::max(err, (d - pred).norm() / (tau * tau));
                         scale = std::max(scale, pred.norm() / (tau * tau));
                       }
                       auto r = ctx.row("taylor", "taylor_remainder", false);
                       r.t = r.s = tau;
                       const double budget = defect_budget(ctx.pair.x, ctx.pair.y, c.flow, ctx.cloud, tau, tau);
                       return TaskOutput{{finish(r, err, 1e-6 * scale + budget / (tau * tau) + kRoundoffFloor)}, {}, {}, {}};
                     }});
  tasks.push_back({"mixed_ode", "mixed_ode_residual", true, [&ctx] {
                     const auto& c = ctx.cfg;
                     double worst = 0.0;
                     for (const auto& z : ctx.points) {
                       const auto rep = mixed_ode_residual(ctx.pair.x, ctx.pair.y, c.flow, z, 1.0);
                       for (const auto& row : rep.rows) worst = std::max(worst, row.second);
                     }
                     auto r = ctx.row("mixed_ode", "mixed_ode_residual", true);
                     r.t = 1.0;
                     return TaskOutput{{finish(r, worst, 1e-5)}, {}, {}, {}};
                   }});
}

inline void weak_task(const Context& ctx, std::vector<Task>& tasks, const std::string& exp, const char* op,
                      bool sensitive, double t, double s, std::function<WeakReport()> eval) {
  tasks.push_back({exp, op, sensitive, [&ctx, exp, op, sensitive, t, s, eval] {
                     const WeakReport w = eval();
                     auto r = ctx.row(exp, op, sensitive);
                     r.t = t;
                     r.s = s;
                     ParamMap p;
                     if (!std::isnan(t)) p["t"] = t;
                     if (!std::isnan(s)) p["s"] = s;
                     WeakReport named = w;
                     named.experiment = exp;
                     return TaskOutput{{weak_row(r, w)}, {}, {{named, p}}, {}};
                   }});
}

inline void tt_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (double t : ctx.cfg.schedules.t)
    for (std::size_t i = 0; i < ctx.panel.size(); ++i)
      weak_task(ctx, tasks, "tt" + phi_tag(i), "eval_Tt", true, t, kNa, [&ctx, t, i] {
        return eval_Tt(ctx.pair.x, ctx.pair.y, ctx.cfg.flow, t, ctx.panel[i], ctx.cloud);
      });
}

inline void tts_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (double t : ctx.cfg.schedules.t)
    for (double s : ctx.cfg.schedules.s)
      for (std::size_t i = 0; i < ctx.panel.size(); ++i)
        weak_task(ctx, tasks, "tts" + phi_tag(i), "eval_Tts", true, t, s, [&ctx, t, s, i] {
          return eval_Tts(ctx.pair.x, ctx.pair.y, ctx.cfg.flow, t, s, ctx.panel[i], ctx.cloud);
        });
}

inline void dtt_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (double delta : ctx.cfg.schedules.delta)
    for (std::size_t i = 0; i < ctx.panel.size(); ++i) {
      const std::string exp = "dtt" + phi_tag(i);
      tasks.push_back({exp, "dTt_dt_zero", false, [&ctx, delta, i, exp] {
                         const auto c = dTt_dt_zero(ctx.pair.x, ctx.pair.y, ctx.cfg.flow, ctx.panel[i], ctx.cloud, delta);
                         auto r = ctx.row(exp, "dTt_dt_zero", false);
                         r.h = delta;
                         r.value = c.disagreement();
                         r.tolerance = c.tolerance;
                         r.verdict = verdict_of(c.agree);
                         return TaskOutput{{r}, {}, {}, {}};
                       }});
    }
}

inline void weaklie_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (const auto& nf : both(ctx))
    for (double s : ctx.cfg.schedules.s)
      for (std::size_t i = 0; i < ctx.panel.size(); ++i)
        weak_task(ctx, tasks, std::string("weaklie_") + nf.tag + phi_tag(i), "weak_lie_flow_residual", false, kNa, s,
                  [&ctx, nf, s, i] { return weak_lie_flow_residual(*nf.field, ctx.cfg.flow, s, ctx.panel[i], ctx.cloud); });
}

// Closed-form triple a = Phi_s^Y, b = Y, f = Y o a + div Y a, renormalized by
// the identity and by a quadratic map, both cut off beyond the range of a.
inline void renorm_suite(const Context& ctx, std::vector<Task>& tasks) {
  const double R = 2.0 * ctx.cfg.params.half_width;
  for (double s : ctx.cfg.schedules.s)
    for (const char* g : {"identity", "quadratic"})
      for (std::size_t i = 0; i < ctx.panel.size(); ++i)
        weak_task(ctx, tasks, std::string("renorm_") + g + phi_tag(i), "renorm_residual", false, kNa, s,
                  [&ctx, s, g, R, i] {
                    const auto& y = ctx.pair.y;
                    const auto flow_y = ctx.pair.flow_y;
                    const PointMap<2> a = [flow_y, s](const Vec2& z) { return flow_y(z, s); };
                    const PointMap<2> f = [flow_y, y, s](const Vec2& z) {
                      const Vec2 az = flow_y(z, s);
                      return (y.eval(az) + divergence(y, z) * az).eval();
                    };
                    const auto map = g[0] == 'i' ? identity_renormalizer<2>(R) : quadratic_renormalizer<2>(R);
                    return renorm_residual<2>(a, y, f, map, ctx.panel[i], ctx.cloud);
                  });
}

// Monotone decay of R_eps for a bump density against each field; smooth
// fields also get a fitted-order row.
inline void commutator_suite(const Context& ctx, std::vector<Task>& tasks) {
  for (const auto& nf : both(ctx)) {
    const std::string exp = std::string("commutator_") + nf.tag;
    tasks.push_back({exp, "commutator_residual", false, [&ctx, nf, exp] {
                       const Box<2>& box = ctx.cloud.box;
                       const Vec2 center = 0.5 * (box.lo + box.hi);
                       const double radius = 0.4 * box.extent().minCoeff();
                       const ScalarMap<2> u = [center, radius](const Vec2& z) {
                         return bump_profile((z - center).norm() / radius);
                       };
                       const auto rep = commutator_study<2>(u, *nf.field, ctx.cfg.schedules.eps, ctx.cloud);
                       TaskOutput out;
                       double prev = std::numeric_limits<double>::infinity();
                       bool above_floor = rep.rows.size() >= 3;
                       for (const auto& [eps, v] : rep.rows) {
                         auto r = ctx.row(exp, "commutator_residual", false);
                         r.eps = eps;
                         r.q = 1.0;
                         out.rows.push_back(finish(r, v, std::isinf(prev) ? v : std::max(prev, kCommutatorFloor)));
                         prev = v;
                         above_floor = above_floor && v > 100.0 * kCommutatorFloor;
                       }
                       if (above_floor && nf.field->regularity == Regularity::smooth) {
                         auto r = ctx.row(exp + "_order", "report_slope", false);
                         r.value = rep.slope;
                         r.tolerance = 0.9;
                         r.verdict = verdict_of(rep.slope >= 0.9);
                         out.rows.push_back(r);
                       }
                       return out;
                     }});
  }
}

// Incremental quotients Delta_h against Y o Phi_t^X, their sup bound, and
// the pointwise pushforward identity.
inline void quotient_suite(const Context& ctx, std::vector<Task>& tasks) {
  tasks.push_back({"quotient", "incremental_quotient", true, [&ctx] {
                     const auto& c = ctx.cfg;
                     const double t = c.schedules.t.front();
                     const double ysup = ctx.pair.y.sup_norm;
                     TaskOutput out;
                     double prev = 2.0 * ysup * std::pow(ctx.cloud.box.extent().prod(), 1.0 / c.q);
                     for (double h : c.schedules.h) {
                       const auto qr = incremental_quotient(ctx.pair.x, ctx.pair.y, c.flow, ctx.cloud, t, h, c.q);
                       auto r = ctx.row("quotient", "incremental_quotient", true);
                       r.t = t;
                       r.h = h;
                       r.q = c.q;
                       const double tol = std::abs(h) <= kQuotientTarget ? std::min(prev, kQuotientTarget) : prev;
                       r.value = qr.distance;
                       r.tolerance = tol;
                       r.verdict = verdict_of(qr.distance < tol || qr.distance <= kQuotientFloor);
                       out.rows.push_back(r);
                       auto rs = ctx.row("quotient_sup", "incremental_quotient", true);
                       rs.t = t;
                       rs.h = h;
                       out.rows.push_back(finish(rs, qr.sup, ysup * (1.0 + 1e-9)));
                       prev = qr.distance;
                     }
                     return out;
                   }});
  for (double t : ctx.cfg.schedules.t)
    tasks.push_back({"pushforward", "pushforward_defect", true, [&ctx, t] {
                       double worst = 0.0;
                       for (const auto& z : ctx.points)
                         worst = std::max(worst, pushforward_defect(ctx.pair.x, ctx.pair.y, ctx.cfg.flow, z, t).norm());
                       auto r = ctx.row("pushforward", "pushforward_defect", true);
                       r.t = t;
                       return TaskOutput{{finish(r, worst, 1e-6)}, {}, {}, {}};
                     }});
}

// Measure of {F_h > level} on a ball for a smooth scalar bump f.
inline void fh_suite(const Context& ctx, std::vector<Task>& tasks) {
  tasks.push_back({"fh", "fh_measure_trend", false, [&ctx] {
                     const auto& c = ctx.cfg;
                     const Box<2>& box = ctx.cloud.box;
                     const Vec2 center = 0.5 * (box.lo + box.hi);
                     const double radius = 0.4 * box.extent().minCoeff();
                     SmoothMap<2, 1> f;
                     f.eval = [center, radius](const Vec2& z) {
                       return Eigen::Matrix<double, 1, 1>(bump_profile((z - center).norm() / radius));
                     };
                     f.jac = [center, radius](const Vec2& z) -> Eigen::Matrix<double, 1, 2> {
                       const Vec2 d = z - center;
                       return (bump_profile_dlog(d.norm() / radius) / (radius * radius) * d).transpose();
                     };
                     const auto rep = fh_measure_trend<2, 1>(f, ctx.pair.y, c.flow, 0.45 * box.extent().minCoeff(),
                                                             c.fh_eps_level, c.schedules.h, ctx.cloud, center);
                     TaskOutput out;
                     double prev = 1.0;
                     for (std::size_t k = 0; k < rep.rows.size(); ++k) {
                       auto r = ctx.row("fh", "fh_measure_trend", false);
                       r.h = rep.rows[k].first;
                       r.eps = c.fh_eps_level;
                       const bool last = k + 1 == rep.rows.size();
                       const double tol = last ? std::min(prev, 0.01) : prev;
                       const double v = rep.rows[k].second;
                       r.value = v;
                       r.tolerance = tol;
                       r.verdict = verdict_of(v <= tol && (!last || v < 0.01));
                       out.rows.push_back(r);
                       prev = v;
                     }
                     return out;
                   }});
}

inline std::vector<Task> build_tasks(const Context& ctx) {
  using Builder = void (*)(const Context&, std::vector<Task>&);
  static const std::vector<std::pair<std::string, Builder>> suites = {
      {"flow", flow_suite},       {"density", density_suite}, {"defect", defect_suite},
      {"taylor", taylor_suite},   {"tt", tt_suite},           {"tts", tts_suite},
      {"dtt", dtt_suite},         {"weaklie", weaklie_suite}, {"renorm", renorm_suite},
      {"commutator", commutator_suite}, {"quotient", quotient_suite}, {"fh", fh_suite}};
  std::vector<Task> tasks;
  for (const auto& [name, build] : suites)
    if (ctx.cfg.suite == "all" || ctx.cfg.suite == name) build(ctx, tasks);
  return tasks;
}

}  // namespace detail

/// Executes the configured suite. Rows run concurrently, each into its own
/// slot, and are collected in construction order, so the report does not
/// depend on scheduling. Operation errors become "error" rows.
inline RunReport run(const ExperimentConfig& cfg) {
  if (auto diags = validate(cfg); !diags.empty()) throw ConfigError(std::move(diags));
  const detail::Context ctx(cfg);
  const auto tasks = detail::build_tasks(ctx);
  std::vector<detail::TaskOutput> outputs(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    try {
      outputs[i] = tasks[i].body();
    } catch (const std::exception& e) {
      auto r = ctx.row(tasks[i].experiment, tasks[i].operation, tasks[i].sensitive);
      r.verdict = "error";
      r.detail = e.what();
      outputs[i] = detail::TaskOutput{{r}, {}, {}, {}};
    }
  });

  RunReport rep;
  for (auto& o : outputs) {
    for (auto& r : o.rows) rep.rows.push_back(std::move(r));
    for (auto& d : o.defects) rep.defects.push_back(d);
    for (auto& w : o.weak) rep.weak.push_back(std::move(w));
    if (o.trajectory && !rep.trajectory) rep.trajectory = std::move(o.trajectory);
  }
  rep.verdict = global_verdict(rep.rows);
  rep.provenance.config_hash = hex64(fnv1a(canonical_text(cfg)));
  rep.provenance.cloud_seed = cfg.cloud.seed;
  rep.provenance.panel_seed = cfg.panel_seed;
  rep.provenance.suite = cfg.suite;
  rep.provenance.preset = cfg.preset;
  return rep;
}

// ---------------------------------------------------------------------------
// Writers

inline std::string cell(double v) { return std::isnan(v) ? std::string() : fmt(v); }

inline void write_csv(std::ostream& os, const RunReport& rep) {
  os << "experiment,preset,t,s,h,eps,q,value,tolerance,verdict\n";
  for (const auto& r : rep.rows)
    os << r.experiment << ',' << r.preset << ',' << cell(r.t) << ',' << cell(r.s) << ',' << cell(r.h) << ','
       << cell(r.eps) << ',' << cell(r.q) << ',' << cell(r.value) << ',' << cell(r.tolerance) << ',' << r.verdict
       << '\n';
}

inline nlohmann::ordered_json to_json(const RunReport& rep) {
  using J = nlohmann::ordered_json;
  auto num = [](double v) { return std::isnan(v) ? J(nullptr) : J(v); };
  J rows = J::array();
  for (const auto& r : rep.rows) {
    J j;
    j["experiment"] = r.experiment;
    j["preset"] = r.preset;
    j["t"] = num(r.t);
    j["s"] = num(r.s);
    j["h"] = num(r.h);
    j["eps"] = num(r.eps);
    j["q"] = num(r.q);
    j["value"] = num(r.value);
    j["tolerance"] = num(r.tolerance);
    j["verdict"] = r.verdict;
    j["operation"] = r.operation;
    j["commuting_only"] = r.sensitive;
    if (!r.detail.empty()) j["detail"] = r.detail;
    rows.push_back(std::move(j));
  }
  J prov;
  prov["version"] = rep.provenance.version;
  prov["config_hash"] = "fnv1a64:" + rep.provenance.config_hash;
  prov["seeds"] = {{"cloud", rep.provenance.cloud_seed}, {"panel", rep.provenance.panel_seed}};
  prov["suite"] = rep.provenance.suite;
  prov["preset"] = rep.provenance.preset;
  J out;
  out["provenance"] = prov;
  out["verdict"] = rep.verdict;
  out["rows"] = rows;
  return out;
}

/// Writes report.csv, report.json and config.yaml, plus defects.csv,
/// weak.json and trajectory.csv when the suite produced them.
inline void write_outputs(const std::filesystem::path& dir, const RunReport& rep, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("report.csv");
    write_csv(f, rep);
  }
  {
    auto f = open("report.json");
    f << to_json(rep).dump(2) << '\n';
  }
  {
    auto f = open("config.yaml");
    f << canonical_text(cfg);
  }
  if (!rep.defects.empty()) {
    auto f = open("defects.csv");
    write_defect_csv(f, rep.defects);
  }
  if (!rep.weak.empty()) {
    auto f = open("weak.json");
    write_weak_reports_json(f, rep.weak);
  }
  if (rep.trajectory) {
    auto f = open("trajectory.csv");
    write_trajectory_csv(f, *rep.trajectory);
  }
}

}  // namespace rlf::expcli
