#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rlf/flow.hpp"
#include "rlf/presets.hpp"

using namespace rlf;

namespace {

FlowConfig cfg_dt(double dt) {
  FlowConfig c;
  c.dt = dt;
  return c;
}

VecField<2> rotation_field(double hw = 4.0) { return linear_field<2>(detail::perp(), 10.0, Box<2>::cube(hw), "rot"); }

}  // namespace

TEST(FlowConfig, Validation) {
  FlowConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = {};
  c.eps_schedule = {0.1, 0.1};
  EXPECT_THROW(c.validate(), ParameterError);
  c.eps_schedule = {0.1, -0.05};
  EXPECT_THROW(c.validate(), ParameterError);
  c.eps_schedule = {0.2, 0.1, 0.05};
  EXPECT_NO_THROW(c.validate());
}

TEST(FlowPoint, ConstantFieldIsExact) {
  const auto p = preset_pair("constants");
  const Vec2 z = flow_point(p.x, FlowConfig{}, Vec2(0.0, 0.0), 1.0);
  EXPECT_EQ(z, Vec2(1.0, 0.0));
}

TEST(FlowPoint, NilpotentShearIsExact) {
  const auto p = preset_pair("nilpotent_shears");
  const Vec2 z = flow_point(p.x, FlowConfig{}, Vec2(1.0, 1.0), 0.5);
  EXPECT_LT((z - Vec2(1.5, 1.0)).norm(), 1e-12);
}

TEST(FlowPoint, RoughShearAgainstClosedForm) {
  // Oracle: (0.25 + 0.5, G(0.75) - G(0.25)) with the difference from an
  // independent quadrature of sqrt(u) over [0.25, 0.75].
  const auto p = preset_pair("nonlipschitz_shear_pair");
  const Vec2 z = flow_point(p.x, cfg_dt(1e-3), Vec2(0.25, 0.0), 0.5);
  EXPECT_NEAR(z[0], 0.75, 1e-12);
  EXPECT_NEAR(z[1], 0.34967936855888604, 5e-4);
  EXPECT_LT((z - p.flow_x(Vec2(0.25, 0.0), 0.5)).norm(), 5e-4);
}

TEST(FlowPoint, BackwardTimeAndReversal) {
  const auto rot = rotation_field();
  const Vec2 z(0.6, -0.2);
  const auto c = cfg_dt(1e-3);
  const Vec2 back = flow_point(rot, c, z, -0.7);
  EXPECT_LT((back - detail::rotation(-0.7) * z).norm(), 1e-12);
  for (const auto& n : {"linear_commuting", "hamiltonian_pair", "rotation_dilation_cutoff"}) {
    const auto p = preset_pair(n);
    const Vec2 there = flow_point(p.x, c, z, 0.8);
    EXPECT_LT((flow_point(p.x, c, there, -0.8) - z).norm(), 10.0 * std::pow(1e-3, 4) * 0.8) << n;
  }
}

TEST(FlowPoint, EscapeCarriesExitTime) {
  const auto p = preset_pair("constants");
  try {
    flow_point(p.x, cfg_dt(1e-2), Vec2(3.5, 0.0), 2.0);
    FAIL() << "expected escape";
  } catch (const EscapeError& e) {
    EXPECT_NEAR(e.exit_time(), 0.51, 1e-9);
  }
  EXPECT_THROW(flow_point(p.x, cfg_dt(1e-9), Vec2(0.0, 0.0), 1.0), ParameterError);
}

TEST(FlowPoint, MollifiedRouteApproachesClosedForm) {
  const auto p = preset_pair("nonlipschitz_shear_pair");
  FlowConfig c = cfg_dt(1e-2);
  c.eps_schedule = {0.2, 0.1, 0.05};
  const Vec2 z(-0.3, 0.1);
  const auto scales = flow_point_scales(p.x, c, z, 0.6);
  ASSERT_EQ(scales.size(), 3u);
  const Vec2 exact = p.flow_x(z, 0.6);
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& s : scales) {
    const double e = (s - exact).norm();
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_EQ(flow_point(p.x, c, z, 0.6), scales.back());
}

TEST(FlowCloud, IdentityAtZeroAndRigidQuarterTurn) {
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(1.0), 16);
  const auto rot = rotation_field();
  const auto same = flow_cloud(rot, FlowConfig{}, cloud, 0.0);
  EXPECT_EQ(same.points, cloud.points);
  const auto quarter = flow_cloud(rot, cfg_dt(1e-3), cloud, std::numbers::pi / 2);
  EXPECT_EQ(quarter.weights, cloud.weights);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    EXPECT_LT((quarter.points[i] - Vec2(-cloud.points[i][1], cloud.points[i][0])).norm(), 1e-12);
}

TEST(FlowCloud, EscapeReportsSmallestIndex) {
  const auto p = preset_pair("constants");
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(4.0), 8);
  try {
    flow_cloud(p.x, cfg_dt(1e-2), cloud, 1.0);
    FAIL() << "expected escape";
  } catch (const EscapeError& e) {
    EXPECT_EQ(e.index(), 56);  // first node with x = 3.5 (last axis runs fastest)
  }
}

TEST(FlowCloud, HamiltonianConservesEnergy) {
  const auto p = preset_pair("hamiltonian_pair");
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(2.0), 16);
  for (double t : {0.5, 1.0, 2.0}) {
    const auto moved = flow_cloud(p.x, cfg_dt(1e-3), cloud, t);
    for (std::size_t i = 0; i < cloud.size(); ++i)
      EXPECT_LT(std::abs(moved.points[i].squaredNorm() - cloud.points[i].squaredNorm()) / 2, 1e-8 * t);
  }
}

TEST(GroupDefect, ZeroCasesAndRotation) {
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(1.0), 32);
  for (const auto& n : preset_names()) {
    const auto p = preset_pair(n);
    EXPECT_EQ(group_defect(p.x, cfg_dt(1e-3), cloud, 0.3, 0.0, 1.0), 0.0) << n;
  }
  const auto c = preset_pair("constants");
  EXPECT_LT(group_defect(c.x, cfg_dt(1e-3), cloud, 0.3, 0.45, 1.0), 1e-14);
  EXPECT_LT(group_defect(rotation_field(), cfg_dt(1e-3), cloud, 0.25, 0.25, 2.0), 1e-9);
}

TEST(GroupDefect, SymmetricInTimes) {
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(1.0), 16);
  const auto p = preset_pair("linear_commuting");
  const auto c = cfg_dt(1e-3);
  const double a = group_defect(p.x, c, cloud, 0.2, 0.35, 1.0);
  const double b = group_defect(p.x, c, cloud, 0.35, 0.2, 1.0);
  EXPECT_LT(std::abs(a - b), integrator_budget(1e-3, 4.0, 0.55, cloud.box.diameter()));
}

TEST(JacobianDensity, DivergenceFreeKeepsUnitDensity) {
  const auto p = preset_pair("hamiltonian_pair");
  const auto tr = jacobian_density(p.y, cfg_dt(1e-3), Vec2(0.3, 0.4), 1.0);
  ASSERT_TRUE(tr.has_density());
  ASSERT_TRUE(tr.has_jacobian());
  EXPECT_EQ(tr.states.front(), Vec2(0.3, 0.4));
  EXPECT_EQ(tr.density.front(), 1.0);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_NEAR(tr.density[k], 1.0, 1e-9);
    EXPECT_NEAR(tr.jacobian[k].determinant(), tr.density[k], 1e-6);
  }
}

TEST(JacobianDensity, IdentityFieldHasExponentialDensity) {
  const auto f = linear_field<2>(Mat2::Identity(), 10.0, Box<2>::cube(4.0), "id");
  const auto tr = jacobian_density(f, cfg_dt(1e-3), Vec2(0.2, -0.1), 0.5);
  EXPECT_NEAR(tr.density.back(), std::exp(1.0), 1e-6);
  EXPECT_LT((tr.jacobian.back() - std::exp(0.5) * Mat2::Identity()).norm(), 1e-6);
  EXPECT_NEAR(tr.times.back(), 0.5, 1e-15);
}

TEST(JacobianDensity, NilpotentShearIsVolumePreserving) {
  const auto p = preset_pair("nilpotent_shears");
  const auto tr = jacobian_density(p.x, cfg_dt(1e-3), Vec2(1.0, 1.0), 1.0);
  EXPECT_NEAR(tr.density.back(), 1.0, 1e-9);
  EXPECT_NEAR(tr.jacobian.back().determinant(), 1.0, 1e-9);
}

TEST(JacobianDensity, CapabilityAndFallback) {
  const Box<2> box = Box<2>::cube(2.0);
  const auto g = GridField<2>::sample(rotation_field(2.0), box, 0.125).as_field();
  EXPECT_THROW(jacobian_density(g, FlowConfig{}, Vec2(0.3, 0.0), 0.5), CapabilityError);
  const auto tr = jacobian_density(g, cfg_dt(1e-2), Vec2(0.3, 0.0), 0.5, true, 1e-3);
  EXPECT_FALSE(tr.has_jacobian());
  EXPECT_NEAR(tr.density.back(), 1.0, 1e-6);
}

TEST(DensityBounds, ExactEqualityCaseAndDivergenceFree) {
  const auto f = linear_field<2>(Mat2::Identity(), 10.0, Box<2>::cube(4.0), "id");
  const auto tr = jacobian_density(f, cfg_dt(1e-3), Vec2(0.2, 0.1), 0.5);
  const auto rep = density_bounds_check(tr, 2.0, 0.5);
  EXPECT_NEAR(rep.xi_max, std::exp(1.0), 1e-6);
  EXPECT_LE(rep.xi_min, rep.xi_max);
  EXPECT_NEAR(rep.bound, std::exp(1.0), 1e-15);
  const auto p = preset_pair("hamiltonian_pair");
  const auto r0 = density_bounds_check(jacobian_density(p.x, cfg_dt(1e-3), Vec2(0.5, 0.5), 1.0), 0.0, 1.0);
  EXPECT_NEAR(r0.xi_min, 1.0, 1e-12);
  EXPECT_NEAR(r0.xi_max, 1.0, 1e-12);
}

TEST(DensityBounds, RotationDilationMixture) {
  Mat2 A;
  A << 0.3, -1.0, 1.0, 0.3;  // trace 0.6
  const auto f = linear_field<2>(A, 10.0, Box<2>::cube(4.0), "mix");
  for (double T : {1.0, -1.0}) {
    const auto tr = jacobian_density(f, cfg_dt(1e-3), Vec2(0.5, 0.2), T);
    const auto rep = density_bounds_check(tr, 0.6, 1.0);
    EXPECT_NEAR(tr.density.back(), std::exp(0.6 * T), 1e-9);
    EXPECT_GT(rep.lipschitz_estimate, 0.0);
  }
}

TEST(DensityBounds, ViolationsThrow) {
  Trajectory<2> tr;
  tr.times = {0.0, 0.1, 0.2};
  tr.states.assign(3, Vec2::Zero());
  tr.density = {1.0, 1.0, 1.5};
  try {
    density_bounds_check(tr, 1.0, 1.0);
    FAIL() << "expected bound violation";
  } catch (const BoundViolationError& e) {
    EXPECT_NEAR(e.time(), 0.2, 1e-15);
  }
  tr.density = {1.0 + 1e-15, 1.0, 1.0};
  EXPECT_THROW(density_bounds_check(tr, 1.0, 1.0), BoundViolationError);
  tr.density = {1.0, 3.0, 3.0};
  EXPECT_THROW(density_bounds_check(tr, 0.5, 1.0), BoundViolationError);
  Trajectory<2> bare;
  bare.times = {0.0};
  bare.states = {Vec2::Zero()};
  EXPECT_THROW(density_bounds_check(bare, 1.0, 1.0), CapabilityError);
}

TEST(StabilityStudy, ConstantsAreScaleIndependent) {
  const Box<2> box = Box<2>::cube(2.0);
  const auto p = preset_pair("constants");
  FlowConfig c = cfg_dt(1e-2);
  c.eps_schedule = {0.4, 0.2, 0.1};
  const auto g = GridField<2>::sample(p.x, box, 1.0 / 32.0);
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(0.5), 16);
  const auto rep = stability_study(g, c, cloud, 0.5);
  ASSERT_EQ(rep.rows.size(), 3u);
  for (const auto& [eps, d] : rep.rows) EXPECT_LT(d, 1e-12);
  EXPECT_TRUE(rep.passed);
}

TEST(StabilityStudy, SmoothFieldWithinMollificationBound) {
  const Box<2> box = Box<2>::cube(2.0);
  const auto p = preset_pair("hamiltonian_pair");
  FlowConfig c = cfg_dt(1e-2);
  c.eps_schedule = {0.4, 0.2, 0.1};
  const auto g = GridField<2>::sample(p.x, box, 1.0 / 32.0);
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(0.5), 16);
  const double t = 0.5;
  const auto rep = stability_study(g, c, cloud, t);
  for (const auto& [eps, d] : rep.rows) EXPECT_LT(d, 10.0 * eps * 1.0 * t * cloud.box.volume());
  EXPECT_TRUE(rep.passed);
}

TEST(StabilityStudy, RoughShearTrendIsNonincreasing) {
  const Box<2> box = Box<2>::cube(2.0);
  const auto p = preset_pair("nonlipschitz_shear_pair");
  FlowConfig c = cfg_dt(1e-2);
  c.eps_schedule = {0.4, 0.2, 0.1, 0.05};
  const auto g = GridField<2>::sample(p.x, box, 1.0 / 64.0);
  const auto cloud = PointCloud<2>::midpoint(Box<2>::cube(0.5), 16);
  const auto rep = stability_study(g, c, cloud, 0.5);
  EXPECT_TRUE(rep.passed) << rep.detail;
  EXPECT_THROW(stability_study(g, cfg_dt(1e-2), cloud, 0.5), ParameterError);
}
