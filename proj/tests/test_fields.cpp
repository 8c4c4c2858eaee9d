#include <gtest/gtest.h>

#include <cmath>

#include "rlf/cloud.hpp"
#include "rlf/presets.hpp"

using namespace rlf;

namespace {

// (-|y|^a sgn y, |x|^a sgn x): Hoelder, not Lipschitz, on the axes.
VecField<2> sgn_power_field(double a) {
  VecField<2> f;
  f.name = "sgn_power";
  auto sp = [a](double v) { return std::copysign(std::pow(std::abs(v), a), v); };
  f.eval = [sp](const Vec2& z) -> Vec2 { return Vec2(-sp(z[1]), sp(z[0])); };
  f.domain = Box<2>::cube(1.0);
  f.regularity = Regularity::sobolev;
  f.holder = a;
  return f;
}


}  // namespace

TEST(Profiles, BumpAndCutoffShape) {
  EXPECT_DOUBLE_EQ(bump_profile(0.0), std::exp(-1.0));
  EXPECT_EQ(bump_profile(1.0), 0.0);
  EXPECT_EQ(bump_profile(1.5), 0.0);
  EXPECT_EQ(cutoff(0.5, 1.0), 1.0);
  EXPECT_EQ(cutoff(1.0, 1.0), 1.0);
  EXPECT_EQ(cutoff(2.0, 1.0), 0.0);
  EXPECT_NEAR(cutoff(1.5, 1.0), 0.5, 1e-15);
  for (double r : {1.1, 1.3, 1.5, 1.8, 1.95}) {
    const double fd = (cutoff(r + 1e-6, 1.0) - cutoff(r - 1e-6, 1.0)) / 2e-6;
    EXPECT_NEAR(cutoff_derivative(r, 1.0), fd, 1e-7);
    const double u = r - 1.0;
    const double fdb = (bump_profile(u + 1e-6) - bump_profile(u - 1e-6)) / 2e-6;
    EXPECT_NEAR(bump_profile_dlog(u) * u, fdb, 1e-7);
  }
}

TEST(FdJacobian, LinearFieldsAreExact) {
  const auto id = linear_field<2>(Mat2::Identity(), 10.0, Box<2>::cube(4.0));
  EXPECT_LT((fd_jacobian(id, Vec2(0.3, -1.2), 1e-4) - Mat2::Identity()).norm(), 1e-10);
  Mat2 A;
  A << 0.0, 1.0, 0.0, 0.0;
  const auto f = linear_field<2>(A, 10.0, Box<2>::cube(4.0));
  EXPECT_LT((fd_jacobian(f, Vec2(1.0, 1.0), 1e-4) - A).norm(), 1e-10);
  EXPECT_NEAR(fd_divergence(id, Vec2(0.1, 0.2), 1e-4), 2.0, 1e-10);
  const auto rot = linear_field<2>(detail::perp(), 10.0, Box<2>::cube(4.0));
  EXPECT_NEAR(fd_divergence(rot, Vec2(0.7, -0.4), 1e-4), 0.0, 1e-10);
}

TEST(FdJacobian, HoelderFieldOffDiagonal) {
  // d/dy(-|y|^a sgn y) = -a|y|^(a-1); at 0.25 with a = 1/2 that is -1.
  const auto f = sgn_power_field(0.5);
  const Vec2 z(0.25, 0.25);
  const Mat2 j = fd_jacobian(f, z, 1e-5);
  const Mat2 j2 = fd_jacobian(f, z, 5e-6);
  EXPECT_NEAR(j(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(j(1, 1), 0.0, 1e-12);
  EXPECT_NEAR(j(0, 1), -1.0, 1e-4);
  EXPECT_NEAR(j(1, 0), 1.0, 1e-4);
  EXPECT_LT((j - j2).norm(), 1e-4);
  EXPECT_LT(fd_jacobian_consistency(f, z, 1e-5), 1e-4);
}

TEST(FdJacobian, ErrorContract) {
  const auto f = sgn_power_field(0.5);
  EXPECT_THROW(fd_jacobian(f, Vec2(0.0, 0.0), 0.0), ParameterError);
  EXPECT_THROW(fd_jacobian(f, Vec2(0.0, 0.0), -1e-3), ParameterError);
  EXPECT_THROW(fd_jacobian(f, Vec2(1.0 - 1e-5, 0.0), 1e-4), BoundaryMarginError);
  EXPECT_NO_THROW(fd_jacobian(f, Vec2(1.0 - 2e-4, 0.0), 1e-4));
}

TEST(Presets, NamesAndErrors) {
  EXPECT_EQ(preset_names().size(), 6u);
  for (const auto& n : preset_names()) EXPECT_NO_THROW(preset_pair(n));
  EXPECT_THROW(preset_pair("vortex"), UnknownPresetError);
  PresetParams bad;
  bad.alpha = 1.5;
  EXPECT_THROW(preset_pair("nonlipschitz_shear_pair", bad), ParameterError);
  EXPECT_EQ(preset_diagnostics("nonlipschitz_shear_pair", bad).size(), 1u);
  bad = {};
  bad.r_cut = 0.0;
  EXPECT_THROW(preset_pair("linear_commuting", bad), ParameterError);
}

TEST(Presets, NilpotentBracketMatchesMatrixOracle) {
  const auto p = preset_pair("nilpotent_shears");
  Mat2 A, B;
  A << 0.0, 1.0, 0.0, 0.0;
  B << 0.0, 0.0, 1.0, 0.0;
  const Vec2 z(1.0, 1.0);
  const Vec2 oracle = (B * A - A * B) * z;
  EXPECT_LT((oracle - Vec2(-1.0, 1.0)).norm(), 1e-15);
  EXPECT_LT((p.bracket(z) - oracle).norm(), 1e-15);
  const Vec2 fd = fd_jacobian(p.y, z, 1e-4) * p.x.eval(z) - fd_jacobian(p.x, z, 1e-4) * p.y.eval(z);
  EXPECT_LT((fd - oracle).norm(), 1e-9);
  EXPECT_FALSE(p.commuting);
}

TEST(Presets, HamiltonianBracketAndDivergenceVanish) {
  const auto p = preset_pair("hamiltonian_pair");
  const Vec2 z(0.3, 0.4);
  const Vec2 fd = fd_jacobian(p.y, z, 1e-4) * p.x.eval(z) - fd_jacobian(p.x, z, 1e-4) * p.y.eval(z);
  EXPECT_LT(fd.norm(), 1e-6);
  EXPECT_LT(std::abs(fd_divergence(p.y, Vec2(0.3, 0.2), 1e-4)), 1e-6);
  // Y = H X with H = |z|^2 / 2 inside the cutoff.
  EXPECT_LT((p.y.eval(z) - 0.5 * z.squaredNorm() * p.x.eval(z)).norm(), 1e-15);
}

TEST(Presets, ConstantsCommuteExactly) {
  const auto p = preset_pair("constants");
  const Vec2 z(0.2, -0.7);
  for (double t : {-1.0, 0.3, 2.0})
    for (double s : {-0.5, 0.4}) EXPECT_EQ(p.flow_x(p.flow_y(z, s), t), p.flow_y(p.flow_x(z, t), s));
}

TEST(Presets, AnalyticJacobiansAgreeWithDifferences) {
  Rng rng(11);
  for (const auto& n : preset_names()) {
    const auto p = preset_pair(n);
    for (const auto* f : {&p.x, &p.y}) {
      ASSERT_TRUE(f->has_jacobian()) << n;
      for (int k = 0; k < 100; ++k) {
        Vec2 z(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
        if (n == "nonlipschitz_shear_pair" && std::abs(z[0]) < 0.05) z[0] += 0.1;
        const double h = 1e-4;
        const Mat2 a = f->jac(z), d = fd_jacobian(*f, z, h);
        const double scale = std::max(1.0, a.norm());
        const double tol = n == "nonlipschitz_shear_pair" ? 1e-5 : 10.0 * h * h;
        EXPECT_LT((a - d).norm() / scale, tol) << n << " " << f->name << " at " << z.transpose();
        EXPECT_NEAR(f->divergence(z), a.trace(), 1e-12 * std::max(1.0, std::abs(a.trace())));
      }
    }
  }
}

TEST(Presets, SupNormBoundsSampledValues) {
  Rng rng(5);
  for (const auto& n : preset_names()) {
    const auto p = preset_pair(n);
    for (const auto* f : {&p.x, &p.y}) {
      for (int k = 0; k < 200; ++k) {
        const Vec2 z(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0));
        EXPECT_LE(f->eval(z).norm(), f->sup_norm * (1.0 + 1e-12)) << n;
        EXPECT_LE(std::abs(f->divergence(z)), f->div_sup + 1e-12) << n;
      }
    }
  }
}

TEST(Presets, DivergenceFreePresetsHaveSmallFdDivergence) {
  Rng rng(9);
  for (const char* n : {"constants", "hamiltonian_pair", "nonlipschitz_shear_pair"}) {
    const auto p = preset_pair(n);
    for (const auto* f : {&p.x, &p.y}) {
      for (int k = 0; k < 100; ++k) {
        Vec2 z(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
        if (std::abs(z[0]) < 0.05) z[0] += 0.1;
        EXPECT_LT(std::abs(fd_divergence(*f, z, 1e-4)), 1e-6) << n;
      }
    }
  }
}

TEST(Presets, ShearAntiderivativeMatchesQuadrature) {
  // Oracle: G(0.75) - G(0.25) = int_0.25^0.75 sqrt(u) du = 0.34967936855888604
  // (scipy quad, cross-checked against x^1.5 / 1.5).
  const ShearProfile sh{0.5, 10.0};
  EXPECT_NEAR(sh.G(0.75) - sh.G(0.25), 0.34967936855888604, 1e-14);
  EXPECT_NEAR(sh.G(-0.5), -sh.G(0.5), 1e-15);
  // Beyond r_cut, G must still be an antiderivative of g.
  const ShearProfile near{0.5, 1.0};
  for (double x : {1.2, 1.5, 1.9, 2.5}) {
    const double fd = (near.G(x + 1e-5) - near.G(x - 1e-5)) / 2e-5;
    EXPECT_NEAR(fd, near.g(x), 1e-8);
  }
}

TEST(Presets, RoughPairCommutesThroughClosedForms) {
  const auto p = preset_pair("nonlipschitz_shear_pair");
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vec2 z(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
    const double t = rng.uniform(-1.0, 1.0), s = rng.uniform(-1.0, 1.0);
    EXPECT_LT((p.flow_x(p.flow_y(z, s), t) - p.flow_y(p.flow_x(z, t), s)).norm(), 1e-12);
  }
}

TEST(Mollifier, UnitMassMatchesRadialOracle) {
  // scipy quad: 2 pi int_0^1 u eta(u) du and int_-1^1 eta(u) du.
  EXPECT_NEAR(MollifierKernel<2>::unit_mass(), 0.4665123931783276, 1e-13);
  EXPECT_NEAR(MollifierKernel<1>::unit_mass(), 0.44399381616807865, 1e-13);
  const MollifierKernel<2> k(0.3);
  const auto c = PointCloud<2>::midpoint(Box<2>::cube(0.3), 400);
  EXPECT_NEAR(integrate([&](const Vec2& u) { return k(u); }, c), 1.0, 1e-9);
  EXPECT_THROW(MollifierKernel<2>(0.0), ParameterError);
}

TEST(Mollifier, EvenAndSupportedInBall) {
  const MollifierKernel<2> k(0.5);
  const auto r = k.reflect();
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Vec2 u(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
    EXPECT_EQ(k(u), k(-u));
    EXPECT_EQ(k(u), r(u));
    EXPECT_LT((k.gradient(u) + k.gradient(-u)).norm(), 1e-12);
    if (u.norm() >= 0.5) {
      EXPECT_EQ(k(u), 0.0);
    }
  }
}

TEST(DiscreteKernel, MomentsAndResolution) {
  const MollifierKernel<2> k(0.2);
  const DiscreteKernel<2> dk(k, 0.025);
  double mass = 0.0;
  Mat2 moment = Mat2::Zero();
  for (std::size_t i = 0; i < dk.size(); ++i) {
    mass += dk.weights[i];
    moment += dk.gradient_weights[i] * dk.offsets[i].transpose();
  }
  EXPECT_NEAR(mass, 1.0, 1e-14);
  EXPECT_LT((moment + Mat2::Identity()).norm(), 1e-13);
  EXPECT_THROW(DiscreteKernel<2>(k, 0.11), ResolutionError);
}

TEST(GridMollify, ConstantsAndLinearsPreserved) {
  const Box<2> box = Box<2>::cube(1.0);
  const double h = 1.0 / 32.0, eps = 0.125;
  const MollifierKernel<2> k(eps);
  const auto cst = GridField<2>::sample(constant_field<2>(Vec2(0.3, -2.0), box), box, h);
  Mat2 A;
  A << 0.5, -1.0, 2.0, 0.25;
  const auto lin = GridField<2>::sample(linear_field<2>(A, 10.0, box), box, h);
  const auto mc = mollify(cst, k), ml = mollify(lin, k);
  ASSERT_EQ(static_cast<std::size_t>(mc.counts.prod()), mc.size());
  EXPECT_EQ(mc.counts[0], 65);
  for (std::size_t n = 0; n < mc.size(); ++n) {
    const Vec2 z = mc.node(n);
    if (!box.contains_with_margin(z, eps + 1e-12)) continue;
    EXPECT_LT((mc.samples[n] - Vec2(0.3, -2.0)).norm(), 1e-12);
    EXPECT_LT((ml.samples[n] - A * z).norm(), 1e-10);
  }
  EXPECT_LE(mc.max_norm(), cst.max_norm() * (1.0 + 1e-12));
  EXPECT_THROW(mollify(cst, MollifierKernel<2>(1.5 * h)), ResolutionError);
}

TEST(GridMollify, IsLinear) {
  const Box<2> box = Box<2>::cube(1.0);
  const double h = 1.0 / 16.0;
  const auto p = preset_pair("hamiltonian_pair");
  const auto f = GridField<2>::sample(p.x, box, h), g = GridField<2>::sample(p.y, box, h);
  auto comb = f;
  for (std::size_t n = 0; n < f.size(); ++n) comb.samples[n] = 2.0 * f.samples[n] - 0.5 * g.samples[n];
  const MollifierKernel<2> k(0.25);
  const auto mf = mollify(f, k), mg = mollify(g, k), mc = mollify(comb, k);
  for (std::size_t n = 0; n < f.size(); ++n)
    EXPECT_LT((mc.samples[n] - (2.0 * mf.samples[n] - 0.5 * mg.samples[n])).norm(), 1e-12);
}

TEST(GridMollify, RoughShearApproximationImprovesAsEpsHalves) {
  const auto p = preset_pair("nonlipschitz_shear_pair");
  const Box<2> box = Box<2>::cube(1.0);
  const double h = 1.0 / 128.0;
  const auto g = GridField<2>::sample(p.x, box, h);
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    const auto m = mollify(g, MollifierKernel<2>(eps));
    double sup = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n)
      if (box.contains_with_margin(g.node(n), 0.2 + 1e-12)) sup = std::max(sup, (m.samples[n] - g.samples[n]).norm());
    EXPECT_LT(sup, prev);
    prev = sup;
  }
}

TEST(GridMollify, DivergenceCommutesWithMollification) {
  // div(F * rho) at a node vs (div F) * rho, both on the lattice.
  const auto p = preset_pair("linear_commuting");
  const Box<2> box = Box<2>::cube(1.0);
  const double h = 1.0 / 64.0;
  const auto g = GridField<2>::sample(p.y, box, h);
  const MollifierKernel<2> k(0.125);
  const auto m = mollify(g, k).as_field("m");
  VecField<2> divf = constant_field<2>(Vec2::Zero(), box);
  divf.eval = [&](const Vec2& z) { return Vec2(p.y.divergence(z), 0.0); };
  const auto md = mollify(GridField<2>::sample(divf, box, h), k);
  for (std::size_t n = 0; n < md.size(); n += 97) {
    const Vec2 z = md.node(n);
    if (!box.contains_with_margin(z, 0.3)) continue;
    EXPECT_NEAR(fd_divergence(m, z, h), md.samples[n][0], 1e-8);
  }
}

TEST(GridField, GeometryAndInterpolation) {
  const Box<2> box{Vec2(0.0, 0.0), Vec2(1.0, 2.0)};
  const GridField<2> g(box, 0.25);
  EXPECT_EQ(g.counts[0], 5);
  EXPECT_EQ(g.counts[1], 9);
  EXPECT_EQ(g.size(), 45u);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g.flat(g.multi(k)), k);
  EXPECT_THROW(GridField<2>(box, 0.3), ParameterError);
  EXPECT_THROW(GridField<2>(box, 0.0), ParameterError);
  Mat2 A;
  A << 1.0, 2.0, -1.0, 0.5;
  const auto s = GridField<2>::sample(linear_field<2>(A, 10.0, box), box, 0.25);
  const Vec2 z(0.37, 1.61);
  EXPECT_LT((s.interpolate(z) - A * z).norm(), 1e-12);
}

TEST(Scaled, ScalesValuesAndDerivatives) {
  const auto p = preset_pair("hamiltonian_pair");
  const auto s = scaled(p.y, -2.0);
  const Vec2 z(0.3, 0.1);
  EXPECT_LT((s.eval(z) + 2.0 * p.y.eval(z)).norm(), 1e-15);
  EXPECT_LT((s.jac(z) + 2.0 * p.y.jac(z)).norm(), 1e-15);
}
