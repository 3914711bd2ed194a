#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "conflab/identities.hpp"
#include "conflab/variational.hpp"

using namespace conflab;
using std::numbers::pi;

namespace {

ManifoldChart lumpy_s2() { return build_manifold("perturbed_sphere", {{"n", 2}, {"a0", 0.1}, {"a1", 0.05}}); }

ManifoldChart zonal(int n) { return build_manifold("perturbed_sphere", {{"n", n}, {"a0", 0.12}, {"b0", -0.05}}); }

ManifoldChart cap3(double a0 = 0.1, double b0 = -0.06) {
  return build_manifold("hemisphere_cap", {{"n", 3}, {"theta0", 1.9}, {"a0", a0}, {"b0", b0}});
}

void expect_halving(const IdentityReport& r, double floor = 1e-8) {
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    const double prev = r.history[i - 1].rel_residual, cur = r.history[i].rel_residual;
    EXPECT_TRUE(cur <= 0.5 * prev || cur < floor) << r.name << " level " << r.history[i].level << ": " << cur
                                                  << " vs " << prev;
  }
}

}  // namespace

TEST(KazdanWarner, RoundSphereIsTrivial) {
  const auto s2 = build_manifold("round_sphere_polar", {{"n", 2}});
  const auto r = kazdan_warner(s2, build_vector_field(s2, "boost"),
                               invariant_quantity(scalar_invariant("scalar_curvature"), s2), {2, 3}, 1e-6);
  EXPECT_EQ(r.verdict, Verdict::pass);
  EXPECT_LT(std::abs(r.lhs), 1e-11);
}

TEST(KazdanWarner, PerturbedS2ScalarCurvature) {
  const auto c = lumpy_s2();
  const auto x = build_vector_field(c, "boost");
  const auto r =
      kazdan_warner(c, x, invariant_quantity(scalar_invariant("scalar_curvature"), c), {1, 2, 3}, 1e-6);
  EXPECT_EQ(r.verdict, Verdict::pass) << r.rel_residual;
  EXPECT_LT(r.rel_residual, 1e-6);
  EXPECT_GT(r.scale, 1.0);
  EXPECT_LT(r.extra("duality"), 1e-7);
  expect_halving(r);
}

TEST(KazdanWarner, Sigma2OnPerturbedS4) {
  const auto c = zonal(4);
  const auto r = kazdan_warner(c, build_vector_field(c, "boost"), invariant_quantity(scalar_invariant("sigma2"), c),
                               {2, 3, 4}, 1e-5);
  EXPECT_EQ(r.verdict, Verdict::pass) << r.rel_residual;
  expect_halving(r);
}

TEST(KazdanWarner, RejectsBoundaryAndNonConformalFields) {
  const auto cap = build_manifold("hemisphere_cap", {{"n", 2}, {"theta0", 1.5}});
  const auto q = invariant_quantity(scalar_invariant("scalar_curvature"), cap);
  EXPECT_THROW(kazdan_warner(cap, build_vector_field(cap, "boost"), q, {2}, 1e-6), IdentityError);

  const auto c = lumpy_s2();
  const VectorFieldSpec bad{"sin^2 d_theta", [](std::span<const Jet> x) {
                              return std::vector<Jet>{sin(x[0]) * sin(x[0]), 0.0 * x[1]};
                            }};
  const auto r = kazdan_warner(c, bad, invariant_quantity(scalar_invariant("scalar_curvature"), c), {2}, 1e-6);
  EXPECT_EQ(r.verdict, Verdict::precondition_failed);
  EXPECT_FALSE(r.note.empty());
  EXPECT_THROW(kazdan_warner(c, build_vector_field(c, "boost"), q, {3, 2}, 1e-6), IdentityError);
}

TEST(PohozaevSchoen, CompactlySupportedBOnFlatBox) {
  // B_ab = d_a d_b psi - delta_ab Lap psi is divergence free for any psi.
  const auto box = build_manifold("flat_box", {{"n", 2}});
  const auto psi = product_bump({0.5, 0.5}, {0.3, 0.3});
  auto jets = [psi](std::span<const double> p, int order) {
    const Jet f = evaluate(psi, p, order + 2);
    JetMatrix b(2, f.layout(), order);
    const Jet lap = f.derivative(0).derivative(0) + f.derivative(1).derivative(1);
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) {
        b(a, c) = f.derivative(a).derivative(c);
        if (a == c) b(a, c) -= lap;
      }
    return b;
  };
  const SymTensorField b{"hess - lap", [jets](std::span<const double> p) { return jets(p, 0).value(); }, jets};
  const auto r = pohozaev_schoen(box, build_vector_field(box, "translation", {{"axis", 0}}), b, {2, 3}, 1e-9);
  EXPECT_LT(std::abs(r.lhs), 1e-9);
  EXPECT_LT(std::abs(r.rhs), 1e-9);
  EXPECT_EQ(r.verdict, Verdict::pass);
}

TEST(PohozaevSchoen, HarmonicStressEnergyOnDisk) {
  const auto disk = build_manifold("flat_annulus", {{"r0", 0.0}, {"r1", 1.0}});
  const ScalarField phi{"r^2 cos 2t", [](std::span<const Jet> x) { return x[0] * x[0] * cos(2.0 * x[1]); }};
  const auto t = stress_energy(phi, disk).tensor;
  const auto r = pohozaev_schoen(disk, build_vector_field(disk, "euler"), t, {2, 3, 4}, 1e-6);
  EXPECT_EQ(r.verdict, Verdict::pass) << r.rel_residual;
  EXPECT_GT(r.scale, 0.1);
}

TEST(PohozaevSchoen, EinsteinTensorOnPerturbedCap) {
  const auto c = cap3();
  const auto r = pohozaev_schoen(c, build_vector_field(c, "boost"), tensor_field("einstein", c), {1, 2, 3}, 1e-4);
  EXPECT_EQ(r.verdict, Verdict::pass) << r.rel_residual;
  EXPECT_GT(std::abs(r.lhs), 1e-3);
  EXPECT_LT(r.extra("prelim_residual"), 1e-6);
  expect_halving(r);
}

TEST(PohozaevSchoen, NonConservedTensorIsAPreconditionFailure) {
  const auto c = cap3();
  const auto r = pohozaev_schoen(c, build_vector_field(c, "boost"), tensor_field("ricci", c), {2}, 1e-4);
  EXPECT_EQ(r.verdict, Verdict::precondition_failed);
  EXPECT_NE(r.note.find("divergence"), std::string::npos);
}

TEST(PohozaevSchoen, LovelockTensorOnPerturbedS5Cap) {
  // With B = G4 the trace is (n - 4) S4, so int L_X S4 = -n/(n - 4) int G4°(X, nu).
  const auto c = build_manifold("hemisphere_cap", {{"n", 5}, {"theta0", 1.9}, {"a0", 0.1}, {"b0", -0.06}});
  const auto r = pohozaev_schoen(c, build_vector_field(c, "boost"), lovelock_field(c), {2, 3}, 1e-6);
  EXPECT_EQ(r.verdict, Verdict::pass) << r.rel_residual;
  const auto s4 = integrate_scalar(c, [&](std::span<const double> p) {
    const Jet v = evaluate_invariant(scalar_invariant("gauss_bonnet_4"), c, p, 1);
    return build_vector_field(c, "boost").components(p).dot(Vector{{v.gradient(0), v.gradient(1), v.gradient(2),
                                                                      v.gradient(3), v.gradient(4)}});
  }, 3);
  EXPECT_NEAR(r.lhs, (5 - 4) * s4.value, 1e-8 * std::abs(r.lhs));
}

TEST(SchoenScalar, RoundAndPerturbedCaps) {
  const auto round = cap3(0.0, 0.0);
  const auto r0 = schoen_scalar(round, build_vector_field(round, "boost"), {2, 3}, 1e-4);
  EXPECT_LT(std::abs(r0.lhs), 1e-9);
  EXPECT_LT(std::abs(r0.rhs), 1e-9);

  const auto c = cap3();
  const auto r = schoen_scalar(c, build_vector_field(c, "boost"), {1, 2, 3}, 1e-4);
  EXPECT_EQ(r.verdict, Verdict::pass) << r.rel_residual;
  EXPECT_LT(r.extra("specialization_lhs_gap"), 1e-8);
  EXPECT_LT(r.extra("specialization_rhs_gap"), 1e-8);
  const auto s2 = build_manifold("hemisphere_cap", {{"n", 2}, {"theta0", 1.5}});
  EXPECT_THROW(schoen_scalar(s2, build_vector_field(s2, "boost"), {2}, 1e-4), IdentityError);
}

TEST(ConservedCurrent, HomologousFluxOnAnnulus) {
  const auto ann = build_manifold("flat_annulus", {{"r0", 1.0}, {"r1", 2.0}});
  const ScalarField phi{"log r", [](std::span<const Jet> x) { return log(x[0]); }};
  const auto t = stress_energy(phi, ann).tensor;
  const Face s1{0, 1.2, +1}, s2{0, 1.8, +1};
  const auto rot = conserved_current_flux(ann, build_vector_field(ann, "rotation"), t, s1, s2, {2, 3}, 1e-9);
  EXPECT_EQ(rot.verdict, Verdict::pass);
  EXPECT_EQ(rot.extra("killing"), 1.0);
  const auto eul = conserved_current_flux(ann, build_vector_field(ann, "euler"), t, s1, s2, {2, 3}, 1e-9);
  EXPECT_EQ(eul.verdict, Verdict::pass) << eul.abs_residual;
  EXPECT_NEAR(eul.lhs, pi, 1e-10);  // T(r d_r, d_r) = 1/(2r) on a circle of length 2 pi r
  EXPECT_EQ(eul.extra("killing"), 0.0);

  const auto g = conserved_current_flux(ann, build_vector_field(ann, "rotation"), tensor_field("metric", ann), s1, s2,
                                        {2}, 1e-9);
  EXPECT_LT(g.extra("sup_div_current"), 1e-12);

  // The metric is not trace-free, so the Euler field is not admissible for it.
  const auto bad = conserved_current_flux(ann, build_vector_field(ann, "euler"), tensor_field("metric", ann), s1, s2,
                                          {2}, 1e-9);
  EXPECT_EQ(bad.verdict, Verdict::precondition_failed);
}

TEST(Codazzi, LibraryEmbeddings) {
  EXPECT_LT(codazzi_check(build_embedding("unit_sphere"), 100, 1e-10).lhs, 1e-10);
  const auto ell = codazzi_check(build_embedding("ellipsoid", {{"a", 1}, {"b", 1}, {"c", 2}}), 100, 1e-6);
  EXPECT_EQ(ell.verdict, Verdict::pass) << ell.lhs;
  EXPECT_LT(ell.extra("conservation"), 1e-6);
  const auto tor = codazzi_check(build_embedding("torus", {{"R", 2}, {"r", 0.7}}), 100, 1e-6);
  EXPECT_EQ(tor.verdict, Verdict::pass) << tor.lhs;
}

TEST(MeanCurvatureKW, RevolutionImmersions) {
  const auto round = conformal_immersion_revolution(round_profile());
  const auto m = build_manifold("mercator_sphere");
  const auto boost = build_vector_field(m, "boost");
  const auto rot = build_vector_field(m, "rotation");
  const auto r0 = mean_curvature_kw(round, boost, {5, 6}, 1e-4);
  EXPECT_LT(std::abs(r0.lhs), 1e-10);

  const auto prolate = conformal_immersion_revolution(ellipsoid_profile(1.0, 1.5));
  EXPECT_LT(std::abs(mean_curvature_kw(prolate, rot, {6}, 1e-4).lhs), 1e-12);
  const auto r = mean_curvature_kw(prolate, boost, {5, 6, 7}, 1e-4);
  EXPECT_EQ(r.verdict, Verdict::pass) << r.rel_residual;
  EXPECT_GT(r.scale, 0.1);

  const auto gated = mean_curvature_kw(prolate, boost, {6}, 1e-4, 1e-20);
  EXPECT_EQ(gated.verdict, Verdict::precondition_failed);
}

TEST(Verdicts, FinalizeRules) {
  EXPECT_EQ(finalize("a", {make_level(1, 1.0, 1.0 + 1e-8, 0.0, 0.0)}, 1e-6).verdict, Verdict::pass);
  EXPECT_EQ(finalize("b", {make_level(1, 1.0, 1.0 + 1e-8, 0.0, 1e-6)}, 1e-6).verdict, Verdict::fail);
  EXPECT_EQ(finalize("c", {make_level(1, 1.0, 1.1, 0.0, 0.0), make_level(2, 1.0, 1.01, 0.0, 0.0)}, 1e-6).verdict,
            Verdict::grid_limited);
  EXPECT_EQ(finalize("d", {make_level(1, 1.0, 1.01, 0.0, 0.0), make_level(2, 1.0, 1.01, 0.0, 0.0)}, 1e-6).verdict,
            Verdict::fail);
  EXPECT_EQ(finalize("e", {make_level(1, 0.0, 1e-12, 0.0, 0.0)}, 1e-14).verdict, Verdict::pass);
  EXPECT_THROW(finalize("f", {}, 1e-6), IdentityError);
}
