// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Each criterion carries its tolerance and a wall-time budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "conflab/identities.hpp"
#include "conflab/pohozaev_pde.hpp"
#include "conflab/runner.hpp"
#include "conflab/variational.hpp"

using namespace conflab;
using std::numbers::pi;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<void(Outcome&)> run;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

ManifoldChart zonal_sphere(int n) { return build_manifold("perturbed_sphere", {{"n", n}, {"a0", 0.12}, {"b0", -0.05}}); }

ManifoldChart cap3() {
  return build_manifold("hemisphere_cap", {{"n", 3}, {"theta0", 1.9}, {"a0", 0.1}, {"b0", -0.06}});
}

// Each refinement at least halves the residual, or both sit at roundoff.
bool halves(const IdentityReport& r, double floor = 1e-13) {
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    const double prev = r.history[i - 1].rel_residual, cur = r.history[i].rel_residual;
    if (!(cur <= 0.5 * prev || (cur < floor && prev < floor))) return false;
  }
  return true;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------

void curvature_constants(Outcome& o) {
  double worst = 0.0;
  for (int n = 2; n <= 5; ++n) {
    const auto c = build_manifold("round_sphere_polar", {{"n", n}});
    for (const auto& p : random_interior_points(c, 20, 100 + n, 0.05)) {
      const auto s = curvature_suite(c, p);
      const Matrix g = s.metric();
      worst = std::max(worst, std::abs(s.sc() - n * (n - 1)));
      worst = std::max(worst, max_abs(s.ricci_value() - (n - 1) * g));
      if (n > 2) {
        worst = std::max(worst, max_abs(s.schouten_value() - 0.5 * g));
        worst = std::max(worst, std::abs(sigma_k(s, 2).value() - n * (n - 1) / 8.0));
      }
    }
  }
  double flat = 0.0;
  for (const auto& c : {build_manifold("flat_box", {{"n", 3}}), build_manifold("flat_box", {{"n", 5}}),
                        build_manifold("flat_annulus", {{"r0", 0.5}, {"r1", 2.0}})}) {
    for (const auto& p : random_interior_points(c, 20, 3, 0.05)) {
      const auto s = curvature_suite(c, p);
      for (const auto& r : s.riemann) flat = std::max(flat, std::abs(r.value()));
      flat = std::max(flat, std::abs(s.sc()));
    }
  }
  o.detail << "round max err " << sci(worst) << ", flat max " << sci(flat);
  o.require(worst < 1e-10, "round sphere constants < 1e-10");
  o.require(flat < 1e-13, "flat curvature < 1e-13");
}

void calibration(Outcome& o) {
  const auto ann = build_manifold("flat_annulus", {{"r0", 1}, {"r1", 2}});
  const auto a = divergence_theorem_check(ann, build_vector_field(ann, "radial_source"), 3);
  const auto cap = build_manifold("hemisphere_cap", {{"n", 3}, {"theta0", 1.2}});
  const auto c = divergence_theorem_check(cap, build_vector_field(cap, "boost"), 3, IntegrationMode::full);
  o.detail << "annulus " << sci(a.residual) << ", cap " << sci(c.residual);
  o.require(a.residual < 1e-9 && c.residual < 1e-9, "divergence theorem residual < 1e-9");

  const auto s2 = build_manifold("perturbed_sphere", {{"n", 2}, {"a0", 0.1}, {"a1", 0.05}});
  const auto sc = scalar_invariant("scalar_curvature");
  auto f = [&](std::span<const double> p) { return evaluate_invariant(sc, s2, p).value() * std::cos(p[0]); };
  std::vector<double> est;
  for (int level = 1; level <= 4; ++level) est.push_back(integrate_scalar(s2, f, level).error);
  double worst_ratio = 1e300;
  for (std::size_t i = 1; i < est.size(); ++i)
    if (est[i] > 1e-13) worst_ratio = std::min(worst_ratio, est[i - 1] / est[i]);
  o.detail << ", Richardson shrink >= " << (worst_ratio > 1e299 ? std::string("roundoff") : sci(worst_ratio));
  o.require(worst_ratio >= 4.0, "Richardson estimates shrink >= 4x per level");
}

void kazdan_warner_suite(Outcome& o) {
  const std::vector<int> levels{0, 1, 2, 3};
  struct Case {
    ManifoldChart chart;
    std::string key;
    double tol;
  };
  const std::vector<Case> cases{
      {build_manifold("perturbed_sphere", {{"n", 2}, {"a0", 0.1}, {"a1", 0.05}}), "scalar_curvature", 1e-6},
      {zonal_sphere(4), "sigma2", 1e-5},
      {zonal_sphere(4), "q4", 1e-4}};
  for (const auto& c : cases) {
    const auto r = kazdan_warner(c.chart, build_vector_field(c.chart, "boost"),
                                 invariant_quantity(scalar_invariant(c.key), c.chart), levels, c.tol);
    o.detail << c.key << " " << sci(r.rel_residual) << "; ";
    o.require(r.verdict == Verdict::pass, c.key + " passes at " + sci(c.tol));
    o.require(halves(r), c.key + " residual halves per level");
  }
}

void pohozaev_schoen_cap(Outcome& o) {
  const auto c = cap3();
  const auto boost = build_vector_field(c, "boost");
  const auto r = pohozaev_schoen(c, boost, tensor_field("einstein", c), {1, 2, 3}, 1e-4);
  const auto s = schoen_scalar(c, boost, {1, 2, 3}, 1e-4);
  const double gap = std::max(s.extra("specialization_lhs_gap"), s.extra("specialization_rhs_gap"));
  o.detail << "Einstein rel " << sci(r.rel_residual) << " (lhs " << sci(r.lhs) << "), scalar form agreement "
           << sci(gap);
  o.require(r.verdict == Verdict::pass, "general form < 1e-4");
  o.require(s.verdict == Verdict::pass, "scalar form < 1e-4");
  o.require(gap < 1e-8, "side-by-side agreement < 1e-8");
}

void gradient_consistency_suite(Outcome& o) {
  const auto c = zonal_sphere(5);
  const auto probes = zonal_probe_set(c);
  const TraceProbe trace_probe{zonal_bump(c, 0, 1.5, 0.5), slab_support(c, 0, 1.5, 0.5)};
  const auto eh = gradient_consistency(build_action("einstein_hilbert", 5), tensor_field("einstein", c), c, probes, 4, trace_probe);
  const auto gb = gradient_consistency(build_action("gauss_bonnet_4", 5), lovelock_field(c), c, probes, 4, trace_probe);
  o.detail << "EH c=" << eh.fitted_constant << " res " << sci(eh.residual) << " trace " << sci(eh.trace_residual)
           << "; G4 c=" << gb.fitted_constant << " res " << sci(gb.residual) << " trace " << sci(gb.trace_residual);
  o.require(eh.residual < 1e-5 && gb.residual < 1e-5, "gradient residual < 1e-5");
  o.require(eh.trace_residual < 1e-5 && gb.trace_residual < 1e-5, "trace identity < 1e-5");
  o.require(std::abs(eh.fitted_constant + 3.0) < 1e-4, "Einstein-Hilbert constant -(n - 2)");
  o.require(std::abs(gb.fitted_constant - 1.0) < 1e-4, "Gauss-Bonnet constant 1");
}

void conservation_gates(Outcome& o) {
  constexpr int kSamples = 100;
  auto sup = [&](const SymTensorField& b, const ManifoldChart& c) {
    return conservation_residual(b, c, random_interior_points(c, kSamples, 11, 0.05));
  };
  const auto s4 = build_manifold("perturbed_sphere", {{"n", 4}, {"a0", 0.1}, {"a1", 0.05}, {"b2", -0.04}});
  const auto s5 = zonal_sphere(5);
  const double ein = sup(tensor_field("einstein", s4), s4);
  const double g4 = sup(lovelock_field(s5), s5);
  const auto disk = build_manifold("flat_annulus", {{"r0", 0.0}, {"r1", 1.0}});
  const ScalarField phi{"r^2 cos 2t", [](std::span<const Jet> x) { return x[0] * x[0] * cos(2.0 * x[1]); }};
  const double harm = sup(stress_energy(phi, disk).tensor, disk);
  const auto ell = codazzi_check(build_embedding("ellipsoid", {{"a", 1}, {"b", 1}, {"c", 2}}), kSamples, 1e-6);
  const auto tor = codazzi_check(build_embedding("torus", {{"R", 2}, {"r", 0.7}}), kSamples, 1e-6);
  const double cod = std::max(ell.extra("conservation"), tor.extra("conservation"));
  o.detail << "Einstein " << sci(ein) << ", G4 " << sci(g4) << ", harmonic T " << sci(harm) << ", II - n g H "
           << sci(cod) << " (" << kSamples << " samples each)";
  o.require(std::max({ein, g4, harm, cod}) < 1e-6, "all divergences < 1e-6");
}

void homologous_flux(Outcome& o) {
  const auto ann = build_manifold("flat_annulus", {{"r0", 1.0}, {"r1", 2.0}});
  const ScalarField phi{"log r", [](std::span<const Jet> x) { return log(x[0]); }};
  const auto t = stress_energy(phi, ann).tensor;
  const Face s1{0, 1.2, +1}, s2{0, 1.8, +1};
  const auto rot = conserved_current_flux(ann, build_vector_field(ann, "rotation"), t, s1, s2, {2, 3}, 1e-9);
  const auto eul = conserved_current_flux(ann, build_vector_field(ann, "euler"), t, s1, s2, {2, 3}, 1e-9);
  o.detail << "Killing |diff| " << sci(rot.abs_residual) << ", conformal |diff| " << sci(eul.abs_residual)
           << " (flux " << eul.lhs << ", exact pi)";
  o.require(rot.verdict == Verdict::pass && rot.abs_residual < 1e-9, "Killing flux equality < 1e-9");
  o.require(eul.verdict == Verdict::pass && eul.abs_residual < 1e-9, "conformal flux equality < 1e-9");
  o.require(std::abs(eul.lhs - pi) < 1e-9, "Euler flux equals pi");
}

void mean_curvature(Outcome& o) {
  const auto imm = conformal_immersion_revolution(ellipsoid_profile(1.0, 1.5));
  const auto m = build_manifold("mercator_sphere");
  const auto r = mean_curvature_kw(imm, build_vector_field(m, "boost"), {5, 6, 7}, 1e-4, 1e-7);
  o.detail << "conformality " << sci(imm.conformality_residual) << ", KW rel " << sci(r.rel_residual) << " (scale "
           << sci(r.scale) << ")";
  o.require(imm.conformality_residual < 1e-7, "conformality < 1e-7");
  o.require(r.verdict == Verdict::pass, "KW residual < 1e-4");
}

void classical_pohozaev(Outcome& o) {
  const auto cubic = pohozaev_check(radial_solve(3, power_nonlinearity(3.0), 1.0, {1.0, 10.0}), 1e-4);
  const auto lin = pohozaev_check(radial_eigenvalue(3, {8.0, 11.0}), 1e-6);
  const double c35 = critical_coefficient(3, 5), c43 = critical_coefficient(4, 3);
  o.detail << "cubic " << sci(cubic.rel_residual) << ", linear " << sci(lin.rel_residual) << ", critical " << c35
           << " " << c43;
  o.require(cubic.verdict == Verdict::pass, "cubic < 1e-4");
  o.require(lin.verdict == Verdict::pass, "linear < 1e-6");
  o.require(c35 == 0.0 && c43 == 0.0, "critical coefficients exactly 0");
}

void e4_recovery(Outcome& o) {
  // Off-centre point of the stereographic S^5 chart; at the origin the
  // answer is pure trace by symmetry alone.
  const auto c = build_manifold("round_sphere_stereographic", {{"n", 5}});
  const Point p{0.3, -0.2, 0.1, 0.25, -0.15};
  const auto rec = recover_gradient_pointwise(build_action("q4_action", 5), c, p, {0.3}, 5);
  const Matrix g = metric_value(c, p), gi = g.inverse();
  auto norm = [&](const Matrix& a) { return std::sqrt((gi * a * gi * a).trace()); };
  const Matrix tf = trace_free_part(rec.b, g);
  const double tr = metric_trace(rec.b, gi);
  const double ratio = norm(tf) / norm(tr / 5.0 * g);
  o.detail << "trace-free/trace " << sci(ratio) << ", trace " << tr << " (Q4/2 = 6.5625)";
  o.require(ratio < 5e-2, "trace-free ratio < 5e-2");
}

void negative_control(Outcome& o) {
  const std::string text = R"(
[[scenario]]
name = "ricci_on_perturbed_cap"
manifold = "hemisphere_cap"
manifold.n = 3
manifold.theta0 = 1.9
manifold.a0 = 0.1
manifold.b0 = -0.06
vector_field = "boost"
quantity = "ricci"
identity = "pohozaev_schoen"
levels = [2, 3]
tol = 1e-4
)";
  const auto r = run_scenarios(parse_scenarios(text, "negative_control"));
  const auto verdict = r.results.empty() ? Verdict::pass : r.results[0].report.verdict;
  o.detail << "verdict " << to_string(verdict) << ", exit " << r.exit_code();
  o.require(verdict == Verdict::precondition_failed, "precondition failure");
  o.require(r.exit_code() == 2, "exit code 2");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "curvature constants", 5, curvature_constants},
      {2, "divergence-theorem calibration", 10, calibration},
      {3, "Kazdan-Warner (Sc on S2, sigma2 and Q4 on S4)", 120, kazdan_warner_suite},
      {4, "Pohozaev-Schoen on perturbed S3 cap", 60, pohozaev_schoen_cap},
      {5, "gradient consistency (EH, Gauss-Bonnet, trace identity)", 120, gradient_consistency_suite},
      {6, "conservation gates", 60, conservation_gates},
      {7, "homologous flux of conserved currents", 10, homologous_flux},
      {8, "mean-curvature Kazdan-Warner", 30, mean_curvature},
      {9, "classical Pohozaev", 10, classical_pohozaev},
      {10, "pointwise E4 on round S5", 180, e4_recovery},
      {11, "negative control", 60, negative_control},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) {
      o.ok = false;
      o.detail << " [over budget " << c.budget_seconds << " s]";
    }
    failed += !o.ok;
    std::printf("%s %2d %s: %s (%.1f s)\n", o.ok ? "PASS" : "FAIL", c.id, c.title.c_str(), o.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
