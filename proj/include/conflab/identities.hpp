#pragma once

// Integral identities as executable checks with refinement studies:
// Kazdan-Warner obstructions, Pohozaev-Schoen boundary identities,
// conserved currents, Codazzi conservation and the mean-curvature
// obstruction for conformal immersions.

#include "conflab/embedding.hpp"
#include "conflab/integrate.hpp"

namespace conflab {

class IdentityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Verdict { pass, fail, grid_limited, precondition_failed };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::grid_limited: return "grid_limited";
    case Verdict::precondition_failed: return "precondition_failed";
  }
  return "?";
}

inline constexpr double kAbsoluteFloor = 1e-11;
inline constexpr double kScaleFloor = 1e-12;

struct LevelResult {
  int level = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double scale = 0.0;
  double abs_residual = 0.0;
  double rel_residual = 0.0;
  double calibration = 0.0;
};

struct IdentityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_residual = 0.0;
  double rel_residual = 0.0;
  double scale = 0.0;
  double tolerance = 0.0;
  double calibration = 0.0;
  std::vector<LevelResult> history;
  std::vector<std::pair<std::string, double>> extras;
  Verdict verdict = Verdict::fail;
  std::string note;

  double extra(const std::string& key) const {
    for (const auto& [k, v] : extras)
      if (k == key) return v;
    throw IdentityError("report '" + name + "' has no entry '" + key + "'");
  }
};

inline LevelResult make_level(int level, double lhs, double rhs, double scale, double calibration) {
  LevelResult r{level, lhs, rhs, scale, std::abs(lhs - rhs), 0.0, calibration};
  r.rel_residual = r.abs_residual / std::max({std::abs(lhs), std::abs(rhs), scale, kScaleFloor});
  return r;
}

/// Pass iff the residual meets the tolerance and the calibration meets a
/// tenth of it; a failing run whose residual still halved on the last
/// refinement is grid-limited rather than failed.
inline IdentityReport finalize(std::string name, std::vector<LevelResult> history, double tol) {
  if (history.empty()) throw IdentityError("no refinement levels");
  IdentityReport r;
  r.name = std::move(name);
  r.tolerance = tol;
  const LevelResult& last = history.back();
  r.lhs = last.lhs;
  r.rhs = last.rhs;
  r.scale = last.scale;
  r.abs_residual = last.abs_residual;
  r.rel_residual = last.rel_residual;
  r.calibration = last.calibration;
  r.history = std::move(history);
  const bool met = last.rel_residual <= tol || last.abs_residual <= kAbsoluteFloor;
  if (met && last.calibration <= tol / 10) {
    r.verdict = Verdict::pass;
  } else if (r.history.size() > 1 && last.rel_residual <= 0.5 * r.history[r.history.size() - 2].rel_residual) {
    r.verdict = Verdict::grid_limited;
  } else {
    r.verdict = Verdict::fail;
  }
  return r;
}

inline IdentityReport precondition_failure(std::string name, std::string why, double tol) {
  IdentityReport r;
  r.name = std::move(name);
  r.tolerance = tol;
  r.verdict = Verdict::precondition_failed;
  r.note = std::move(why);
  return r;
}

inline void check_levels(const std::vector<int>& levels) {
  if (levels.empty()) throw IdentityError("no refinement levels");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i] <= levels[i - 1]) throw IdentityError("refinement levels must be strictly increasing");
}

// ---------------------------------------------------------------------------
// Gates

struct Gates {
  double conformal = 1e-8;     // sup |L_X g - (2/n) div X g|
  double conservation = 1e-6;  // sup |div B|
  int samples = 100;
  std::uint64_t seed = 7;
};

inline std::vector<Point> gate_points(const ManifoldChart& chart, const Gates& gates) {
  return random_interior_points(chart, gates.samples, gates.seed, 0.05);
}

inline double conservation_residual(const SymTensorField& b, const ManifoldChart& chart, std::span<const Point> pts) {
  std::vector<Point> pv(pts.begin(), pts.end());
  const auto vals = parallel_map<double>(pv.size(), [&](std::size_t i) { return divergence_norm(b, chart, pv[i]); });
  return vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
}

inline std::optional<std::string> conformal_gate(const VectorFieldSpec& x, const ManifoldChart& chart,
                                                 const Gates& gates) {
  const auto pts = gate_points(chart, gates);
  const double r = conformal_killing_residual(x, chart, pts);
  if (r > gates.conformal) {
    return "vector field '" + x.label + "' is not conformal Killing (residual " + std::to_string(r) + ")";
  }
  return std::nullopt;
}

inline std::optional<std::string> conservation_gate(const SymTensorField& b, const ManifoldChart& chart,
                                                    const Gates& gates) {
  const auto pts = gate_points(chart, gates);
  const double r = conservation_residual(b, chart, pts);
  if (r > gates.conservation) {
    return "tensor '" + b.label + "' is not divergence free (sup residual " + std::to_string(r) + ")";
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Scalars with first derivatives

/// V and dV at a point, from jets or a stencil.
struct ScalarQuantity {
  std::string label;
  std::function<std::pair<double, Vector>(std::span<const double>)> eval;
};

inline ScalarQuantity invariant_quantity(const ScalarInvariant& v, const ManifoldChart& chart) {
  return {v.key, [v, chart](std::span<const double> p) {
            const Jet j = evaluate_invariant(v, chart, p, 1);
            Vector d(chart.dim);
            for (int a = 0; a < chart.dim; ++a) d[a] = j.gradient(a);
            return std::pair{j.value(), d};
          }};
}

inline ScalarQuantity mean_curvature_quantity(const EmbeddingSpec& e) {
  return {"H", [e](std::span<const double> p) {
            const Jet h = embedding_jets(e, p, 1).mean_curvature;
            Vector d(e.dim);
            for (int a = 0; a < e.dim; ++a) d[a] = h.gradient(a);
            return std::pair{h.value(), d};
          }};
}

/// V = g^ab B_ab.
inline ScalarQuantity trace_quantity(const SymTensorField& b, const ManifoldChart& chart) {
  if (b.jets) {
    return {"tr " + b.label, [b, chart](std::span<const double> p) {
              const JetMatrix bj = b.jets(p, 1);
              const JetMatrix gi = inverse(chart.metric(p, 1), 1);
              Jet v(bj(0, 0).layout(), 1);
              for (int i = 0; i < chart.dim; ++i)
                for (int j = 0; j < chart.dim; ++j) v.add_product(gi(i, j), bj(i, j));
              Vector d(chart.dim);
              for (int a = 0; a < chart.dim; ++a) d[a] = v.gradient(a);
              return std::pair{v.value(), d};
            }};
  }
  return {"tr " + b.label, [b, chart](std::span<const double> p) {
            auto v = [&](std::span<const double> q) { return metric_trace(b(q), metric_value(chart, q).inverse()); };
            require_stencil(chart, p, kStencilStep);
            Vector d(chart.dim);
            for (int a = 0; a < chart.dim; ++a) d[a] = central_derivative(v, p, a, kStencilStep);
            return std::pair{v(p), d};
          }};
}

inline double divergence_at(const VectorFieldSpec& x, const ManifoldChart& chart, std::span<const double> p) {
  return divergence(x, metric_jet(chart, p, 1));
}

/// B° = B - (tr B / n) g.
inline SymTensorField trace_free_field(const SymTensorField& b, const ManifoldChart& chart) {
  return {b.label + " (trace-free)",
          [b, chart](std::span<const double> p) { return trace_free_part(b(p), metric_value(chart, p)); }, nullptr};
}

inline double calibration_at(const ManifoldChart& chart, const VectorFieldSpec& x, int level, IntegrationMode mode) {
  const auto d = divergence_theorem_check(chart, x, level, mode);
  return d.residual / std::max(d.scale, 1.0);
}

/// T(X, nu) at the point of `face` sharing p's other coordinates.
inline ScalarIntegrand face_integrand(const ManifoldChart& chart, const Face& face, const SymTensorField& t,
                                      const VectorFieldSpec& x) {
  return [&chart, face, t, x](std::span<const double> p) {
    Point q(p.begin(), p.end());
    q[face.axis] = face.value;
    const Vector nu = face_frame(chart, face, q).first;
    return x.components(q).dot(t(q) * nu);
  };
}

/// Reduced quadrature when the chart declares a reduction and every integrand
/// passes the symmetry spot check; full quadrature otherwise.
inline IntegrationMode choose_mode(const ManifoldChart& chart, const std::vector<ScalarIntegrand>& integrands) {
  if (!chart.reduction) return IntegrationMode::full;
  try {
    for (const auto& f : integrands) check_reduced_symmetry(chart, f);
  } catch (const QuadratureError&) {
    return IntegrationMode::full;
  }
  return IntegrationMode::reduced;
}

// ---------------------------------------------------------------------------
// Kazdan-Warner

/// int (div X) V dv = -int L_X V dv = 0 on a closed chart with X conformal.
/// lhs is the divergence form; the Lie form and their sum are extras.
inline IdentityReport kazdan_warner(const ManifoldChart& chart, const VectorFieldSpec& x, const ScalarQuantity& v,
                                    const std::vector<int>& levels, double tol, const Gates& gates = {}) {
  const std::string name = "kazdan_warner(" + v.label + ", " + x.label + ")";
  if (!chart.closed()) throw IdentityError("kazdan_warner needs a closed chart; '" + chart.label + "' has boundary faces");
  check_levels(levels);
  if (auto why = conformal_gate(x, chart, gates)) return precondition_failure(name, *why, tol);
  const ScalarIntegrand div_f = [&](std::span<const double> p) { return divergence_at(x, chart, p) * v.eval(p).first; };
  const ScalarIntegrand lie_f = [&](std::span<const double> p) { return x.components(p).dot(v.eval(p).second); };
  const auto mode = choose_mode(chart, {div_f, lie_f});
  std::vector<LevelResult> hist;
  double lie = 0.0, duality = 0.0;
  for (int level : levels) {
    const auto div_form = integrate_scalar(chart, div_f, level, mode);
    const auto lie_form = integrate_scalar(chart, lie_f, level, mode);
    const double scale = std::max(div_form.abs_value, lie_form.abs_value);
    lie = -lie_form.value;
    duality = std::abs(div_form.value - lie) / std::max(scale, kScaleFloor);
    hist.push_back(
        make_level(level, div_form.value, 0.0, scale, std::max(calibration_at(chart, x, level, mode), duality)));
  }
  auto r = finalize(name, std::move(hist), tol);
  r.extras = {{"lie_form", lie}, {"duality", duality}};
  return r;
}

/// Kazdan-Warner for the mean curvature of a conformal immersion of S^2,
/// against the pullback measure; lhs = int L_X H dv.
inline IdentityReport mean_curvature_kw(const RevolutionImmersion& imm, const VectorFieldSpec& x,
                                        const std::vector<int>& levels, double tol, double conformality_gate = 1e-7,
                                        const Gates& gates = {}) {
  const std::string name = "mean_curvature_kw(" + x.label + ")";
  if (imm.conformality_residual > conformality_gate) {
    return precondition_failure(name, "immersion conformality residual " + std::to_string(imm.conformality_residual) +
                                          " above gate", tol);
  }
  check_levels(levels);
  if (auto why = conformal_gate(x, imm.chart, gates)) return precondition_failure(name, *why, tol);
  const auto h = mean_curvature_quantity(imm.embedding);
  const ScalarIntegrand lie_f = [&](std::span<const double> p) { return x.components(p).dot(h.eval(p).second); };
  const ScalarIntegrand div_f = [&](std::span<const double> p) {
    return divergence_at(x, imm.chart, p) * h.eval(p).first;
  };
  const auto mode = choose_mode(imm.chart, {lie_f, div_f});
  std::vector<LevelResult> hist;
  double div_form = 0.0;
  for (int level : levels) {
    const auto lie = integrate_scalar(imm.chart, lie_f, level, mode);
    div_form = integrate_scalar(imm.chart, div_f, level, mode).value;
    hist.push_back(make_level(level, lie.value, 0.0, lie.abs_value, calibration_at(imm.chart, x, level, mode)));
  }
  auto r = finalize(name, std::move(hist), tol);
  r.extras = {{"divergence_form", div_form}};
  return r;
}

// ---------------------------------------------------------------------------
// Pohozaev-Schoen

struct BoundaryTerms {
  double flux = 0.0;      // sum over faces of int T(X, nu) d sigma
  double abs_flux = 0.0;  // int |T(X, nu)| d sigma
};

inline BoundaryTerms boundary_terms(const ManifoldChart& chart, const SymTensorField& t, const VectorFieldSpec& x,
                                    int level, IntegrationMode mode) {
  BoundaryTerms out;
  for (const Face& f : chart.boundary) {
    const auto bg = build_boundary(chart, f, level, mode);
    for (std::size_t i = 0; i < bg.nodes.size(); ++i) {
      const double v = x.components(bg.nodes[i]).dot(t(bg.nodes[i]) * bg.normals[i]);
      out.flux += bg.weights[i] * v;
      out.abs_flux += bg.weights[i] * std::abs(v);
    }
  }
  return out;
}

/// int L_X V dv = -n int_dM B°(X, nu) d sigma for conserved B and conformal X,
/// with V = tr B. The companion n int_dM B(X, nu) = int V div X is an extra.
inline IdentityReport pohozaev_schoen(const ManifoldChart& chart, const VectorFieldSpec& x, const SymTensorField& b,
                                      const std::vector<int>& levels, double tol, const Gates& gates = {}) {
  const std::string name = "pohozaev_schoen(" + b.label + ", " + x.label + ")";
  if (chart.closed()) throw IdentityError("pohozaev_schoen needs a chart with boundary");
  check_levels(levels);
  if (auto why = conformal_gate(x, chart, gates)) return precondition_failure(name, *why, tol);
  if (auto why = conservation_gate(b, chart, gates)) return precondition_failure(name, *why, tol);
  const int n = chart.dim;
  const auto v = trace_quantity(b, chart);
  const auto b0 = trace_free_field(b, chart);
  const ScalarIntegrand lie_f = [&](std::span<const double> p) { return x.components(p).dot(v.eval(p).second); };
  const ScalarIntegrand vdiv_f = [&](std::span<const double> p) { return v.eval(p).first * divergence_at(x, chart, p); };
  std::vector<ScalarIntegrand> all{lie_f, vdiv_f};
  for (const Face& f : chart.boundary) all.push_back(face_integrand(chart, f, b, x));
  const auto mode = choose_mode(chart, all);
  std::vector<LevelResult> hist;
  double prelim_lhs = 0.0, prelim_rhs = 0.0;
  for (int level : levels) {
    const auto lie = integrate_scalar(chart, lie_f, level, mode);
    const auto bt = boundary_terms(chart, b0, x, level, mode);
    const double scale = std::max(lie.abs_value, n * bt.abs_flux);
    hist.push_back(make_level(level, lie.value, -n * bt.flux, scale, calibration_at(chart, x, level, mode)));
    prelim_lhs = n * boundary_terms(chart, b, x, level, mode).flux;
    prelim_rhs = integrate_scalar(chart, vdiv_f, level, mode).value;
  }
  auto r = finalize(name, std::move(hist), tol);
  r.extras = {{"prelim_lhs", prelim_lhs},
              {"prelim_rhs", prelim_rhs},
              {"prelim_residual", std::abs(prelim_lhs - prelim_rhs) /
                                      std::max({std::abs(prelim_lhs), std::abs(prelim_rhs), r.scale, kScaleFloor})}};
  return r;
}

/// int L_X Sc dv = (2n/(n-2)) int_dM Ric°(X, nu) d sigma. B = 2(P - Jg) has
/// trace -Sc, so the general identity for it is the negative of this one; the
/// side-by-side gaps are extras.
inline IdentityReport schoen_scalar(const ManifoldChart& chart, const VectorFieldSpec& x,
                                    const std::vector<int>& levels, double tol, const Gates& gates = {}) {
  const std::string name = "schoen_scalar(" + x.label + ")";
  const int n = chart.dim;
  if (n < 3) throw IdentityError("schoen_scalar needs n >= 3");
  if (chart.closed()) throw IdentityError("schoen_scalar needs a chart with boundary");
  check_levels(levels);
  if (auto why = conformal_gate(x, chart, gates)) return precondition_failure(name, *why, tol);
  const auto sc = invariant_quantity(scalar_invariant("scalar_curvature"), chart);
  const auto ric0 = trace_free_field(tensor_field("ricci", chart), chart);
  const double k = 2.0 * n / (n - 2);
  const ScalarIntegrand lie_f = [&](std::span<const double> p) { return x.components(p).dot(sc.eval(p).second); };
  std::vector<ScalarIntegrand> all{lie_f};
  for (const Face& f : chart.boundary) all.push_back(face_integrand(chart, f, ric0, x));
  const auto mode = choose_mode(chart, all);
  std::vector<LevelResult> hist;
  for (int level : levels) {
    const auto lie = integrate_scalar(chart, lie_f, level, mode);
    const auto bt = boundary_terms(chart, ric0, x, level, mode);
    hist.push_back(make_level(level, lie.value, k * bt.flux, std::max(lie.abs_value, k * bt.abs_flux),
                              calibration_at(chart, x, level, mode)));
  }
  auto r = finalize(name, std::move(hist), tol);

  const auto ein = tensor_field("einstein", chart);
  SymTensorField twice{"2(P - Jg)", [ein](std::span<const double> p) { return Matrix(2.0 * ein(p)); },
                       [ein](std::span<const double> p, int order) {
                         JetMatrix m = ein.jets(p, order);
                         m *= 2.0;
                         return m;
                       }};
  const auto general = pohozaev_schoen(chart, x, twice, {levels.back()}, tol, gates);
  const double s = std::max(r.scale, kScaleFloor);
  r.extras = {{"general_lhs", general.lhs},
              {"general_rhs", general.rhs},
              {"specialization_lhs_gap", std::abs(r.lhs + general.lhs) / s},
              {"specialization_rhs_gap", std::abs(r.rhs + general.rhs) / s}};
  return r;
}

// ---------------------------------------------------------------------------
// Conserved currents

/// div J for J^a = g^ac B_cb X^b, by jets when B carries them.
inline double current_divergence(const SymTensorField& b, const VectorFieldSpec& x, const ManifoldChart& chart,
                                 std::span<const double> p) {
  const int n = chart.dim;
  if (b.jets) {
    const JetMatrix g = chart.metric(p, 1);
    const JetMatrix gi = inverse(g, 1);
    const JetMatrix bj = b.jets(p, 1);
    const auto xv = x.jets(p, 1);
    double div = 0.0;
    std::vector<double> j0(n);
    for (int a = 0; a < n; ++a) {
      Jet ja(xv[0].layout(), 1);
      for (int c = 0; c < n; ++c) {
        Jet bx(xv[0].layout(), 1);
        for (int d = 0; d < n; ++d) bx.add_product(bj(c, d), xv[d]);
        ja.add_product(gi(a, c), bx);
      }
      div += ja.gradient(a);
      j0[a] = ja.value();
    }
    const Matrix giv = gi.value();
    for (int c = 0; c < n; ++c) {
      double half_dlog = 0.0;
      for (int a = 0; a < n; ++a)
        for (int d = 0; d < n; ++d) half_dlog += 0.5 * giv(a, d) * g(a, d).gradient(c);
      div += half_dlog * j0[c];
    }
    return div;
  }
  auto dens = [&](std::span<const double> q, int a) {
    const Matrix gq = metric_value(chart, q);
    const Vector j = gq.inverse() * (b(q) * x.components(q));
    return std::sqrt(gq.determinant()) * j[a];
  };
  require_stencil(chart, p, kStencilStep);
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += central_derivative([&](std::span<const double> q) { return dens(q, a); }, p, a, kStencilStep);
  return s / volume_density(chart, p);
}

/// Flux of J = B(X, .) through two homologous coordinate hypersurfaces.
inline IdentityReport conserved_current_flux(const ManifoldChart& chart, const VectorFieldSpec& x,
                                             const SymTensorField& b, const Face& sigma1, const Face& sigma2,
                                             const std::vector<int>& levels, double tol, const Gates& gates = {}) {
  const std::string name = "conserved_current(" + b.label + ", " + x.label + ")";
  check_levels(levels);
  if (sigma1.axis != sigma2.axis || sigma1.orientation != sigma2.orientation) {
    throw IdentityError("homologous hypersurfaces must be parallel coordinate faces with matching orientation");
  }
  const auto pts = gate_points(chart, gates);
  const auto kr = killing_residuals(x, chart, pts);
  double trace_sup = 0.0;
  for (const auto& p : pts) trace_sup = std::max(trace_sup, std::abs(metric_trace(b(p), metric_value(chart, p).inverse())));
  const bool killing = kr.killing <= gates.conformal;
  const bool conformal_tracefree = kr.conformal <= gates.conformal && trace_sup <= gates.conservation;
  if (!killing && !conformal_tracefree) {
    return precondition_failure(name, "X is not Killing and (X conformal, B trace-free) fails", tol);
  }
  if (auto why = conservation_gate(b, chart, gates)) return precondition_failure(name, *why, tol);
  double sup_div = 0.0;
  for (const auto& p : pts) sup_div = std::max(sup_div, std::abs(current_divergence(b, x, chart, p)));
  const auto mode = choose_mode(chart, {face_integrand(chart, sigma1, b, x), face_integrand(chart, sigma2, b, x)});
  std::vector<LevelResult> hist;
  for (int level : levels) {
    const auto b1 = build_boundary(chart, sigma1, level, mode);
    const auto b2 = build_boundary(chart, sigma2, level, mode);
    const double i1 = boundary_flux(b1, b, x), i2 = boundary_flux(b2, b, x);
    double abs_flux = 0.0;
    for (const auto* bg : {&b1, &b2})
      for (std::size_t i = 0; i < bg->nodes.size(); ++i)
        abs_flux += bg->weights[i] * std::abs(x.components(bg->nodes[i]).dot(b(bg->nodes[i]) * bg->normals[i]));
    hist.push_back(make_level(level, i1, i2, abs_flux, calibration_at(chart, x, level, mode)));
  }
  auto r = finalize(name, std::move(hist), tol);
  r.extras = {{"sup_div_current", sup_div}, {"killing", killing ? 1.0 : 0.0}};
  return r;
}

// ---------------------------------------------------------------------------
// Codazzi

/// Sup over samples of |div II - n dH| (lhs) and |div(II - n g H)| (extra).
inline IdentityReport codazzi_check(const EmbeddingSpec& e, int samples, double tol, std::uint64_t seed = 7) {
  const auto chart = induced_chart(e);
  const auto pts = random_interior_points(chart, samples, seed, 0.05);
  for (const auto& p : pts) require_immersion(e, p);
  const auto ii = second_form_field(e);
  const auto bt = codazzi_tensor_field(e);
  const auto vals = parallel_map<std::pair<double, double>>(pts.size(), [&](std::size_t i) {
    const auto& p = pts[i];
    const Matrix gi = metric_value(chart, p).inverse();
    const Jet h = embedding_jets(e, p, 1).mean_curvature;
    Vector dh(e.dim);
    for (int a = 0; a < e.dim; ++a) dh[a] = h.gradient(a);
    const Vector contracted = cov_divergence(ii, chart, p) - e.dim * dh;
    return std::pair{g_norm(contracted, gi), divergence_norm(bt, chart, p)};
  });
  double contracted = 0.0, conservation = 0.0;
  for (const auto& [c, d] : vals) {
    contracted = std::max(contracted, c);
    conservation = std::max(conservation, d);
  }
  auto r = finalize("codazzi(" + e.label + ")", {make_level(0, contracted, 0.0, 1.0, 0.0)}, tol);
  r.extras = {{"conservation", conservation}, {"samples", static_cast<double>(samples)}};
  if (conservation > tol) r.verdict = Verdict::fail;
  return r;
}

}  // namespace conflab
