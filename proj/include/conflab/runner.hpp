#pragma once

// Scenario execution and report emission.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "conflab/identities.hpp"
#include "conflab/pohozaev_pde.hpp"
#include "conflab/scenario.hpp"
#include "conflab/variational.hpp"

namespace conflab {

struct ScenarioResult {
  std::string scenario;
  std::string identity;
  IdentityReport report;
  double seconds = 0.0;
};

struct RunReport {
  std::string source;
  std::vector<ScenarioResult> results;  // ordered by scenario name
  std::string error;                    // configuration error; no results when set

  Verdict suite_verdict() const {
    if (!error.empty()) return Verdict::precondition_failed;
    Verdict v = Verdict::pass;
    for (const auto& r : results) {
      if (r.report.verdict == Verdict::precondition_failed) return Verdict::precondition_failed;
      if (r.report.verdict != Verdict::pass) v = Verdict::fail;
    }
    return v;
  }

  /// 0 all pass, 1 identity failure, 2 configuration or precondition error.
  int exit_code() const {
    switch (suite_verdict()) {
      case Verdict::pass: return 0;
      case Verdict::precondition_failed: return 2;
      default: return 1;
    }
  }
};

struct RunOptions {
  std::optional<std::vector<int>> levels;
  std::optional<double> tol;
};

using BoundCheck = std::function<IdentityReport(const std::vector<int>& levels, double tol)>;

namespace detail {

inline void require_no_params(const std::string& what, const Params& p) {
  if (!p.empty()) throw ScenarioError(what + " takes no parameters; got '" + p.begin()->first + "'");
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ScenarioError(msg);
}

inline BoundCheck bind_kazdan_warner(const Scenario& s, const Gates& gates) {
  const auto chart = build_manifold(s.manifold, s.manifold_params);
  require(chart.closed(), "kazdan_warner needs a closed manifold; '" + s.manifold + "' has boundary");
  const auto x = build_vector_field(chart, s.vector_field, s.field_params);
  require_no_params("quantity '" + s.quantity + "'", s.quantity_params);
  const auto v = invariant_quantity(scalar_invariant(s.quantity), chart);
  return [=](const std::vector<int>& levels, double tol) { return kazdan_warner(chart, x, v, levels, tol, gates); };
}

inline BoundCheck bind_pohozaev_schoen(const Scenario& s, const Gates& gates) {
  const auto chart = build_manifold(s.manifold, s.manifold_params);
  require(!chart.closed(), "pohozaev_schoen needs a manifold with boundary");
  const auto x = build_vector_field(chart, s.vector_field, s.field_params);
  require_no_params("tensor '" + s.quantity + "'", s.quantity_params);
  const auto b = tensor_field(s.quantity, chart);
  return [=](const std::vector<int>& levels, double tol) { return pohozaev_schoen(chart, x, b, levels, tol, gates); };
}

inline BoundCheck bind_schoen_scalar(const Scenario& s, const Gates& gates) {
  const auto chart = build_manifold(s.manifold, s.manifold_params);
  require(!chart.closed(), "schoen_scalar needs a manifold with boundary");
  require(chart.dim >= 3, "schoen_scalar needs n >= 3");
  require(s.quantity == "scalar_curvature", "schoen_scalar is stated for quantity 'scalar_curvature'");
  const auto x = build_vector_field(chart, s.vector_field, s.field_params);
  return [=](const std::vector<int>& levels, double tol) { return schoen_scalar(chart, x, levels, tol, gates); };
}

inline BoundCheck bind_conserved_current(const Scenario& s, const Gates& gates) {
  const auto chart = build_manifold(s.manifold, s.manifold_params);
  const auto x = build_vector_field(chart, s.vector_field, s.field_params);
  require_no_params("tensor '" + s.quantity + "'", s.quantity_params);
  const auto b = tensor_field(s.quantity, chart);
  require(s.faces.size() == 2, "conserved_current needs faces = [s1, s2]");
  require(s.face_axis >= 0 && s.face_axis < chart.dim, "face_axis out of range");
  const auto& iv = chart.box[s.face_axis];
  for (double f : s.faces) require(f > iv.lo && f < iv.hi, "faces must lie strictly inside the chart");
  const Face s1{s.face_axis, s.faces[0], +1}, s2{s.face_axis, s.faces[1], +1};
  return [=](const std::vector<int>& levels, double tol) {
    return conserved_current_flux(chart, x, b, s1, s2, levels, tol, gates);
  };
}

inline BoundCheck bind_mean_curvature_kw(const Scenario& s, const Gates& gates) {
  require(s.manifold == "ellipsoid_of_revolution", "mean_curvature_kw needs manifold 'ellipsoid_of_revolution'");
  detail::ParamReader r(s.manifold, s.manifold_params);
  const double a = r.get("a", 1.0), c = r.get("c", 1.5);
  r.finish();
  require(a > 0 && c > 0, "ellipsoid_of_revolution needs a, c > 0");
  require(s.quantity == "mean_curvature", "mean_curvature_kw is stated for quantity 'mean_curvature'");
  detail::ParamReader q("mean_curvature", s.quantity_params);
  const double conformality = q.get("conformality_gate", 1e-7);
  q.finish();
  const auto mercator = build_manifold("mercator_sphere");
  const auto x = build_vector_field(mercator, s.vector_field, s.field_params);
  return [=](const std::vector<int>& levels, double tol) {
    const auto imm = conformal_immersion_revolution(ellipsoid_profile(a, c));
    return mean_curvature_kw(imm, x, levels, tol, conformality, gates);
  };
}

inline BoundCheck bind_codazzi(const Scenario& s) {
  const auto e = build_embedding(s.manifold, s.manifold_params);
  require(s.quantity == "codazzi_tensor", "codazzi is stated for quantity 'codazzi_tensor'");
  require(s.samples > 0, "samples must be positive");
  const int samples = s.samples;
  const auto seed = static_cast<std::uint64_t>(s.seed);
  return [=](const std::vector<int>&, double tol) { return codazzi_check(e, samples, tol, seed); };
}

inline BoundCheck bind_gradient_consistency(const Scenario& s) {
  const auto chart = build_manifold(s.manifold, s.manifold_params);
  require(chart.reduction.has_value(), "gradient_consistency needs a cohomogeneity-one sphere chart");
  require_no_params("action '" + s.quantity + "'", s.quantity_params);
  const auto action = build_action(s.quantity, chart.dim);
  require(!s.tensor.empty(), "gradient_consistency needs tensor = \"...\"");
  const auto b = tensor_field(s.tensor, chart);
  const auto probes = zonal_probe_set(chart);
  const TraceProbe trace_probe{zonal_bump(chart, 0, 1.5, 0.5), slab_support(chart, 0, 1.5, 0.5)};
  const std::string name = "gradient_consistency(" + action.label + ", " + b.label + ")";
  return [=](const std::vector<int>& levels, double tol) {
    std::vector<LevelResult> hist;
    GradientConsistency gc;
    for (int level : levels) {
      gc = gradient_consistency(action, b, chart, probes, level, trace_probe);
      hist.push_back(make_level(level, gc.residual, 0.0, 1.0, 0.0));
    }
    auto r = finalize(name, std::move(hist), tol);
    r.extras = {{"fitted_constant", gc.fitted_constant},
                {"trace_residual", gc.trace_residual},
                {"trace_lhs", gc.trace_lhs},
                {"trace_rhs", gc.trace_rhs}};
    if (r.verdict == Verdict::pass && gc.trace_residual > tol) {
      r.verdict = Verdict::fail;
      r.note = "trace identity residual above tolerance";
    }
    return r;
  };
}

/// Level k runs the shooting solver at ODE tolerance 10^-(4 + 2k).
inline BoundCheck bind_pohozaev(const Scenario& s) {
  require(s.manifold == "unit_ball", "pohozaev needs manifold 'unit_ball'");
  detail::ParamReader m(s.manifold, s.manifold_params);
  const int n = m.get_int("n", 3);
  m.finish();
  require(n >= 1, "unit_ball needs n >= 1");
  detail::ParamReader q(s.quantity, s.quantity_params);
  std::function<RadialSolution(const ShootOptions&)> solve;
  if (s.quantity == "power") {
    const double p = q.get("p", 3.0), lambda = q.get("lambda", 1.0);
    const double lo = q.get("alpha_lo", 1.0), hi = q.get("alpha_hi", 10.0);
    q.finish();
    const auto f = power_nonlinearity(p);
    solve = [=](const ShootOptions& o) { return radial_solve(n, f, lambda, {lo, hi}, o); };
  } else if (s.quantity == "linear_eigenvalue") {
    const double lo = q.get("lambda_lo", 1.0), hi = q.get("lambda_hi", 12.0);
    q.finish();
    solve = [=](const ShootOptions& o) { return radial_eigenvalue(n, {lo, hi}, 1.0, o); };
  } else {
    throw ScenarioError("unknown pohozaev quantity '" + s.quantity + "' (power, linear_eigenvalue)");
  }
  return [=](const std::vector<int>& levels, double tol) {
    std::vector<LevelResult> hist;
    IdentityReport last;
    for (int level : levels) {
      ShootOptions o;
      o.ode_tol = std::pow(10.0, -(4.0 + 2.0 * level));
      last = pohozaev_check(solve(o), tol);
      hist.push_back(make_level(level, last.lhs, last.rhs, last.scale, 0.0));
    }
    auto r = finalize(last.name, std::move(hist), tol);
    r.extras = last.extras;
    return r;
  };
}

inline BoundCheck bind(const Scenario& s) {
  Gates gates;
  gates.conformal = s.gate_tol;
  gates.conservation = s.conservation_tol;
  gates.samples = s.samples;
  gates.seed = static_cast<std::uint64_t>(s.seed);
  const auto& id = s.identity;
  if (id == "kazdan_warner") return bind_kazdan_warner(s, gates);
  if (id == "pohozaev_schoen") return bind_pohozaev_schoen(s, gates);
  if (id == "schoen_scalar") return bind_schoen_scalar(s, gates);
  if (id == "conserved_current") return bind_conserved_current(s, gates);
  if (id == "mean_curvature_kw") return bind_mean_curvature_kw(s, gates);
  if (id == "codazzi") return bind_codazzi(s);
  if (id == "gradient_consistency") return bind_gradient_consistency(s);
  if (id == "pohozaev") return bind_pohozaev(s);
  throw ScenarioError("unknown identity '" + id + "'");
}

}  // namespace detail

/// Resolves every scenario before running any, so a bad key costs no compute.
inline RunReport run_scenarios(const ScenarioFile& file, const RunOptions& opt = {}) {
  RunReport out;
  out.source = file.path;
  std::vector<std::pair<const Scenario*, BoundCheck>> bound;
  try {
    if (opt.levels) check_levels(*opt.levels);
    for (const auto& s : file.scenarios) {
      try {
        bound.emplace_back(&s, detail::bind(s));
      } catch (const std::exception& e) {
        throw ScenarioError(file.path + ":" + std::to_string(s.line) + ": scenario '" + s.name + "': " + e.what());
      }
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    return out;
  }
  std::sort(bound.begin(), bound.end(), [](const auto& a, const auto& b) { return a.first->name < b.first->name; });
  for (const auto& [s, check] : bound) {
    const auto levels = opt.levels.value_or(s->levels);
    const double tol = opt.tol.value_or(s->tol);
    const auto t0 = std::chrono::steady_clock::now();
    ScenarioResult r{s->name, s->identity, {}, 0.0};
    try {
      r.report = check(levels, tol);
    } catch (const std::exception& e) {
      r.report = precondition_failure(s->identity, e.what(), tol);
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.results.push_back(std::move(r));
  }
  return out;
}

inline RunReport run_scenario(const std::string& path, const RunOptions& opt = {}) {
  try {
    return run_scenarios(load_scenarios(path), opt);
  } catch (const ScenarioError& e) {
    RunReport r;
    r.source = path;
    r.error = e.what();
    return r;
  }
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { text, machine };

namespace detail {

inline std::string num17(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quoted(const std::string& s) {
  std::string o = "\"";
  for (char c : s) {
    switch (c) {
      case '"': o += "\\\""; break;
      case '\\': o += "\\\\"; break;
      case '\n': o += "\\n"; break;
      case '\t': o += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          o += buf;
        } else {
          o += c;
        }
    }
  }
  return o + "\"";
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

inline std::string machine_report(const RunReport& r) {
  std::ostringstream o;
  o << "{\n  \"source\": " << quoted(r.source) << ",\n";
  o << "  \"suite_verdict\": " << quoted(to_string(r.suite_verdict())) << ",\n";
  o << "  \"exit_code\": " << r.exit_code() << ",\n";
  if (!r.error.empty()) o << "  \"error\": " << quoted(r.error) << ",\n";
  o << "  \"scenarios\": [";
  for (std::size_t i = 0; i < r.results.size(); ++i) {
    const auto& s = r.results[i];
    const auto& rep = s.report;
    o << (i ? ",\n" : "\n") << "    {\n";
    o << "      \"scenario\": " << quoted(s.scenario) << ",\n";
    o << "      \"identity\": " << quoted(s.identity) << ",\n";
    o << "      \"name\": " << quoted(rep.name) << ",\n";
    o << "      \"lhs\": " << num17(rep.lhs) << ",\n";
    o << "      \"rhs\": " << num17(rep.rhs) << ",\n";
    o << "      \"abs_residual\": " << num17(rep.abs_residual) << ",\n";
    o << "      \"rel_residual\": " << num17(rep.rel_residual) << ",\n";
    o << "      \"scale\": " << num17(rep.scale) << ",\n";
    o << "      \"tolerance\": " << num17(rep.tolerance) << ",\n";
    o << "      \"calibration\": " << num17(rep.calibration) << ",\n";
    o << "      \"verdict\": " << quoted(to_string(rep.verdict)) << ",\n";
    o << "      \"note\": " << quoted(rep.note) << ",\n";
    o << "      \"levels\": [";
    for (std::size_t k = 0; k < rep.history.size(); ++k) o << (k ? ", " : "") << rep.history[k].level;
    o << "],\n      \"history\": [";
    for (std::size_t k = 0; k < rep.history.size(); ++k) {
      const auto& h = rep.history[k];
      o << (k ? ",\n" : "\n") << "        {\"level\": " << h.level << ", \"lhs\": " << num17(h.lhs)
        << ", \"rhs\": " << num17(h.rhs) << ", \"scale\": " << num17(h.scale)
        << ", \"abs_residual\": " << num17(h.abs_residual) << ", \"rel_residual\": " << num17(h.rel_residual)
        << ", \"calibration\": " << num17(h.calibration) << "}";
    }
    o << (rep.history.empty() ? "" : "\n      ") << "],\n      \"extras\": {";
    for (std::size_t k = 0; k < rep.extras.size(); ++k)
      o << (k ? ", " : "") << quoted(rep.extras[k].first) << ": " << num17(rep.extras[k].second);
    o << "}\n    }";
  }
  o << (r.results.empty() ? "" : "\n  ") << "]\n}\n";
  return o.str();
}

inline std::string text_report(const RunReport& r) {
  std::ostringstream o;
  std::size_t w = 8;
  for (const auto& s : r.results) w = std::max(w, s.scenario.size());
  auto pad = [](std::string s, std::size_t n) {
    s.resize(std::max(n, s.size()), ' ');
    return s;
  };
  o << pad("scenario", w) << "  " << pad("identity", 20) << "  " << pad("lhs", 14) << "  " << pad("rhs", 14) << "  "
    << pad("residual", 13) << "  " << pad("tol", 13) << "  " << pad("verdict", 19) << "  time\n";
  for (const auto& s : r.results) {
    const auto& rep = s.report;
    char t[32];
    std::snprintf(t, sizeof t, "%.2fs", s.seconds);
    o << pad(s.scenario, w) << "  " << pad(s.identity, 20) << "  " << pad(sci(rep.lhs), 14) << "  "
      << pad(sci(rep.rhs), 14) << "  " << pad(sci(rep.rel_residual), 13) << "  " << pad(sci(rep.tolerance), 13)
      << "  " << pad(to_string(rep.verdict), 19) << "  " << t << "\n";
    if (!rep.note.empty()) o << "  " << s.scenario << ": " << rep.note << "\n";
  }
  if (!r.error.empty()) o << "error: " << r.error << "\n";
  o << "suite: " << to_string(r.suite_verdict()) << " (" << r.results.size() << " scenarios)\n";
  return o.str();
}

}  // namespace detail

/// Text: aligned table with wall-times. Machine: JSON with a fixed key order,
/// floats at 17 significant digits and no timing, so repeated runs match
/// byte for byte.
inline std::string emit_report(const RunReport& r, ReportFormat format) {
  return format == ReportFormat::text ? detail::text_report(r) : detail::machine_report(r);
}

}  // namespace conflab
