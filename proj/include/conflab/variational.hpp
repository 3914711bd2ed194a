#pragma once

// Gateaux derivatives of curvature functionals by central differences with
// Richardson extrapolation, gradient-consistency certification against
// candidate tensors, stress-energy tensors, and pointwise gradient recovery.

#include "conflab/integrate.hpp"

namespace conflab {

class VariationalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// L(g) at a point of a chart.
using Lagrangian = std::function<double(const ManifoldChart&, std::span<const double>)>;

struct ActionFunctional {
  std::string label;
  Lagrangian lagrangian;
  double prefactor = 1.0;
  std::optional<int> weight;  // L(A^2 g) = A^weight L(g)
};

inline Lagrangian invariant_lagrangian(const std::string& key) {
  const ScalarInvariant inv = scalar_invariant(key);
  return [inv](const ManifoldChart& c, std::span<const double> p) { return evaluate_invariant(inv, c, p).value(); };
}

/// (1/2) |d phi|^2_g.
inline Lagrangian scalar_field_lagrangian(const ScalarField& phi) {
  return [phi](const ManifoldChart& c, std::span<const double> p) {
    const Jet f = evaluate(phi, p, 1);
    Vector d(c.dim);
    for (int a = 0; a < c.dim; ++a) d[a] = f.gradient(a);
    return 0.5 * d.dot(metric_value(c, p).inverse() * d);
  };
}

/// Library: volume, einstein_hilbert, gauss_bonnet_4 (2 int S4),
/// q4_action ((n-4)^{-1} int Q4, or int Q4 when n = 4), scalar_field_energy.
inline ActionFunctional build_action(const std::string& name, int n, const std::optional<ScalarField>& phi = {}) {
  if (name == "volume") return {name, invariant_lagrangian("one"), 1.0, 0};
  if (name == "einstein_hilbert") return {name, invariant_lagrangian("scalar_curvature"), 1.0, -2};
  if (name == "gauss_bonnet_4") return {name, invariant_lagrangian("gauss_bonnet_4"), 2.0, -4};
  if (name == "q4_action") return {name, invariant_lagrangian("q4"), n == 4 ? 1.0 : 1.0 / (n - 4), -4};
  if (name == "scalar_field_energy") {
    if (!phi) throw VariationalError("scalar_field_energy needs a scalar field");
    return {name, scalar_field_lagrangian(*phi), 1.0, std::nullopt};
  }
  throw GeometryError("unknown action '" + name + "'");
}

/// (n + weight)^{-1} int V dv for a scalar invariant of known weight.
inline ActionFunctional self_action(const std::string& invariant_key, int n, int weight) {
  if (n + weight == 0) throw VariationalError("critical weight: (n + weight)^{-1} is undefined");
  return {"self(" + invariant_key + ")", invariant_lagrangian(invariant_key), 1.0 / (n + weight), weight};
}

// ---------------------------------------------------------------------------
// Perturbations and bumps

/// Symmetric 2-tensor field h with jets, supported in `support`.
struct PerturbationField {
  std::string label;
  std::function<JetMatrix(std::span<const double>, int)> h;
  std::vector<Interval> support;
  std::optional<int> zonal_axis;  // h is invariant under the chart's reduction
};

/// prod_i (1 - u_i^2)^4 with u_i = (x_i - c_i)/r_i on the box |u_i| < 1, zero
/// outside. Axes with radius 0 are left out of the product.
inline ScalarField product_bump(Point center, std::vector<double> radius) {
  ScalarField f;
  f.label = "bump";
  f.eval = [center, radius](std::span<const Jet> x) {
    Jet b(x[0].layout(), x[0].order(), 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (radius[i] == 0.0) continue;
      const Jet u = (x[i] - center[i]) / radius[i];
      if (std::abs(u.value()) >= 1.0) return Jet(x[0].layout(), x[0].order(), 0.0);
      const Jet s = 1.0 - u * u;
      const Jet s2 = s * s;
      b = b * (s2 * s2);
    }
    return b;
  };
  int active = 0, axis = 0;
  for (std::size_t i = 0; i < radius.size(); ++i)
    if (radius[i] != 0.0) ++active, axis = static_cast<int>(i);
  if (active == 1) f.single_axis = axis;
  return f;
}

inline std::vector<Interval> bump_support(const ManifoldChart& chart, const Point& center,
                                          const std::vector<double>& radius) {
  std::vector<Interval> box = chart.box;
  for (int i = 0; i < chart.dim; ++i) {
    if (radius[i] == 0.0) continue;
    box[i] = Interval{center[i] - radius[i], center[i] + radius[i]};
    if (!(box[i].lo > chart.box[i].lo && box[i].hi < chart.box[i].hi)) {
      throw VariationalError("bump support overlaps the chart boundary");
    }
  }
  return box;
}

/// Bump in x_axis only, constant in the other coordinates.
inline ScalarField zonal_bump(const ManifoldChart& chart, int axis, double center, double radius) {
  Point c(chart.dim, 0.0);
  std::vector<double> r(chart.dim, 0.0);
  c[axis] = center;
  r[axis] = radius;
  return product_bump(c, r);
}

/// h = psi * E with constant coordinate components E.
inline PerturbationField constant_probe(const ManifoldChart&, const ScalarField& psi, const Matrix& e,
                                        const std::vector<Interval>& support) {
  PerturbationField p;
  p.label = "bump * const";
  p.support = support;
  p.zonal_axis = psi.single_axis;
  p.h = [psi, e](std::span<const double> x, int order) {
    const Jet b = evaluate(psi, x, order);
    const int n = static_cast<int>(e.rows());
    JetMatrix h(n, b.layout(), order);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (e(i, j) != 0.0) h(i, j) = b * e(i, j);
    return h;
  };
  return p;
}

/// h = psi * g.
inline PerturbationField metric_probe(const ManifoldChart& chart, const ScalarField& psi,
                                      const std::vector<Interval>& support) {
  PerturbationField p;
  p.label = "bump * g";
  p.support = support;
  p.zonal_axis = psi.single_axis;
  p.h = [psi, chart](std::span<const double> x, int order) {
    JetMatrix g = chart.metric(x, order);
    g.scale(evaluate(psi, x, order));
    return g;
  };
  return p;
}

/// h = L_X g (coordinate formula in jets).
inline PerturbationField lie_probe(const ManifoldChart& chart, const VectorFieldSpec& x,
                                   const std::vector<Interval>& support) {
  PerturbationField p;
  p.label = "L_X g";
  p.support = support;
  p.h = [chart, x](std::span<const double> q, int order) {
    if (order + 1 > kMaxJetOrder) throw JetOrderError("L_X g jets limited by the field order");
    const JetMatrix g = chart.metric(q, order + 1);
    const auto xv = x.jets(q, order + 1);
    const int n = chart.dim;
    JetMatrix h(n, xv[0].layout(), order);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          h(a, b).add_product(xv[c], g(a, b).derivative(c));
          h(a, b).add_product(g(c, b), xv[c].derivative(a));
          h(a, b).add_product(g(a, c), xv[c].derivative(b));
        }
    return h;
  };
  return p;
}

/// g + t h.
inline ManifoldChart perturbed_chart(const ManifoldChart& base, const PerturbationField& h, double t) {
  ManifoldChart c = base;
  c.label = base.label + " + t h";
  c.metric = [m = base.metric, h, t](std::span<const double> p, int order) {
    JetMatrix g = m(p, order);
    JetMatrix d = h.h(p, order);
    d *= t;
    g += d;
    return g;
  };
  if (base.reduction && h.zonal_axis != base.reduction->axis) c.reduction.reset();
  return c;
}

/// e^{2 t omega} g.
inline ManifoldChart conformal_chart(const ManifoldChart& base, const ScalarField& omega, double t) {
  ScalarField scaled = omega;
  scaled.eval = [e = omega.eval, t](std::span<const Jet> x) { return t * e(x); };
  return conformal_rescale(base, scaled);
}

// ---------------------------------------------------------------------------
// Gateaux derivatives

inline const std::vector<double>& default_steps() {
  static const std::vector<double> s{1e-3, 5e-4, 2.5e-4};
  return s;
}

struct GateauxResult {
  double value = 0.0;
  double estimate = 0.0;              // |last two Richardson values|
  std::vector<double> differences;    // plain central differences per step
};

/// Quadrature grid restricted to a support box; reduced when both the chart
/// and the support are zonal.
inline QuadratureGrid support_grid(const ManifoldChart& chart, const std::vector<Interval>& support, int level,
                                   bool reduced) {
  if (reduced) {
    ManifoldChart sub = chart;
    sub.box = support;
    return build_quadrature(sub, level, IntegrationMode::reduced);
  }
  return build_quadrature_on(support, level);
}

inline double action_on(const ActionFunctional& s, const ManifoldChart& chart, const QuadratureGrid& grid) {
  const auto vals = parallel_map<double>(grid.nodes.size(), [&](std::size_t i) {
    return s.lagrangian(chart, grid.nodes[i]) * volume_density(chart, grid.nodes[i]);
  });
  double total = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) total += grid.weights[i] * vals[i];
  return s.prefactor * total;
}

/// Full action prefactor * int L dv over the chart.
inline double action_value(const ActionFunctional& s, const ManifoldChart& chart, int level,
                           IntegrationMode mode = IntegrationMode::automatic) {
  return action_on(s, chart, build_quadrature(chart, level, mode));
}

inline void require_positive_definite(const ManifoldChart& chart, const QuadratureGrid& grid) {
  for (const auto& p : grid.nodes) {
    Eigen::LLT<Matrix> llt(metric_value(chart, p));
    if (llt.info() != Eigen::Success) throw VariationalError("perturbed metric is not positive definite");
  }
}

/// d/dt S(family(t)) at t = 0 on a fixed grid covering where family(t)
/// differs from family(0).
inline GateauxResult gateaux_along(const ActionFunctional& s, const std::function<ManifoldChart(double)>& family,
                                   const QuadratureGrid& grid, const std::vector<double>& steps = default_steps()) {
  if (steps.size() < 2) throw VariationalError("Richardson extrapolation needs at least two steps");
  const double tmax = *std::max_element(steps.begin(), steps.end());
  require_positive_definite(family(tmax), grid);
  require_positive_definite(family(-tmax), grid);
  GateauxResult r;
  for (double t : steps) {
    r.differences.push_back((action_on(s, family(t), grid) - action_on(s, family(-t), grid)) / (2 * t));
  }
  std::vector<double> rich;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    const double q = steps[i - 1] / steps[i];
    rich.push_back((q * q * r.differences[i] - r.differences[i - 1]) / (q * q - 1));
  }
  r.value = rich.back();
  r.estimate = rich.size() > 1 ? std::abs(rich.back() - rich[rich.size() - 2])
                               : std::abs(rich.back() - r.differences.back());
  return r;
}

inline bool zonal_support(const ManifoldChart& chart, const std::optional<int>& axis) {
  return chart.reduction && axis == chart.reduction->axis;
}

/// S'(g)(h).
inline GateauxResult gateaux_total(const ActionFunctional& s, const ManifoldChart& chart, const PerturbationField& h,
                                   int level = 3, const std::vector<double>& steps = default_steps()) {
  const auto grid = support_grid(chart, h.support, level, zonal_support(chart, h.zonal_axis));
  return gateaux_along(s, [&](double t) { return perturbed_chart(chart, h, t); }, grid, steps);
}

/// S^bullet(g)(omega) = d/dt S(e^{2 t omega} g).
inline GateauxResult conformal_gateaux(const ActionFunctional& s, const ManifoldChart& chart, const ScalarField& omega,
                                       const std::vector<Interval>& support, int level = 3,
                                       const std::vector<double>& steps = default_steps()) {
  const auto grid = support_grid(chart, support, level, zonal_support(chart, omega.single_axis));
  return gateaux_along(s, [&](double t) { return conformal_chart(chart, omega, t); }, grid, steps);
}

/// int (h, B) dv = int h_ab B^ab dv over the support of h.
inline double pairing(const ManifoldChart& chart, const PerturbationField& h, const SymTensorField& b, int level = 3) {
  const auto grid = support_grid(chart, h.support, level, zonal_support(chart, h.zonal_axis));
  return integrate_on(grid, chart, [&](std::span<const double> p) {
           const Matrix gi = metric_value(chart, p).inverse();
           const Matrix hv = h.h(p, 0).value();
           return (gi * hv * gi).cwiseProduct(b(p)).sum();
         }).first;
}

/// Support of a bump in x_axis: the chart box with that axis narrowed.
inline std::vector<Interval> slab_support(const ManifoldChart& chart, int axis, double center, double radius) {
  auto s = chart.box;
  s[axis] = {center - radius, center + radius};
  return s;
}

/// Three zonal probes in theta_1 on a polar sphere chart: a pure d theta_1^2
/// direction, a conformal direction, and a mix of the two.
inline std::vector<PerturbationField> zonal_probe_set(const ManifoldChart& chart) {
  if (chart.family != ChartFamily::polar_sphere) throw VariationalError("zonal probes need a polar sphere chart");
  const int n = chart.dim;
  Matrix e0 = Matrix::Zero(n, n);
  e0(0, 0) = 1.0;
  const auto b1 = zonal_bump(chart, 0, 0.9, 0.4);
  const auto b2 = zonal_bump(chart, 0, 1.8, 0.5);
  const auto b3 = zonal_bump(chart, 0, 2.4, 0.35);
  std::vector<PerturbationField> out{constant_probe(chart, b1, e0, slab_support(chart, 0, 0.9, 0.4)),
                                     metric_probe(chart, b2, slab_support(chart, 0, 1.8, 0.5))};
  auto mixed = metric_probe(chart, b3, slab_support(chart, 0, 2.4, 0.35));
  const auto half = constant_probe(chart, b3, e0 * 0.5, mixed.support);
  mixed.label = "bump * (g + E/2)";
  mixed.h = [mh = mixed.h, hh = half.h](std::span<const double> x, int order) {
    JetMatrix a = mh(x, order);
    a += hh(x, order);
    return a;
  };
  out.push_back(mixed);
  return out;
}

struct ProbeRecord {
  std::string label;
  double derivative = 0.0;  // S'(g)(h)
  double pairing = 0.0;     // int (h, B) dv
  double estimate = 0.0;
};

struct GradientConsistency {
  double fitted_constant = 0.0;  // S'(h) ~ c int (h, B)
  double residual = 0.0;         // max_i |S'_i - c P_i| / max_i |S'_i| (absolute when B pairs to 0)
  double trace_residual = -1.0;   // |S^bullet(w) - 2 int w tr(cB)| / |S^bullet(w)|; < 0 when not run
  double trace_lhs = 0.0, trace_rhs = 0.0;
  std::vector<ProbeRecord> probes;
};

struct TraceProbe {
  ScalarField omega;
  std::vector<Interval> support;
};

inline GradientConsistency gradient_consistency(const ActionFunctional& s, const SymTensorField& b,
                                                const ManifoldChart& chart,
                                                const std::vector<PerturbationField>& probes, int level = 3,
                                                const std::optional<TraceProbe>& trace_probe = {}) {
  if (probes.size() < 3) throw VariationalError("gradient consistency needs at least three probes");
  GradientConsistency out;
  double num = 0.0, den = 0.0, scale = 0.0;
  for (const auto& h : probes) {
    const auto d = gateaux_total(s, chart, h, level);
    const double pr = pairing(chart, h, b, level);
    out.probes.push_back({h.label, d.value, pr, d.estimate});
    num += d.value * pr;
    den += pr * pr;
    scale = std::max(scale, std::abs(d.value));
  }
  double pmax = 0.0;
  for (const auto& r : out.probes) pmax = std::max(pmax, std::abs(r.pairing));
  if (den == 0.0 || pmax < 1e-14) {
    // B vanishes on every probe: no constant to fit, so report max |S'| itself.
    out.fitted_constant = 0.0;
    out.residual = scale;
  } else {
    out.fitted_constant = num / den;
    for (const auto& r : out.probes)
      out.residual = std::max(out.residual, std::abs(r.derivative - out.fitted_constant * r.pairing));
    out.residual /= std::max(scale, 1e-300);
  }
  if (trace_probe) {
    const auto lhs = conformal_gateaux(s, chart, trace_probe->omega, trace_probe->support, level);
    const auto grid = support_grid(chart, trace_probe->support, level, zonal_support(chart, trace_probe->omega.single_axis));
    const double rhs = 2.0 * out.fitted_constant *
                       integrate_on(grid, chart, [&](std::span<const double> p) {
                         return evaluate(trace_probe->omega, p, 0).value() *
                                metric_trace(b(p), metric_value(chart, p).inverse());
                       }).first;
    out.trace_lhs = lhs.value;
    out.trace_rhs = rhs;
    out.trace_residual = std::abs(lhs.value - rhs) / std::max({std::abs(lhs.value), std::abs(rhs), 1e-12});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tensors

struct StressEnergy {
  SymTensorField tensor;                                   // T = dphi dphi - (1/2)|dphi|^2 g
  std::function<double(std::span<const double>)> euler_lagrange;  // Delta phi
};

inline StressEnergy stress_energy(const ScalarField& phi, const ManifoldChart& chart) {
  auto jets = [phi, chart](std::span<const double> p, int order) {
    const Jet f = evaluate(phi, p, order + 1);
    const JetMatrix g = chart.metric(p, order);
    const JetMatrix gi = inverse(g, order);
    const int n = chart.dim;
    std::vector<Jet> d;
    for (int a = 0; a < n; ++a) d.push_back(f.derivative(a));
    Jet norm(f.layout(), order);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) norm.add_product(gi(a, b), d[a] * d[b]);
    JetMatrix t(n, f.layout(), order);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        t(a, b) = d[a] * d[b];
        t(a, b).add_product(norm, g(a, b), -0.5);
      }
    return t;
  };
  StressEnergy s;
  s.tensor = SymTensorField{"stress_energy", [jets](std::span<const double> p) { return jets(p, 0).value(); }, jets};
  s.euler_lagrange = [phi, chart](std::span<const double> p) {
    const auto suite = curvature_suite(chart, p, 2, CurvatureDepth::ricci);
    return laplacian(suite, evaluate(phi, p, 2)).value();
  };
  return s;
}

/// Lovelock tensor field with jets.
inline SymTensorField lovelock_field(const ManifoldChart& chart) { return tensor_field("lovelock_g4", chart); }

// ---------------------------------------------------------------------------
// Pointwise gradient recovery

struct RecoveredGradient {
  Matrix b;            // B_ab at the point (indices lowered with g(p))
  double accuracy = 0.0;  // max entry change between the last two widths
  std::vector<Matrix> per_width;
};

/// B_ab(p) from S'(g)(psi e_(ij)) / int psi dv with narrow product bumps.
/// Each direction uses one central difference of step `step` on a fixed
/// Gauss product rule over the bump box; successive widths are combined by
/// Richardson extrapolation (error O(w^2)).
inline RecoveredGradient recover_gradient_pointwise(const ActionFunctional& s, const ManifoldChart& chart,
                                                    const Point& p, const std::vector<double>& widths,
                                                    int nodes_per_axis = 6, double step = 1e-3) {
  const int n = chart.dim;
  if (widths.empty()) throw VariationalError("empty width schedule");
  for (double w : widths) {
    for (int i = 0; i < n; ++i) {
      if (!(p[i] - 3 * w > chart.box[i].lo && p[i] + 3 * w < chart.box[i].hi)) {
        throw VariationalError("recovery bump overlaps the boundary margin");
      }
    }
  }
  const Matrix g = metric_value(chart, p);
  RecoveredGradient out;
  for (double w : widths) {
    const std::vector<double> radius(n, w);
    const ScalarField psi = product_bump(p, radius);
    const auto grid = build_product_rule(bump_support(chart, p, radius), nodes_per_axis);
    const double mass = integrate_on(grid, chart, [&](std::span<const double> x) {
                          return evaluate(psi, x, 0).value();
                        }).first;
    Matrix up(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Matrix e = Matrix::Zero(n, n);
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        const auto h = constant_probe(chart, psi, e, bump_support(chart, p, radius));
        const double d = (action_on(s, perturbed_chart(chart, h, step), grid) -
                          action_on(s, perturbed_chart(chart, h, -step), grid)) / (2 * step);
        up(i, j) = up(j, i) = d / (mass * (i == j ? 1.0 : 2.0));
      }
    out.per_width.push_back(g * up * g);
  }
  if (out.per_width.size() == 1) {
    out.b = out.per_width.back();
  } else {
    const std::size_t k = out.per_width.size();
    const double q = widths[k - 2] / widths[k - 1];
    out.b = (q * q * out.per_width[k - 1] - out.per_width[k - 2]) / (q * q - 1);
    out.accuracy = (out.per_width[k - 1] - out.per_width[k - 2]).cwiseAbs().maxCoeff();
  }
  return out;
}

}  // namespace conflab
