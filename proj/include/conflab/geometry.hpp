#pragma once

// Coordinate charts with analytic metric jets, conformal rescalings, and the
// library of concrete manifolds and vector fields used by the identity checks.

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conflab/tensor.hpp"

namespace conflab {

/// Bad library key, parameter, or evaluation point.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  bool contains_open(double x) const { return x > lo && x < hi; }
};

/// Coordinate hypersurface {x_axis = value}. orientation = +1 when the
/// outward normal points toward increasing x_axis.
struct Face {
  int axis = 0;
  double value = 0.0;
  int orientation = 1;
};

/// Cohomogeneity-one reduction: integrands depend on x_axis only, the other
/// coordinates are frozen at `reference`, and slice_volume is the measure of
/// the frozen directions relative to the density at the reference slice.
struct Reduction {
  int axis = 0;
  Point reference;
  double slice_volume = 1.0;
};

enum class ChartFamily { flat_cartesian, flat_polar, polar_sphere, stereographic, mercator, custom };

/// (point, order K) -> metric components as order-K jets.
using MetricProvider = std::function<JetMatrix(std::span<const double> p, int order)>;

struct ManifoldChart {
  int dim = 0;
  std::vector<Interval> box;
  MetricProvider metric;
  std::vector<Face> boundary;
  std::string label;
  ChartFamily family = ChartFamily::custom;
  std::optional<Reduction> reduction;

  bool closed() const { return boundary.empty(); }

  bool interior(std::span<const double> p) const {
    if (static_cast<int>(p.size()) != dim) return false;
    for (int i = 0; i < dim; ++i) {
      if (!box[i].contains_open(p[i])) return false;
    }
    return true;
  }

  /// Interior, or on a declared boundary face and interior in the other coordinates.
  bool admissible(std::span<const double> p) const {
    if (interior(p)) return true;
    if (static_cast<int>(p.size()) != dim) return false;
    for (const Face& f : boundary) {
      if (p[f.axis] != f.value) continue;
      bool ok = true;
      for (int i = 0; i < dim && ok; ++i) ok = i == f.axis || box[i].contains_open(p[i]);
      if (ok) return true;
    }
    return false;
  }
};

inline constexpr int kMaxMetricOrder = 5;

struct MetricJet {
  int order = 0;
  Point point;
  JetMatrix g;

  int dim() const { return g.dim(); }
  double value(int i, int j) const { return g(i, j).value(); }
  Matrix metric() const { return g.value(); }

  /// d_{axes...} g_ij at the base point.
  double partial(int i, int j, std::initializer_list<int> axes) const {
    return g(i, j).partial(axes);
  }
};

inline MetricJet metric_jet(const ManifoldChart& chart, std::span<const double> p, int order) {
  if (order < 0 || order > kMaxMetricOrder) {
    throw JetOrderError("metric jet order " + std::to_string(order) + " unsupported (max " +
                        std::to_string(kMaxMetricOrder) + ")");
  }
  if (!chart.admissible(p)) {
    throw GeometryError("point is not interior to chart '" + chart.label + "'");
  }
  return MetricJet{order, Point(p.begin(), p.end()), chart.metric(p, order)};
}

inline Matrix metric_value(const ManifoldChart& chart, std::span<const double> p) {
  return metric_jet(chart, p, 0).metric();
}

using JetFunction = std::function<Jet(std::span<const Jet> x)>;
using JetVectorFunction = std::function<std::vector<Jet>(std::span<const Jet> x)>;

/// Analytic scalar with jets to max_order. single_axis is set when the
/// field depends on that coordinate only.
struct ScalarField {
  std::string label;
  JetFunction eval;
  int max_order = kMaxJetOrder;
  std::optional<int> single_axis{};
};

inline Jet evaluate(const ScalarField& f, std::span<const double> p, int order) {
  if (order > f.max_order) {
    throw JetOrderError("scalar field '" + f.label + "' has jets only to order " +
                        std::to_string(f.max_order));
  }
  const auto x = coordinate_jets(p, order);
  return f.eval(x);
}

enum class FieldKind { killing, conformal, generic };

inline const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::killing: return "killing";
    case FieldKind::conformal: return "conformal";
    case FieldKind::generic: return "generic";
  }
  return "?";
}

struct VectorFieldSpec {
  std::string label;
  JetVectorFunction eval;
  FieldKind claimed_kind = FieldKind::generic;

  std::vector<Jet> jets(std::span<const double> p, int order) const {
    const auto x = coordinate_jets(p, order);
    return eval(x);
  }

  Vector components(std::span<const double> p) const {
    const auto v = jets(p, 0);
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].value();
    return out;
  }

  /// jacobian(i, j) = d_j X^i.
  Matrix jacobian(std::span<const double> p) const {
    const auto v = jets(p, 1);
    const int n = static_cast<int>(p.size());
    Matrix out(static_cast<Eigen::Index>(v.size()), n);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (int j = 0; j < n; ++j) out(i, j) = v[i].gradient(j);
    return out;
  }
};

/// e^{2 omega} g with jets by the Leibniz rule.
inline ManifoldChart conformal_rescale(const ManifoldChart& chart, const ScalarField& omega) {
  ManifoldChart out = chart;
  out.label = chart.label + " * exp(2 " + omega.label + ")";
  out.metric = [base = chart.metric, omega](std::span<const double> p, int order) {
    JetMatrix g = base(p, order);
    g.scale(exp(2.0 * evaluate(omega, p, order)));
    return g;
  };
  if (chart.reduction && omega.single_axis != chart.reduction->axis) out.reduction.reset();
  return out;
}

inline ScalarField constant_field(double value, int /*dim*/) {
  return ScalarField{"const(" + std::to_string(value) + ")",
                     [value](std::span<const Jet> x) {
                       return Jet(x[0].layout(), x[0].order(), value);
                     },
                     kMaxJetOrder, std::nullopt};
}

inline ScalarField negated(const ScalarField& f) {
  return ScalarField{"-" + f.label, [e = f.eval](std::span<const Jet> x) { return -e(x); },
                     f.max_order, f.single_axis};
}

/// Ambient coordinates of the unit sphere in polar coordinates
/// (theta_1, ..., theta_{n-1}, phi).
inline std::vector<Jet> sphere_ambient(std::span<const Jet> x) {
  const std::size_t n = x.size();
  std::vector<Jet> amb;
  amb.reserve(n + 1);
  Jet prod(x[0].layout(), x[0].order(), 1.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    amb.push_back(prod * cos(x[i]));
    prod = prod * sin(x[i]);
  }
  amb.push_back(prod * cos(x[n - 1]));
  amb.push_back(prod * sin(x[n - 1]));
  return amb;
}

/// omega = sum_i a_i y_i + sum_i b_i y_i^2 in the ambient coordinates y of S^n.
struct SphereOmegaSpec {
  std::vector<double> linear;
  std::vector<double> quadratic;

  bool zonal() const {
    for (std::size_t i = 1; i < linear.size(); ++i)
      if (linear[i] != 0.0) return false;
    for (std::size_t i = 1; i < quadratic.size(); ++i)
      if (quadratic[i] != 0.0) return false;
    return true;
  }

  bool trivial() const {
    for (double v : linear)
      if (v != 0.0) return false;
    for (double v : quadratic)
      if (v != 0.0) return false;
    return true;
  }
};

inline ScalarField sphere_omega(const SphereOmegaSpec& spec) {
  ScalarField f;
  f.label = "omega";
  f.eval = [spec](std::span<const Jet> x) {
    const auto y = sphere_ambient(x);
    Jet w(x[0].layout(), x[0].order(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double a = i < spec.linear.size() ? spec.linear[i] : 0.0;
      const double b = i < spec.quadratic.size() ? spec.quadratic[i] : 0.0;
      if (a != 0.0) w.add_scaled(y[i], a);
      if (b != 0.0) w.add_product(y[i], y[i], b);
    }
    return w;
  };
  if (spec.zonal()) f.single_axis = 0;
  return f;
}

namespace detail {

inline JetMatrix diagonal_metric(std::span<const Jet> diag) {
  const int n = static_cast<int>(diag.size());
  JetMatrix g(n, diag[0].layout(), diag[0].order());
  for (int i = 0; i < n; ++i) g(i, i) = diag[i];
  return g;
}

inline JetMatrix round_polar_metric(std::span<const double> p, int order) {
  const auto x = coordinate_jets(p, order);
  const std::size_t n = x.size();
  std::vector<Jet> diag;
  diag.reserve(n);
  Jet w(x[0].layout(), order, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    diag.push_back(w);
    if (i + 1 < n) {
      const Jet s = sin(x[i]);
      w = w * s * s;
    }
  }
  return diagonal_metric(diag);
}

inline double sphere_volume(int dim) {
  // |S^dim| = 2 pi^{(dim+1)/2} / Gamma((dim+1)/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * (dim + 1)) / std::tgamma(0.5 * (dim + 1));
}

}  // namespace detail

using Params = std::map<std::string, double>;

namespace detail {

class ParamReader {
 public:
  ParamReader(std::string family, const Params& params) : family_(std::move(family)), params_(params) {}

  double get(const std::string& key, double fallback) {
    used_.push_back(key);
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  int get_int(const std::string& key, int fallback) {
    const double v = get(key, fallback);
    if (v != std::floor(v)) throw GeometryError(family_ + ": parameter '" + key + "' must be an integer");
    return static_cast<int>(v);
  }

  void finish() const {
    for (const auto& [key, _] : params_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw GeometryError(family_ + ": unknown parameter '" + key + "'");
      }
    }
  }

 private:
  std::string family_;
  const Params& params_;
  std::vector<std::string> used_;
};

inline SphereOmegaSpec read_omega(ParamReader& r, int n) {
  SphereOmegaSpec s;
  s.linear.resize(n + 1);
  s.quadratic.resize(n + 1);
  for (int i = 0; i <= n; ++i) {
    s.linear[i] = r.get("a" + std::to_string(i), 0.0);
    s.quadratic[i] = r.get("b" + std::to_string(i), 0.0);
  }
  return s;
}

inline void check_dim(const std::string& family, int n, int lo, int hi) {
  if (n < lo || n > hi) {
    throw GeometryError(family + ": dimension " + std::to_string(n) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

}  // namespace detail

inline ManifoldChart flat_box(int n, double lo = 0.0, double hi = 1.0) {
  detail::check_dim("flat_box", n, 1, kMaxJetDim);
  if (!(hi > lo)) throw GeometryError("flat_box: empty box");
  ManifoldChart c;
  c.dim = n;
  c.box.assign(n, Interval{lo, hi});
  c.label = "flat_box(" + std::to_string(n) + ")";
  c.family = ChartFamily::flat_cartesian;
  c.metric = [n](std::span<const double>, int order) {
    JetMatrix g(n, JetLayout::of(n), order);
    for (int i = 0; i < n; ++i) g(i, i) += 1.0;
    return g;
  };
  for (int i = 0; i < n; ++i) {
    c.boundary.push_back(Face{i, lo, -1});
    c.boundary.push_back(Face{i, hi, +1});
  }
  return c;
}

/// Round unit S^n in polar coordinates (theta_1..theta_{n-1}, phi), optionally
/// rescaled by exp(2 omega) and restricted to theta_1 < theta_max.
inline ManifoldChart polar_sphere(int n, const SphereOmegaSpec& omega = {}, double theta_max = std::numbers::pi) {
  detail::check_dim("polar sphere", n, 2, kMaxJetDim - 1);
  ManifoldChart c;
  c.dim = n;
  c.box.assign(n, Interval{0.0, std::numbers::pi});
  c.box[0].hi = theta_max;
  c.box[n - 1] = Interval{0.0, 2.0 * std::numbers::pi};
  c.family = ChartFamily::polar_sphere;
  c.metric = detail::round_polar_metric;
  c.label = "round_sphere_polar(" + std::to_string(n) + ")";
  Point ref(n, std::numbers::pi / 2);
  c.reduction = Reduction{0, ref, detail::sphere_volume(n - 1)};
  if (theta_max < std::numbers::pi) {
    c.boundary.push_back(Face{0, theta_max, +1});
    c.label = "hemisphere_cap(" + std::to_string(n) + ")";
  }
  if (!omega.trivial()) {
    const std::string base = c.label;
    c = conformal_rescale(c, sphere_omega(omega));
    c.label = "perturbed " + base;
  }
  return c;
}

inline ManifoldChart stereographic_sphere(int n, double extent = 10.0) {
  detail::check_dim("round_sphere_stereographic", n, 2, kMaxJetDim);
  if (!(extent > 0)) throw GeometryError("round_sphere_stereographic: extent must be positive");
  ManifoldChart c = flat_box(n, -extent, extent);
  c.family = ChartFamily::stereographic;
  c.label = "round_sphere_stereographic(" + std::to_string(n) + ")";
  c.metric = [n](std::span<const double> p, int order) {
    const auto x = coordinate_jets(p, order);
    Jet r2(x[0].layout(), order, 1.0);
    for (const auto& xi : x) r2.add_product(xi, xi);
    const Jet f = 4.0 * pow(r2, -2.0);
    JetMatrix g(n, x[0].layout(), order);
    for (int i = 0; i < n; ++i) g(i, i) = f;
    return g;
  };
  return c;
}

inline constexpr double kMercatorCutoff = 20.0;

/// Unit S^2 in Mercator coordinates (t, phi): sech^2 t (dt^2 + dphi^2).
inline ManifoldChart mercator_sphere() {
  ManifoldChart c;
  c.dim = 2;
  c.box = {Interval{-kMercatorCutoff, kMercatorCutoff}, Interval{0.0, 2.0 * std::numbers::pi}};
  c.family = ChartFamily::mercator;
  c.label = "mercator_sphere";
  c.metric = [](std::span<const double> p, int order) {
    const auto x = coordinate_jets(p, order);
    const Jet f = reciprocal(square(cosh(x[0])));
    JetMatrix g(2, x[0].layout(), order);
    g(0, 0) = f;
    g(1, 1) = f;
    return g;
  };
  c.reduction = Reduction{0, Point{0.0, std::numbers::pi / 2}, 2.0 * std::numbers::pi};
  return c;
}

/// Flat plane in polar coordinates (r, phi) on r0 < r < r1; r0 = 0 gives a disk.
inline ManifoldChart flat_annulus(double r0, double r1) {
  if (!(r0 >= 0.0) || !(r1 > r0)) throw GeometryError("flat_annulus: need 0 <= r0 < r1");
  ManifoldChart c;
  c.dim = 2;
  c.box = {Interval{r0, r1}, Interval{0.0, 2.0 * std::numbers::pi}};
  c.family = ChartFamily::flat_polar;
  c.label = "flat_annulus";
  c.metric = [](std::span<const double> p, int order) {
    const auto x = coordinate_jets(p, order);
    JetMatrix g(2, x[0].layout(), order);
    g(0, 0) += 1.0;
    g(1, 1) = x[0] * x[0];
    return g;
  };
  if (r0 > 0.0) c.boundary.push_back(Face{0, r0, -1});
  c.boundary.push_back(Face{0, r1, +1});
  c.reduction = Reduction{0, Point{0.5 * (r0 + r1), std::numbers::pi / 2}, 2.0 * std::numbers::pi};
  return c;
}

/// Library lookup by name; unknown names and out-of-range parameters throw.
inline ManifoldChart build_manifold(const std::string& name, const Params& params = {}) {
  detail::ParamReader r(name, params);
  ManifoldChart c;
  if (name == "flat_box") {
    const int n = r.get_int("n", 2);
    const double lo = r.get("lo", 0.0), hi = r.get("hi", 1.0);
    r.finish();
    return flat_box(n, lo, hi);
  }
  if (name == "round_sphere_polar") {
    const int n = r.get_int("n", 2);
    r.finish();
    return polar_sphere(n);
  }
  if (name == "round_sphere_stereographic") {
    const int n = r.get_int("n", 2);
    const double extent = r.get("extent", 10.0);
    r.finish();
    return stereographic_sphere(n, extent);
  }
  if (name == "perturbed_sphere") {
    const int n = r.get_int("n", 2);
    detail::check_dim(name, n, 2, kMaxJetDim - 1);
    const auto omega = detail::read_omega(r, n);
    r.finish();
    c = polar_sphere(n, omega);
    c.label = "perturbed_sphere(" + std::to_string(n) + ")";
    return c;
  }
  if (name == "mercator_sphere") {
    r.finish();
    return mercator_sphere();
  }
  if (name == "hemisphere_cap") {
    const int n = r.get_int("n", 2);
    detail::check_dim(name, n, 2, kMaxJetDim - 1);
    const double theta0 = r.get("theta0", std::numbers::pi / 2);
    const auto omega = detail::read_omega(r, n);
    r.finish();
    if (!(theta0 > 0.0 && theta0 < std::numbers::pi)) {
      throw GeometryError("hemisphere_cap: theta0 must lie in (0, pi)");
    }
    c = polar_sphere(n, omega, theta0);
    c.label = "hemisphere_cap(" + std::to_string(n) + ")";
    return c;
  }
  if (name == "flat_annulus") {
    const double r0 = r.get("r0", 1.0), r1 = r.get("r1", 2.0);
    r.finish();
    return flat_annulus(r0, r1);
  }
  throw GeometryError("unknown manifold '" + name + "'");
}

// ---------------------------------------------------------------------------
// Vector fields

namespace detail {

inline Jet zero_like(const Jet& x) { return Jet(x.layout(), x.order(), 0.0); }

inline std::vector<Jet> zeros_like(std::span<const Jet> x) {
  std::vector<Jet> v;
  for (const auto& xi : x) v.push_back(zero_like(xi));
  return v;
}

}  // namespace detail

/// Constant field e_axis.
inline VectorFieldSpec translation_field(int axis) {
  return {"translation(" + std::to_string(axis) + ")",
          [axis](std::span<const Jet> x) {
            auto v = detail::zeros_like(x);
            v[axis] += 1.0;
            return v;
          },
          FieldKind::killing};
}

/// x_i d_j - x_j d_i.
inline VectorFieldSpec rotation_field(int i, int j) {
  return {"rotation(" + std::to_string(i) + "," + std::to_string(j) + ")",
          [i, j](std::span<const Jet> x) {
            auto v = detail::zeros_like(x);
            v[j] += x[i];
            v[i] -= x[j];
            return v;
          },
          FieldKind::killing};
}

/// x^i d_i.
inline VectorFieldSpec euler_field() {
  return {"euler", [](std::span<const Jet> x) { return std::vector<Jet>(x.begin(), x.end()); },
          FieldKind::conformal};
}

/// 2 (b.x) x - |x|^2 b.
inline VectorFieldSpec special_conformal_field(std::vector<double> b) {
  return {"special_conformal",
          [b](std::span<const Jet> x) {
            Jet bx = detail::zero_like(x[0]), r2 = detail::zero_like(x[0]);
            for (std::size_t i = 0; i < x.size(); ++i) {
              bx.add_scaled(x[i], b[i]);
              r2.add_product(x[i], x[i]);
            }
            std::vector<Jet> v;
            for (std::size_t i = 0; i < x.size(); ++i) v.push_back(2.0 * bx * x[i] - b[i] * r2);
            return v;
          },
          FieldKind::conformal};
}

/// The last coordinate direction (phi on polar charts).
inline VectorFieldSpec azimuthal_rotation(const std::string& label = "rotation") {
  return {label,
          [](std::span<const Jet> x) {
            auto v = detail::zeros_like(x);
            v.back() += 1.0;
            return v;
          },
          FieldKind::killing};
}

/// -sin(theta_1) d_theta_1: the gradient of the first zonal harmonic.
inline VectorFieldSpec sphere_boost() {
  return {"boost",
          [](std::span<const Jet> x) {
            auto v = detail::zeros_like(x);
            v[0] = -sin(x[0]);
            return v;
          },
          FieldKind::conformal};
}

/// -d_t on the Mercator chart.
inline VectorFieldSpec mercator_boost() {
  return {"boost",
          [](std::span<const Jet> x) {
            auto v = detail::zeros_like(x);
            v[0] -= 1.0;
            return v;
          },
          FieldKind::conformal};
}

inline VectorFieldSpec build_vector_field(const ManifoldChart& chart, const std::string& name,
                                          const Params& params = {}) {
  detail::ParamReader r(name, params);
  const int n = chart.dim;
  auto finish = [&](VectorFieldSpec v) {
    r.finish();
    return v;
  };
  switch (chart.family) {
    case ChartFamily::flat_cartesian:
    case ChartFamily::stereographic: {
      if (name == "translation") {
        const int axis = r.get_int("axis", 0);
        if (axis < 0 || axis >= n) throw GeometryError("translation: axis out of range");
        VectorFieldSpec v = translation_field(axis);
        if (chart.family == ChartFamily::stereographic) v.claimed_kind = FieldKind::conformal;
        return finish(v);
      }
      if (name == "rotation") {
        const int i = r.get_int("i", 0), j = r.get_int("j", 1);
        if (i < 0 || j < 0 || i >= n || j >= n || i == j) throw GeometryError("rotation: bad axes");
        return finish(rotation_field(i, j));
      }
      if (name == "euler") return finish(euler_field());
      if (name == "special_conformal") {
        std::vector<double> b(n);
        for (int i = 0; i < n; ++i) b[i] = r.get("b" + std::to_string(i), i == 0 ? 1.0 : 0.0);
        return finish(special_conformal_field(b));
      }
      if (name == "generic_quadratic") {
        return finish({"generic_quadratic",
                       [](std::span<const Jet> x) {
                         auto v = detail::zeros_like(x);
                         v[0] = x[0] * x[0];
                         return v;
                       },
                       FieldKind::generic});
      }
      break;
    }
    case ChartFamily::polar_sphere: {
      if (name == "rotation") return finish(azimuthal_rotation());
      if (name == "boost") return finish(sphere_boost());
      break;
    }
    case ChartFamily::mercator: {
      if (name == "rotation") return finish(azimuthal_rotation());
      if (name == "boost") return finish(mercator_boost());
      break;
    }
    case ChartFamily::flat_polar: {
      if (name == "rotation") return finish(azimuthal_rotation());
      if (name == "euler") {
        return finish({"euler",
                       [](std::span<const Jet> x) {
                         auto v = detail::zeros_like(x);
                         v[0] = x[0];
                         return v;
                       },
                       FieldKind::conformal});
      }
      if (name == "radial_source") {
        return finish({"radial_source",
                       [](std::span<const Jet> x) {
                         auto v = detail::zeros_like(x);
                         v[0] = reciprocal(x[0]);
                         return v;
                       },
                       FieldKind::generic});
      }
      break;
    }
    case ChartFamily::custom:
      break;
  }
  throw GeometryError("unknown vector field '" + name + "' for chart '" + chart.label + "'");
}

}  // namespace conflab
