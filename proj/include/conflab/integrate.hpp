#pragma once

// Tensor-product Gauss-Legendre quadrature over chart boxes and coordinate
// faces. Nodes are open (endpoints are never sampled), so polar-coordinate
// degeneracies at the poles need no special handling.

#include <boost/math/special_functions/legendre.hpp>

#include <cmath>
#include <map>
#include <mutex>

#include "conflab/curvature.hpp"

namespace conflab {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxLevel = 8;
inline constexpr std::size_t kMaxNodes = 4'000'000;

/// Gauss-Legendre nodes per coordinate at a refinement level.
inline int nodes_per_axis(int level) { return 4 << level; }

struct GaussRule {
  std::vector<double> x;  // on (-1, 1), ascending
  std::vector<double> w;
};

inline const GaussRule& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  GaussRule r;
  const auto zeros = boost::math::legendre_p_zeros<double>(n);  // nonnegative half
  for (double z : zeros) {
    const double dp = boost::math::legendre_p_prime(n, z);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x.push_back(z);
    r.w.push_back(w);
    if (z != 0.0) {
      r.x.push_back(-z);
      r.w.push_back(w);
    }
  }
  std::vector<std::size_t> order(r.x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.x[a] < r.x[b]; });
  GaussRule sorted;
  for (auto i : order) {
    sorted.x.push_back(r.x[i]);
    sorted.w.push_back(r.w[i]);
  }
  return cache.emplace(n, std::move(sorted)).first->second;
}

enum class IntegrationMode { full, reduced, automatic };

struct QuadratureGrid {
  int level = 0;
  std::vector<Point> nodes;
  std::vector<double> weights;  // coordinate measure (times slice volume when reduced)
  std::optional<Reduction> reduction;
};

namespace detail {

inline void check_level(int level) {
  if (level < 0 || level > kMaxLevel) {
    throw QuadratureError("grid level " + std::to_string(level) + " outside [0, " + std::to_string(kMaxLevel) + "]");
  }
}

inline bool use_reduction(const ManifoldChart& chart, IntegrationMode mode) {
  if (mode == IntegrationMode::full) return false;
  if (mode == IntegrationMode::reduced && !chart.reduction) {
    throw QuadratureError("chart '" + chart.label + "' has no cohomogeneity-one reduction");
  }
  return chart.reduction.has_value();
}

/// Tensor grid over the given axes; other coordinates are taken from `base`.
inline void tensor_nodes(const std::vector<Interval>& box, const std::vector<int>& axes, const Point& base,
                         int per_axis, double scale, std::vector<Point>& nodes, std::vector<double>& weights) {
  const GaussRule& rule = gauss_legendre(per_axis);
  const std::size_t m = rule.x.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    total *= m;
    if (total > kMaxNodes) throw QuadratureError("quadrature grid exceeds the node cap");
  }
  nodes.reserve(nodes.size() + total);
  weights.reserve(weights.size() + total);
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t c = k;
    Point p = base;
    double w = scale;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const std::size_t j = c % m;
      c /= m;
      const Interval& iv = box[axes[i]];
      const double half = 0.5 * iv.width();
      p[axes[i]] = iv.lo + half * (rule.x[j] + 1.0);
      w *= half * rule.w[j];
    }
    nodes.push_back(std::move(p));
    weights.push_back(w);
  }
}

}  // namespace detail

inline QuadratureGrid build_quadrature(const ManifoldChart& chart, int level,
                                       IntegrationMode mode = IntegrationMode::automatic) {
  detail::check_level(level);
  QuadratureGrid grid;
  grid.level = level;
  if (detail::use_reduction(chart, mode)) {
    const Reduction& r = *chart.reduction;
    grid.reduction = r;
    detail::tensor_nodes(chart.box, {r.axis}, r.reference, nodes_per_axis(level), r.slice_volume, grid.nodes,
                         grid.weights);
  } else {
    std::vector<int> axes(chart.dim);
    std::iota(axes.begin(), axes.end(), 0);
    detail::tensor_nodes(chart.box, axes, Point(chart.dim, 0.0), nodes_per_axis(level), 1.0, grid.nodes, grid.weights);
  }
  return grid;
}

/// Quadrature over a sub-box of the chart (e.g. the support of a bump).
inline QuadratureGrid build_quadrature_on(const std::vector<Interval>& box, int level) {
  detail::check_level(level);
  QuadratureGrid grid;
  grid.level = level;
  std::vector<int> axes(box.size());
  std::iota(axes.begin(), axes.end(), 0);
  detail::tensor_nodes(box, axes, Point(box.size(), 0.0), nodes_per_axis(level), 1.0, grid.nodes, grid.weights);
  return grid;
}

/// Product Gauss rule with a fixed node count per axis (level is left at 0).
inline QuadratureGrid build_product_rule(const std::vector<Interval>& box, int per_axis) {
  if (per_axis < 1) throw QuadratureError("product rule needs at least one node per axis");
  QuadratureGrid grid;
  std::vector<int> axes(box.size());
  std::iota(axes.begin(), axes.end(), 0);
  detail::tensor_nodes(box, axes, Point(box.size(), 0.0), per_axis, 1.0, grid.nodes, grid.weights);
  return grid;
}

inline double volume_density(const ManifoldChart& chart, std::span<const double> p) {
  return std::sqrt(metric_value(chart, p).determinant());
}

struct BoundaryGrid {
  Face face;
  int level = 0;
  std::vector<Point> nodes;
  std::vector<double> weights;  // include the induced measure d sigma
  std::vector<Vector> normals;  // outward unit normal nu^a
};

/// Outward unit normal nu^a = s g^{ak} / sqrt(g^{kk}) on the face x_k = const,
/// and the induced area density sqrt(det g restricted to the face).
inline std::pair<Vector, double> face_frame(const ManifoldChart& chart, const Face& face, std::span<const double> p) {
  const Matrix g = metric_value(chart, p);
  const Matrix gi = g.inverse();
  const int k = face.axis;
  Vector nu = gi.col(k) * (face.orientation / std::sqrt(gi(k, k)));
  const int n = chart.dim;
  Matrix h(n - 1, n - 1);
  for (int a = 0, ra = 0; a < n; ++a) {
    if (a == k) continue;
    for (int b = 0, rb = 0; b < n; ++b) {
      if (b == k) continue;
      h(ra, rb++) = g(a, b);
    }
    ++ra;
  }
  return {nu, n == 1 ? 1.0 : std::sqrt(h.determinant())};
}

inline BoundaryGrid build_boundary(const ManifoldChart& chart, const Face& face, int level,
                                   IntegrationMode mode = IntegrationMode::automatic) {
  detail::check_level(level);
  BoundaryGrid grid;
  grid.face = face;
  grid.level = level;
  std::vector<double> coord_w;
  if (detail::use_reduction(chart, mode)) {
    const Reduction& r = *chart.reduction;
    if (r.axis != face.axis) throw QuadratureError("reduced boundary faces must be transverse to the reduction axis");
    Point p = r.reference;
    p[face.axis] = face.value;
    grid.nodes.push_back(p);
    coord_w.push_back(r.slice_volume);
  } else {
    std::vector<int> axes;
    for (int a = 0; a < chart.dim; ++a)
      if (a != face.axis) axes.push_back(a);
    Point base(chart.dim, 0.0);
    base[face.axis] = face.value;
    detail::tensor_nodes(chart.box, axes, base, nodes_per_axis(level), 1.0, grid.nodes, coord_w);
  }
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    auto [nu, ds] = face_frame(chart, face, grid.nodes[i]);
    grid.normals.push_back(std::move(nu));
    grid.weights.push_back(coord_w[i] * ds);
  }
  return grid;
}

using ScalarIntegrand = std::function<double(std::span<const double>)>;

struct IntegralEstimate {
  double value = 0.0;
  double abs_value = 0.0;  // integral of |f|, a natural scale
  double error = 0.0;      // |I(level) - I(level - 1)|; 0 at level 0
  int level = 0;
};

/// Sum_i w_i sqrt(det g)(x_i) f(x_i), summed in node order.
inline std::pair<double, double> integrate_on(const QuadratureGrid& grid, const ManifoldChart& chart,
                                              const ScalarIntegrand& f, bool weighted_by_volume = true) {
  const auto vals = parallel_map<std::pair<double, double>>(grid.nodes.size(), [&](std::size_t i) {
    const double fv = f(grid.nodes[i]);
    if (!std::isfinite(fv)) throw QuadratureError("non-finite integrand at a quadrature node");
    const double dv = weighted_by_volume ? volume_density(chart, grid.nodes[i]) : 1.0;
    return std::pair{fv * dv, std::abs(fv) * dv};
  });
  double s = 0.0, a = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    s += grid.weights[i] * vals[i].first;
    a += grid.weights[i] * vals[i].second;
  }
  return {s, a};
}

/// Reduced integration trusts that f depends on the reduction axis only;
/// spot-check that at a few random frozen-coordinate values.
inline void check_reduced_symmetry(const ManifoldChart& chart, const ScalarIntegrand& f, double rel_tol = 1e-8) {
  const Reduction& r = *chart.reduction;
  std::mt19937_64 rng(1234);
  for (int s = 0; s < 3; ++s) {
    Point ref = r.reference;
    Point moved = r.reference;
    const Interval& iv = chart.box[r.axis];
    std::uniform_real_distribution<double> along(iv.lo + 0.1 * iv.width(), iv.hi - 0.1 * iv.width());
    ref[r.axis] = moved[r.axis] = along(rng);
    for (int a = 0; a < chart.dim; ++a) {
      if (a == r.axis) continue;
      const Interval& ia = chart.box[a];
      std::uniform_real_distribution<double> u(ia.lo + 0.2 * ia.width(), ia.hi - 0.2 * ia.width());
      moved[a] = u(rng);
    }
    const double f0 = f(ref), f1 = f(moved);
    if (std::abs(f0 - f1) > rel_tol * std::max({1.0, std::abs(f0), std::abs(f1)})) {
      throw QuadratureError("integrand is not symmetric under the declared reduction of '" + chart.label + "'");
    }
  }
}

inline IntegralEstimate integrate_scalar(const ManifoldChart& chart, const ScalarIntegrand& f, int level,
                                         IntegrationMode mode = IntegrationMode::automatic) {
  const bool reduced = detail::use_reduction(chart, mode);
  const IntegrationMode m = reduced ? IntegrationMode::reduced : IntegrationMode::full;
  if (reduced) check_reduced_symmetry(chart, f);
  IntegralEstimate out;
  out.level = level;
  std::tie(out.value, out.abs_value) = integrate_on(build_quadrature(chart, level, m), chart, f);
  if (level > 0) {
    const double coarse = integrate_on(build_quadrature(chart, level - 1, m), chart, f).first;
    out.error = std::abs(out.value - coarse);
  }
  return out;
}

/// Sum_i w_i T(X, nu)(x_i) over a face.
inline double boundary_flux(const BoundaryGrid& grid, const SymTensorField& t, const VectorFieldSpec& x) {
  const auto vals = parallel_map<double>(grid.nodes.size(), [&](std::size_t i) {
    return x.components(grid.nodes[i]).dot(t(grid.nodes[i]) * grid.normals[i]);
  });
  double s = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) s += grid.weights[i] * vals[i];
  return s;
}

/// Sum_i w_i J_a nu^a for a covector field J.
inline double boundary_flux(const BoundaryGrid& grid, const std::function<Vector(std::span<const double>)>& covector) {
  const auto vals = parallel_map<double>(grid.nodes.size(),
                                         [&](std::size_t i) { return covector(grid.nodes[i]).dot(grid.normals[i]); });
  double s = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) s += grid.weights[i] * vals[i];
  return s;
}

/// Boundary flux summed over every face of the chart.
inline double total_flux(const ManifoldChart& chart, int level, IntegrationMode mode,
                         const std::function<double(const BoundaryGrid&)>& flux) {
  double s = 0.0;
  for (const Face& f : chart.boundary) s += flux(build_boundary(chart, f, level, mode));
  return s;
}

struct DivergenceCheck {
  double interior = 0.0;
  double boundary = 0.0;
  double residual = 0.0;
  double scale = 0.0;
};

/// |int_M div Y dv - int_dM g(Y, nu) d sigma|.
inline DivergenceCheck divergence_theorem_check(const ManifoldChart& chart, const VectorFieldSpec& y, int level,
                                                IntegrationMode mode = IntegrationMode::automatic) {
  const bool reduced = detail::use_reduction(chart, mode);
  const IntegrationMode m = reduced ? IntegrationMode::reduced : IntegrationMode::full;
  DivergenceCheck out;
  const auto grid = build_quadrature(chart, level, m);
  auto [interior, abs_interior] =
      integrate_on(grid, chart, [&](std::span<const double> p) { return divergence(y, metric_jet(chart, p, 1)); });
  out.interior = interior;
  double abs_boundary = 0.0;
  out.boundary = total_flux(chart, level, m, [&](const BoundaryGrid& bg) {
    double s = 0.0;
    for (std::size_t i = 0; i < bg.nodes.size(); ++i) {
      const Matrix g = metric_value(chart, bg.nodes[i]);
      const double v = y.components(bg.nodes[i]).dot(g * bg.normals[i]);
      s += bg.weights[i] * v;
      abs_boundary += bg.weights[i] * std::abs(v);
    }
    return s;
  });
  out.residual = std::abs(out.interior - out.boundary);
  out.scale = std::max(abs_interior, abs_boundary);
  return out;
}

}  // namespace conflab
