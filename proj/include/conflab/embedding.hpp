#pragma once

// Hypersurfaces of Euclidean space: induced metric, second fundamental form,
// mean curvature, and conformal parametrizations of surfaces of revolution.
//
// Sign convention: II_ab = -(d_a d_b E) . N with N the outward unit normal,
// H = (1/n) g^ab II_ab, so the unit sphere has II = g and H = +1.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "conflab/curvature.hpp"

namespace conflab {

struct EmbeddingSpec {
  std::string label;
  int dim = 2;
  std::vector<Interval> box;
  JetVectorFunction map;  // chart point -> n+1 ambient coordinates
  int normal_sign = 1;    // flips the cofactor normal to make it outward
  ChartFamily family = ChartFamily::custom;
};

/// Jets of the extrinsic geometry at one point. With `order` = r the metric
/// has order r+1 and II, H and N have order r.
struct EmbeddingJets {
  JetMatrix g;
  JetMatrix second_form;
  Jet mean_curvature;
  std::vector<Jet> normal;
};

namespace detail {

inline Jet jet_determinant(const std::vector<std::vector<Jet>>& m) {
  const int n = static_cast<int>(m.size());
  Jet det(m[0][0].layout(), m[0][0].order());
  for (const auto& [perm, sign] : signed_permutations(n)) {
    Jet term = m[0][perm[0]];
    for (int i = 1; i < n; ++i) term = term * m[i][perm[i]];
    det.add_scaled(term, sign);
  }
  return det;
}

inline Matrix differential(const EmbeddingSpec& e, std::span<const double> p) {
  const auto y = e.map(coordinate_jets(p, 1));
  Matrix d(static_cast<Eigen::Index>(y.size()), e.dim);
  for (std::size_t k = 0; k < y.size(); ++k)
    for (int a = 0; a < e.dim; ++a) d(k, a) = y[k].gradient(a);
  return d;
}

}  // namespace detail

/// Smallest over largest singular value of the differential.
inline double immersion_conditioning(const EmbeddingSpec& e, std::span<const double> p) {
  Eigen::JacobiSVD<Matrix> svd(detail::differential(e, p));
  const Vector s = svd.singularValues();
  return s[s.size() - 1] / s[0];
}

inline void require_immersion(const EmbeddingSpec& e, std::span<const double> p) {
  if (!(immersion_conditioning(e, p) > 1e-10)) {
    throw GeometryError("embedding '" + e.label + "' has a rank-deficient differential");
  }
}

inline EmbeddingJets embedding_jets(const EmbeddingSpec& e, std::span<const double> p, int order) {
  const int n = e.dim;
  if (order + 2 > kMaxJetOrder) throw JetOrderError("embedding jets limited by the map order");
  const auto y = e.map(coordinate_jets(p, order + 2));
  if (static_cast<int>(y.size()) != n + 1) throw GeometryError("embedding must map into E^{n+1}");
  // tangent[a][k] = d_a y_k (order r+1)
  std::vector<std::vector<Jet>> tangent(n);
  for (int a = 0; a < n; ++a)
    for (int k = 0; k <= n; ++k) tangent[a].push_back(y[k].derivative(a));

  EmbeddingJets out;
  const auto& layout = y[0].layout();
  out.g = JetMatrix(n, layout, order + 1);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      Jet s(layout, order + 1);
      for (int k = 0; k <= n; ++k) s.add_product(tangent[a][k], tangent[b][k]);
      out.g(a, b) = s;
      out.g(b, a) = s;
    }

  // cofactor normal N_k = (-1)^{k+n} det(tangent matrix without row k)
  std::vector<Jet> raw;
  Jet norm2(layout, order);
  for (int k = 0; k <= n; ++k) {
    std::vector<std::vector<Jet>> minor;
    for (int row = 0; row <= n; ++row) {
      if (row == k) continue;
      std::vector<Jet> r;
      for (int a = 0; a < n; ++a) r.push_back(tangent[a][row].truncated(order));
      minor.push_back(std::move(r));
    }
    Jet c = detail::jet_determinant(minor);
    if ((k + n) % 2) c *= -1.0;
    norm2.add_product(c, c);
    raw.push_back(std::move(c));
  }
  const Jet inv_norm = e.normal_sign * pow(norm2, -0.5);
  for (auto& c : raw) out.normal.push_back(c * inv_norm);

  out.second_form = JetMatrix(n, layout, order);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      Jet s(layout, order);
      for (int k = 0; k <= n; ++k) s.add_product(tangent[a][k].derivative(b), out.normal[k], -1.0);
      out.second_form(a, b) = s;
      out.second_form(b, a) = s;
    }
  const JetMatrix ginv = inverse(out.g, order);
  out.mean_curvature = detail::frobenius(ginv, out.second_form) / static_cast<double>(n);
  return out;
}

struct InducedGeometry {
  MetricJet metric;  // order 3
  Matrix second_form;
  double mean_curvature = 0.0;
  Vector normal;
};

inline InducedGeometry embed_induced(const EmbeddingSpec& e, std::span<const double> p) {
  require_immersion(e, p);
  const EmbeddingJets low = embedding_jets(e, p, 0);
  InducedGeometry out;
  const auto y = e.map(coordinate_jets(p, 4));
  out.metric.order = 3;
  out.metric.point.assign(p.begin(), p.end());
  out.metric.g = JetMatrix(e.dim, y[0].layout(), 3);
  for (int a = 0; a < e.dim; ++a)
    for (int b = 0; b < e.dim; ++b)
      for (int k = 0; k <= e.dim; ++k) out.metric.g(a, b).add_product(y[k].derivative(a), y[k].derivative(b));
  out.second_form = low.second_form.value();
  out.mean_curvature = low.mean_curvature.value();
  out.normal.resize(e.dim + 1);
  for (int k = 0; k <= e.dim; ++k) out.normal[k] = low.normal[k].value();
  return out;
}

/// The chart carrying the pullback metric of an embedding.
inline ManifoldChart induced_chart(const EmbeddingSpec& e) {
  ManifoldChart c;
  c.dim = e.dim;
  c.box = e.box;
  c.label = "induced(" + e.label + ")";
  c.family = e.family;
  c.metric = [e](std::span<const double> p, int order) {
    const auto y = e.map(coordinate_jets(p, order + 1));
    JetMatrix g(e.dim, y[0].layout(), order);
    for (int a = 0; a < e.dim; ++a)
      for (int b = a; b < e.dim; ++b) {
        Jet s(y[0].layout(), order);
        for (std::size_t k = 0; k < y.size(); ++k) s.add_product(y[k].derivative(a), y[k].derivative(b));
        g(a, b) = s;
        g(b, a) = s;
      }
    return g;
  };
  return c;
}

/// Second fundamental form as a tensor field with analytic jets.
inline SymTensorField second_form_field(const EmbeddingSpec& e) {
  auto jets = [e](std::span<const double> p, int order) { return embedding_jets(e, p, order).second_form; };
  return {"II", [jets](std::span<const double> p) { return jets(p, 0).value(); }, jets};
}

/// II - n g H, locally conserved by the contracted Codazzi equation.
inline SymTensorField codazzi_tensor_field(const EmbeddingSpec& e) {
  auto jets = [e](std::span<const double> p, int order) {
    const auto ej = embedding_jets(e, p, order);
    JetMatrix b = ej.second_form;
    for (int a = 0; a < e.dim; ++a)
      for (int c = 0; c < e.dim; ++c) b(a, c).add_product(ej.g(a, c), ej.mean_curvature, -e.dim);
    return b;
  };
  return {"II - n g H", [jets](std::span<const double> p) { return jets(p, 0).value(); }, jets};
}

// ---------------------------------------------------------------------------
// Library

inline EmbeddingSpec ellipsoid_embedding(double a, double b, double c) {
  if (!(a > 0 && b > 0 && c > 0)) throw GeometryError("ellipsoid: semi-axes must be positive");
  return {"ellipsoid",
          2,
          {Interval{0.0, std::numbers::pi}, Interval{0.0, 2 * std::numbers::pi}},
          [a, b, c](std::span<const Jet> x) {
            const Jet s = sin(x[0]);
            return std::vector<Jet>{a * s * cos(x[1]), b * s * sin(x[1]), c * cos(x[0])};
          },
          1,
          ChartFamily::polar_sphere};
}

inline EmbeddingSpec build_embedding(const std::string& name, const Params& params = {}) {
  detail::ParamReader r(name, params);
  if (name == "unit_sphere") {
    r.finish();
    EmbeddingSpec e = ellipsoid_embedding(1, 1, 1);
    e.label = "unit_sphere";
    return e;
  }
  if (name == "ellipsoid") {
    const double a = r.get("a", 1.0), b = r.get("b", 1.0), c = r.get("c", 2.0);
    r.finish();
    return ellipsoid_embedding(a, b, c);
  }
  if (name == "plane") {
    r.finish();
    return {"plane",
            2,
            {Interval{-1, 1}, Interval{-1, 1}},
            [](std::span<const Jet> x) {
              return std::vector<Jet>{x[0], x[1], Jet(x[0].layout(), x[0].order(), 0.0)};
            },
            1,
            ChartFamily::flat_cartesian};
  }
  if (name == "torus") {
    const double big = r.get("R", 2.0), small = r.get("r", 0.5);
    r.finish();
    if (!(big > small && small > 0)) throw GeometryError("torus: need R > r > 0");
    return {"torus",
            2,
            {Interval{0, 2 * std::numbers::pi}, Interval{0, 2 * std::numbers::pi}},
            [big, small](std::span<const Jet> x) {
              const Jet w = big + small * cos(x[1]);
              return std::vector<Jet>{w * cos(x[0]), w * sin(x[0]), small * sin(x[1])};
            },
            1,
            ChartFamily::custom};
  }
  throw GeometryError("unknown embedding '" + name + "'");
}

// ---------------------------------------------------------------------------
// Conformal immersions of surfaces of revolution

/// Meridian (rho(u), z(u)) on u in (0, pi) with rho > 0 inside and rho -> 0
/// at both ends, plus the derivatives d rho/du, dz/du.
struct RevolutionProfile {
  std::string label;
  std::function<Jet(const Jet&)> rho, z, drho, dz;
};

inline RevolutionProfile ellipsoid_profile(double a, double c) {
  if (!(a > 0 && c > 0)) throw GeometryError("ellipsoid profile: semi-axes must be positive");
  return {"ellipsoid_of_revolution", [a](const Jet& u) { return a * sin(u); },
          [c](const Jet& u) { return c * cos(u); }, [a](const Jet& u) { return a * cos(u); },
          [c](const Jet& u) { return -c * sin(u); }};
}

inline RevolutionProfile round_profile() {
  RevolutionProfile p = ellipsoid_profile(1, 1);
  p.label = "round";
  return p;
}

struct RevolutionImmersion {
  EmbeddingSpec embedding;  // over Mercator coordinates (t, phi)
  ManifoldChart chart;      // the pullback metric on the same coordinates
  double conformality_residual = 0.0;
};

namespace detail {

inline double profile_scalar(const std::function<Jet(const Jet&)>& f, double u) {
  return f(Jet(JetLayout::of(1), 0, u)).value();
}

/// q(u) = sqrt(rho'^2 + z'^2) / rho, the isothermal density of the meridian.
inline double isothermal_density(const RevolutionProfile& pr, double u) {
  const double dr = profile_scalar(pr.drho, u), dz = profile_scalar(pr.dz, u);
  return std::hypot(dr, dz) / profile_scalar(pr.rho, u);
}

}  // namespace detail

/// Reparametrizes a surface of revolution by the isothermal coordinate
/// t(u) = -(log tan(u/2) + int_{pi/2}^u (q - 1/sin) dv), matched to the round
/// Mercator coordinate, so the pullback metric is rho^2 (dt^2 + dphi^2).
inline RevolutionImmersion conformal_immersion_revolution(const RevolutionProfile& pr, double quad_tol = 1e-12) {
  using boost::math::quadrature::gauss_kronrod;
  for (double u : {1e-3, 0.5, std::numbers::pi / 2, 2.5, std::numbers::pi - 1e-3}) {
    if (!(detail::profile_scalar(pr.rho, u) > 0)) throw GeometryError("profile: rho must be positive inside");
  }
  for (double u : {0.0, std::numbers::pi}) {
    if (std::abs(detail::profile_scalar(pr.rho, u)) > 1e-12) {
      throw GeometryError("profile is not of sphere type: rho does not vanish at the ends");
    }
  }
  auto correction = [pr](double v) { return detail::isothermal_density(pr, v) - 1.0 / std::sin(v); };
  auto t_of_u = [pr, correction, quad_tol](double u) {
    const double integral = gauss_kronrod<double, 31>::integrate(correction, std::numbers::pi / 2, u, 15, quad_tol);
    return -(std::log(std::tan(0.5 * u)) + integral);
  };
  auto u_of_t = [pr, t_of_u](double t) {
    double u = 2.0 * std::atan(std::exp(-t));
    for (int it = 0; it < 60; ++it) {
      const double step = (t_of_u(u) - t) / -detail::isothermal_density(pr, u);
      double next = u - step;
      if (next <= 0.0) next = 0.5 * u;
      if (next >= std::numbers::pi) next = 0.5 * (u + std::numbers::pi);
      const bool done = std::abs(next - u) <= 1e-15;
      u = next;
      if (done) break;
    }
    return u;
  };

  EmbeddingSpec e;
  e.label = "conformal(" + pr.label + ")";
  e.dim = 2;
  e.box = {Interval{-kMercatorCutoff, kMercatorCutoff}, Interval{0.0, 2 * std::numbers::pi}};
  e.family = ChartFamily::mercator;
  e.map = [pr, u_of_t](std::span<const Jet> x) {
    const auto& layout = x[0].layout();
    const int order = x[0].order();
    const double t0 = x[0].value();
    const double u0 = u_of_t(t0);
    // u(t) by Picard iteration of u' = -rho / sqrt(rho'^2 + z'^2); each
    // sweep fixes one more Taylor order in t.
    Jet u(layout, 0, u0);
    for (int k = 0; k < order; ++k) {
      const Jet f = -pr.rho(u) * pow(square(pr.drho(u)) + square(pr.dz(u)), -0.5);
      u = u0 + f.integral(0);
    }
    const Jet rho = pr.rho(u);
    return std::vector<Jet>{rho * cos(x[1]), rho * sin(x[1]), pr.z(u)};
  };
  // Orient outward: N should point away from the axis at the equator.
  {
    const double p[2] = {0.0, 0.3};
    const auto ej = embedding_jets(e, p, 0);
    const auto y = e.map(coordinate_jets(p, 0));
    double dot = 0;
    for (int k = 0; k < 3; ++k) dot += ej.normal[k].value() * y[k].value();
    if (dot < 0) e.normal_sign = -1;
  }

  RevolutionImmersion out;
  out.embedding = e;
  out.chart = induced_chart(e);
  out.chart.label = e.label;
  out.chart.reduction = Reduction{0, Point{0.0, std::numbers::pi / 2}, 2 * std::numbers::pi};
  double worst = 0.0;
  for (int i = 1; i < 200; ++i) {
    const double p[2] = {-kMercatorCutoff + 2 * kMercatorCutoff * i / 200.0, 1.0};
    const Matrix g = metric_value(out.chart, p);
    const double scale = 0.5 * (g(0, 0) + g(1, 1));
    worst = std::max({worst, std::abs(g(0, 1)) / scale, std::abs(g(0, 0) - g(1, 1)) / scale});
  }
  out.conformality_residual = worst;
  return out;
}

}  // namespace conflab
