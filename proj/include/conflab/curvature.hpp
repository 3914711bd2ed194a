#pragma once

// Curvature of a metric jet, computed entirely in jet arithmetic so that
// derived invariants (J, Q4, ...) come with exact derivatives of their own.
//
// Conventions: R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb,
// R_abcd = g_ae R^e_bcd (round sphere: g_ac g_bd - g_ad g_bc), Ric_bd = R^a_bad,
// P = (Ric - J g)/(n-2), J = Sc/(2(n-1)), Delta = g^ab nabla_a nabla_b.

#include <array>
#include <numeric>
#include <random>

#include "conflab/geometry.hpp"

namespace conflab {

class CurvatureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::size_t idx3(int n, int a, int b, int c) {
  return (static_cast<std::size_t>(a) * n + b) * n + c;
}

inline std::size_t idx4(int n, int a, int b, int c, int d) {
  return ((static_cast<std::size_t>(a) * n + b) * n + c) * n + d;
}

inline Jet jet_zero(const JetMatrix& m, int order) { return Jet(m(0, 0).layout(), order); }

/// A * B for jet matrices.
inline JetMatrix matmul(const JetMatrix& a, const JetMatrix& b) {
  const int n = a.dim();
  const int k = std::min(a.order(), b.order());
  JetMatrix r(n, a(0, 0).layout(), k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) r(i, j).add_product(a(i, l), b(l, j));
  return r;
}

/// Sum_ij A_ij B_ij.
inline Jet frobenius(const JetMatrix& a, const JetMatrix& b) {
  const int n = a.dim();
  Jet s(a(0, 0).layout(), std::min(a.order(), b.order()));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s.add_product(a(i, j), b(i, j));
  return s;
}

/// Contracts slot `slot` of a rank-4 array with ginv (raises that index).
inline std::vector<Jet> raise_slot(const std::vector<Jet>& t, const JetMatrix& ginv, int n, int slot) {
  const int k = std::min(t[0].order(), ginv.order());
  std::vector<Jet> out(t.size(), Jet(t[0].layout(), k));
  std::array<int, 4> i{};
  for (i[0] = 0; i[0] < n; ++i[0])
    for (i[1] = 0; i[1] < n; ++i[1])
      for (i[2] = 0; i[2] < n; ++i[2])
        for (i[3] = 0; i[3] < n; ++i[3]) {
          Jet& o = out[idx4(n, i[0], i[1], i[2], i[3])];
          std::array<int, 4> j = i;
          for (int e = 0; e < n; ++e) {
            j[slot] = e;
            o.add_product(ginv(i[slot], e), t[idx4(n, j[0], j[1], j[2], j[3])]);
          }
        }
  return out;
}

}  // namespace detail

/// Inverse of a jet matrix by X <- A - (A D) X, A = g(0)^{-1}, D = g - g(0).
/// Each sweep fixes one more order since D has no constant term.
inline JetMatrix inverse(const JetMatrix& g, int order) {
  const int n = g.dim();
  const auto& layout = g(0, 0).layout();
  const Matrix a = g.value().inverse();
  JetMatrix m(n, layout, order);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        if (a(i, l) == 0.0) continue;
        Jet d = g(l, j).truncated(order);
        d[0] = 0.0;
        m(i, j).add_scaled(d, a(i, l));
      }
  JetMatrix x(n, layout, order);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) += a(i, j);
  for (int sweep = 0; sweep < order; ++sweep) {
    JetMatrix next(n, layout, order);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        next(i, j) += a(i, j);
        for (int l = 0; l < n; ++l) next(i, j).add_product(m(i, l), x(l, j), -1.0);
      }
    x = std::move(next);
  }
  return x;
}

/// Christoffel symbols G^a_bc (index idx3(a,b,c)) from a metric jet of order
/// K >= 1; result has order K-1.
inline std::vector<Jet> christoffel(const JetMatrix& g, const JetMatrix& ginv) {
  const int n = g.dim();
  const int k = g.order() - 1;
  if (k < 0) throw JetOrderError("Christoffel symbols need metric order >= 1");
  std::vector<Jet> dg;  // d_c g_ab at idx3(c,a,b)
  dg.reserve(static_cast<std::size_t>(n) * n * n);
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) dg.push_back(g(a, b).derivative(c));
  const auto& layout = g(0, 0).layout();
  std::vector<Jet> first(static_cast<std::size_t>(n) * n * n, Jet(layout, k));
  for (int d = 0; d < n; ++d)
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        Jet s = dg[detail::idx3(n, b, c, d)];
        s += dg[detail::idx3(n, c, b, d)];
        s -= dg[detail::idx3(n, d, b, c)];
        s *= 0.5;
        first[detail::idx3(n, d, b, c)] = s;
        first[detail::idx3(n, d, c, b)] = s;
      }
  std::vector<Jet> gamma(first.size(), Jet(layout, k));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        Jet& s = gamma[detail::idx3(n, a, b, c)];
        for (int d = 0; d < n; ++d) s.add_product(ginv(a, d), first[detail::idx3(n, d, b, c)]);
        gamma[detail::idx3(n, a, c, b)] = s;
      }
  return gamma;
}

enum class CurvatureDepth { ricci, riemann };

/// Curvature of one metric jet. With metric order K the Christoffel symbols
/// carry order K-1 and every curvature quantity order K-2.
struct CurvatureSuite {
  int n = 0;
  int metric_order = 0;
  JetMatrix g;
  JetMatrix ginv;
  std::vector<Jet> gamma;    // G^a_bc
  std::vector<Jet> riemann;  // R_abcd; empty at CurvatureDepth::ricci
  JetMatrix ricci;
  Jet scalar;
  JetMatrix schouten;  // empty when n == 2
  Jet J;

  int order() const { return metric_order - 2; }
  bool has_riemann() const { return !riemann.empty(); }

  const Jet& christoffel(int a, int b, int c) const { return gamma[detail::idx3(n, a, b, c)]; }

  const Jet& riem(int a, int b, int c, int d) const {
    if (riemann.empty()) throw CurvatureError("Riemann tensor was not computed");
    return riemann[detail::idx4(n, a, b, c, d)];
  }

  Matrix metric() const { return g.value(); }
  Matrix inverse_metric() const { return ginv.value(); }
  Matrix ricci_value() const { return ricci.value(); }
  Matrix schouten_value() const {
    if (schouten.empty()) throw CurvatureError("Schouten tensor is undefined for n = 2");
    return schouten.value();
  }
  double sc() const { return scalar.value(); }
  double j() const { return J.value(); }
};

inline CurvatureSuite curvature_suite(const MetricJet& jet, CurvatureDepth depth = CurvatureDepth::riemann) {
  const int k = jet.order;
  if (k < 2) throw JetOrderError("curvature needs a metric jet of order >= 2");
  const int n = jet.dim();
  const auto& layout = jet.g(0, 0).layout();
  CurvatureSuite s;
  s.n = n;
  s.metric_order = k;
  s.g = jet.g;
  s.ginv = inverse(jet.g, k - 1);
  s.gamma = christoffel(s.g, s.ginv);

  // dgamma[e] = d_e G^a_bc
  std::vector<std::vector<Jet>> dgamma(n);
  for (int e = 0; e < n; ++e) {
    dgamma[e].reserve(s.gamma.size());
    for (const auto& x : s.gamma) dgamma[e].push_back(x.derivative(e));
  }
  auto G = [&](int a, int b, int c) -> const Jet& { return s.gamma[detail::idx3(n, a, b, c)]; };
  auto dG = [&](int e, int a, int b, int c) -> const Jet& {
    return dgamma[e][detail::idx3(n, a, b, c)];
  };

  s.ricci = JetMatrix(n, layout, k - 2);
  for (int b = 0; b < n; ++b)
    for (int d = b; d < n; ++d) {
      Jet r(layout, k - 2);
      for (int a = 0; a < n; ++a) {
        r += dG(a, a, d, b);
        r -= dG(d, a, a, b);
        for (int e = 0; e < n; ++e) {
          r.add_product(G(a, a, e), G(e, d, b));
          r.add_product(G(a, d, e), G(e, a, b), -1.0);
        }
      }
      s.ricci(b, d) = r;
      s.ricci(d, b) = r;
    }

  if (depth == CurvatureDepth::riemann) {
    std::vector<Jet> up(static_cast<std::size_t>(n) * n * n * n, Jet(layout, k - 2));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = c + 1; d < n; ++d) {
            Jet r = dG(c, a, d, b) - dG(d, a, c, b);
            for (int e = 0; e < n; ++e) {
              r.add_product(G(a, c, e), G(e, d, b));
              r.add_product(G(a, d, e), G(e, c, b), -1.0);
            }
            up[detail::idx4(n, a, b, d, c)] = -r;
            up[detail::idx4(n, a, b, c, d)] = std::move(r);
          }
    s.riemann.assign(up.size(), Jet(layout, k - 2));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            Jet& o = s.riemann[detail::idx4(n, a, b, c, d)];
            for (int e = 0; e < n; ++e) o.add_product(s.g(a, e), up[detail::idx4(n, e, b, c, d)]);
          }
  }

  s.scalar = detail::frobenius(s.ginv, s.ricci);
  s.J = s.scalar / (2.0 * (n - 1));
  if (n > 2) {
    s.schouten = JetMatrix(n, layout, k - 2);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        Jet p = s.ricci(a, b);
        p.add_product(s.J, s.g(a, b), -1.0);
        s.schouten(a, b) = p / static_cast<double>(n - 2);
      }
  }
  return s;
}

inline CurvatureSuite curvature_suite(const ManifoldChart& chart, std::span<const double> p, int metric_order = 2,
                                      CurvatureDepth depth = CurvatureDepth::riemann) {
  return curvature_suite(metric_jet(chart, p, metric_order), depth);
}

// ---------------------------------------------------------------------------
// Algebraic invariants

/// P^ab P_ab.
inline Jet schouten_norm_sq(const CurvatureSuite& s) {
  if (s.schouten.empty()) throw CurvatureError("Schouten tensor is undefined for n = 2");
  const JetMatrix up = detail::matmul(detail::matmul(s.ginv, s.schouten), s.ginv);
  return detail::frobenius(up, s.schouten);
}

inline Jet ricci_norm_sq(const CurvatureSuite& s) {
  const JetMatrix up = detail::matmul(detail::matmul(s.ginv, s.ricci), s.ginv);
  return detail::frobenius(up, s.ricci);
}

/// T_abcd T^abcd for a covariant rank-4 array.
inline Jet norm_sq4(const std::vector<Jet>& t, const JetMatrix& ginv, int n) {
  auto up = t;
  for (int slot = 0; slot < 4; ++slot) up = detail::raise_slot(up, ginv, n, slot);
  Jet s(t[0].layout(), std::min(t[0].order(), ginv.order()));
  for (std::size_t i = 0; i < t.size(); ++i) s.add_product(t[i], up[i]);
  return s;
}

inline Jet riemann_norm_sq(const CurvatureSuite& s) { return norm_sq4(s.riemann, s.ginv, s.n); }

/// sigma_k of the eigenvalues of g^{-1} P, k = 1, 2.
inline Jet sigma_k(const CurvatureSuite& s, int k) {
  if (s.n < 3) throw CurvatureError("sigma_k needs n >= 3");
  if (k == 1) return s.J;
  if (k == 2) return 0.5 * (s.J * s.J - schouten_norm_sq(s));
  throw CurvatureError("sigma_k is implemented for k = 1, 2 only");
}

/// W_abcd = R_abcd - (P_ac g_bd - P_ad g_bc + P_bd g_ac - P_bc g_ad).
inline std::vector<Jet> weyl(const CurvatureSuite& s) {
  if (s.n < 3) throw CurvatureError("Weyl tensor needs n >= 3");
  const int n = s.n;
  std::vector<Jet> w = s.riemann;
  if (w.empty()) throw CurvatureError("Riemann tensor was not computed");
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          Jet& x = w[detail::idx4(n, a, b, c, d)];
          x.add_product(s.schouten(a, c), s.g(b, d), -1.0);
          x.add_product(s.schouten(a, d), s.g(b, c), 1.0);
          x.add_product(s.schouten(b, d), s.g(a, c), -1.0);
          x.add_product(s.schouten(b, c), s.g(a, d), 1.0);
        }
  return w;
}

inline Jet weyl_norm_sq(const CurvatureSuite& s) { return norm_sq4(weyl(s), s.ginv, s.n); }

namespace detail {

/// All permutations of {0..m-1} with their signs.
inline std::vector<std::pair<std::vector<int>, int>> signed_permutations(int m) {
  std::vector<std::pair<std::vector<int>, int>> out;
  std::vector<int> p(m);
  std::iota(p.begin(), p.end(), 0);
  do {
    int inversions = 0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) inversions += p[i] > p[j];
    out.emplace_back(p, inversions % 2 ? -1 : 1);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

/// R_ab^cd.
inline std::vector<Jet> riemann_mixed(const CurvatureSuite& s) {
  auto t = raise_slot(s.riemann, s.ginv, s.n, 2);
  return raise_slot(t, s.ginv, s.n, 3);
}

}  // namespace detail

/// S^(2k) = 2^{-k} delta^{a1 b1 .. ak bk}_{c1 d1 .. ck dk} R_a1b1^c1d1 ... R_akbk^ckdk,
/// normalized so that S^(2) = Sc. The generalized Kronecker delta is expanded
/// as a sum over permutations; upper index tuples with repeats contribute 0.
inline Jet gauss_bonnet_S2k(const CurvatureSuite& s, int k) {
  if (k < 1 || k > 2) throw CurvatureError("S^(2k) is implemented for k = 1, 2");
  if (2 * k > s.n) throw CurvatureError("S^(2k) needs 2k <= n");
  const int n = s.n, m = 2 * k;
  const auto mixed = detail::riemann_mixed(s);
  const auto perms = detail::signed_permutations(m);
  Jet total(mixed[0].layout(), mixed[0].order());
  std::vector<int> upper(m, 0), lower(m);
  const auto count = static_cast<std::size_t>(std::pow(n, m));
  for (std::size_t code = 0; code < count; ++code) {
    std::size_t c = code;
    for (int i = 0; i < m; ++i) {
      upper[i] = static_cast<int>(c % n);
      c /= n;
    }
    bool distinct = true;
    for (int i = 0; i < m && distinct; ++i)
      for (int j = i + 1; j < m; ++j) distinct = distinct && upper[i] != upper[j];
    if (!distinct) continue;
    for (const auto& [perm, sign] : perms) {
      for (int i = 0; i < m; ++i) lower[perm[i]] = upper[i];
      const Jet& r1 = mixed[detail::idx4(n, upper[0], upper[1], lower[0], lower[1])];
      if (k == 1) {
        total.add_scaled(r1, sign);
      } else {
        total.add_product(r1, mixed[detail::idx4(n, upper[2], upper[3], lower[2], lower[3])], sign);
      }
    }
  }
  return total * std::pow(0.5, k);
}

// ---------------------------------------------------------------------------
// Differential invariants

/// Delta f = g^ab (d_a d_b f - G^c_ab d_c f) for a jet f of order >= 2.
inline Jet laplacian(const CurvatureSuite& s, const Jet& f) {
  if (f.order() < 2) throw JetOrderError("Laplacian needs a jet of order >= 2");
  const int n = s.n;
  std::vector<Jet> df;
  for (int c = 0; c < n; ++c) df.push_back(f.derivative(c));
  Jet out(f.layout(), f.order() - 2);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Jet h = df[a].derivative(b);
      for (int c = 0; c < n; ++c) h.add_product(s.christoffel(c, a, b), df[c], -1.0);
      out.add_product(s.ginv(a, b), h);
    }
  return out;
}

/// Q4 = (n/2) J^2 - 2 |P|^2 - Delta J; needs metric order >= 4.
inline Jet q4(const CurvatureSuite& s) {
  if (s.n < 3) throw CurvatureError("Q4 needs n >= 3");
  if (s.metric_order < 4) throw JetOrderError("Q4 needs a metric jet of order >= 4");
  Jet q = (0.5 * s.n) * s.J * s.J;
  q.add_scaled(schouten_norm_sq(s), -2.0);
  q -= laplacian(s, s.J);
  return q;
}

// ---------------------------------------------------------------------------
// Tensors

/// Paper-convention Einstein tensor P - J g.
inline JetMatrix einstein_tensor(const CurvatureSuite& s) {
  JetMatrix e = s.schouten;
  if (e.empty()) throw CurvatureError("Einstein tensor P - Jg needs n >= 3");
  for (int a = 0; a < s.n; ++a)
    for (int b = 0; b < s.n; ++b) e(a, b).add_product(s.J, s.g(a, b), -1.0);
  return e;
}

/// Closed-form gradient of 2 * integral S^(4): G4 = -2 H with the
/// Lanczos-Lovelock tensor
/// H_ab = 2 (Sc R_ab - 2 R_ac R^c_b - 2 R_acbd R^cd + R_a^cde R_bcde) - 1/2 g_ab S4.
inline JetMatrix lovelock_g4(const CurvatureSuite& s) {
  const int n = s.n;
  if (!s.has_riemann()) throw CurvatureError("Lovelock tensor needs the Riemann tensor");
  if (n < 4) throw CurvatureError("Lovelock tensor G4 needs n >= 4");
  const auto& layout = s.g(0, 0).layout();
  const int k = s.order();
  const JetMatrix ric_mixed = detail::matmul(s.ginv, s.ricci);                 // R^c_b
  const JetMatrix ric_up = detail::matmul(ric_mixed, s.ginv);                 // R^cd
  auto riem_up = s.riemann;                                                   // R_a^cde
  for (int slot = 1; slot < 4; ++slot) riem_up = detail::raise_slot(riem_up, s.ginv, n, slot);
  const Jet s4 = gauss_bonnet_S2k(s, 2);
  JetMatrix g4(n, layout, k);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      Jet h(layout, k);
      h.add_product(s.scalar, s.ricci(a, b));
      for (int c = 0; c < n; ++c) {
        h.add_product(s.ricci(a, c), ric_mixed(c, b), -2.0);
        for (int d = 0; d < n; ++d) {
          h.add_product(s.riem(a, c, b, d), ric_up(c, d), -2.0);
          for (int e = 0; e < n; ++e)
            h.add_product(riem_up[detail::idx4(n, a, c, d, e)], s.riem(b, c, d, e));
        }
      }
      h *= 2.0;
      h.add_product(s.g(a, b), s4, -0.5);
      h *= -2.0;
      g4(a, b) = h;
      g4(b, a) = h;
    }
  return g4;
}

/// B - (1/n) g tr_g B.
inline Matrix trace_free_part(const Matrix& b, const Matrix& g) {
  const Matrix ginv = g.inverse();
  return b - (ginv.cwiseProduct(b).sum() / static_cast<double>(g.rows())) * g;
}

inline double metric_trace(const Matrix& b, const Matrix& ginv) { return ginv.cwiseProduct(b).sum(); }

// ---------------------------------------------------------------------------
// Symmetric tensor fields and divergences

/// Symmetric 2-tensor evaluator; `jets`, when present, gives analytic jets.
struct SymTensorField {
  std::string label;
  std::function<Matrix(std::span<const double>)> eval;
  std::function<JetMatrix(std::span<const double>, int)> jets;

  Matrix operator()(std::span<const double> p) const { return eval(p); }
};

/// Central 4th-order stencil derivative of f along `axis`.
template <class F>
auto central_derivative(F&& f, std::span<const double> p, int axis, double h) {
  Point q(p.begin(), p.end());
  auto at = [&](double off) {
    q[axis] = p[axis] + off;
    return f(std::span<const double>(q));
  };
  using R = decltype(at(0.0));
  const R r = (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
  return r;
}

inline void require_stencil(const ManifoldChart& chart, std::span<const double> p, double h) {
  for (int i = 0; i < chart.dim; ++i) {
    if (!(p[i] - 2 * h > chart.box[i].lo && p[i] + 2 * h < chart.box[i].hi)) {
      throw GeometryError("finite-difference stencil leaves the chart box");
    }
  }
}

inline constexpr double kStencilStep = 1e-3;

/// (nabla^a B)_b = g^ac (d_c B_ab - G^d_ca B_db - G^d_cb B_ad). Uses the
/// field's jets when available, otherwise a 4th-order stencil.
inline Vector cov_divergence(const SymTensorField& b, const ManifoldChart& chart, std::span<const double> p,
                             double h = kStencilStep) {
  const int n = chart.dim;
  const MetricJet mj = metric_jet(chart, p, 1);
  const JetMatrix ginv = inverse(mj.g, 0);
  const auto gamma = christoffel(mj.g, ginv);
  Matrix bv;
  std::vector<Matrix> db(n);
  if (b.jets) {
    const JetMatrix bj = b.jets(p, 1);
    bv = bj.value();
    for (int c = 0; c < n; ++c) {
      db[c].resize(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) db[c](i, j) = bj(i, j).gradient(c);
    }
  } else {
    require_stencil(chart, p, h);
    bv = b.eval(p);
    for (int c = 0; c < n; ++c) db[c] = central_derivative(b.eval, p, c, h);
  }
  const Matrix gi = ginv.value();
  auto G = [&](int a, int x, int y) { return gamma[detail::idx3(n, a, x, y)].value(); };
  Vector out = Vector::Zero(n);
  for (int bb = 0; bb < n; ++bb)
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) {
        double t = db[c](a, bb);
        for (int d = 0; d < n; ++d) t -= G(d, c, a) * bv(d, bb) + G(d, c, bb) * bv(a, d);
        out[bb] += gi(a, c) * t;
      }
  return out;
}

/// |nabla^a B_ab| in the g-norm.
inline double divergence_norm(const SymTensorField& b, const ManifoldChart& chart, std::span<const double> p,
                              double h = kStencilStep) {
  return g_norm(cov_divergence(b, chart, p, h), metric_value(chart, p).inverse());
}

// ---------------------------------------------------------------------------
// Vector fields

/// div X = d_a X^a + G^a_ac X^c.
inline double divergence(const VectorFieldSpec& x, const MetricJet& jet) {
  const int n = jet.dim();
  const JetMatrix ginv = inverse(jet.g, jet.order - 1);
  const auto gamma = christoffel(jet.g, ginv);
  const Vector xv = x.components(jet.point);
  const Matrix dx = x.jacobian(jet.point);
  double d = dx.trace();
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) d += gamma[detail::idx3(n, a, a, c)].value() * xv[c];
  return d;
}

/// L_X g = nabla_a X_b + nabla_b X_a with X_b = g_bc X^c.
inline Matrix lie_metric(const VectorFieldSpec& x, const MetricJet& jet) {
  const int n = jet.dim();
  if (jet.order < 1) throw JetOrderError("Lie derivative of the metric needs order >= 1");
  const JetMatrix ginv = inverse(jet.g, jet.order - 1);
  const auto gamma = christoffel(jet.g, ginv);
  const auto xj = x.jets(jet.point, 1);
  // lowered X_b as order-1 jets
  std::vector<Jet> low;
  for (int b = 0; b < n; ++b) {
    Jet s(xj[0].layout(), 1);
    for (int c = 0; c < n; ++c) s.add_product(jet.g(b, c), xj[c]);
    low.push_back(s);
  }
  Matrix nab(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double v = low[b].gradient(a);
      for (int c = 0; c < n; ++c) v -= gamma[detail::idx3(n, c, a, b)].value() * low[c].value();
      nab(a, b) = v;
    }
  return nab + nab.transpose();
}

/// Coordinate formula X^c d_c g_ab + g_cb d_a X^c + g_ac d_b X^c.
inline Matrix lie_metric_coordinate(const VectorFieldSpec& x, const MetricJet& jet) {
  const int n = jet.dim();
  if (jet.order < 1) throw JetOrderError("Lie derivative of the metric needs order >= 1");
  const Vector xv = x.components(jet.point);
  const Matrix dx = x.jacobian(jet.point);
  const Matrix g = jet.metric();
  Matrix out = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        out(a, b) += xv[c] * jet.g(a, b).gradient(c) + g(c, b) * dx(c, a) + g(a, c) * dx(c, b);
  return out;
}

/// Uniform random interior points, kept `margin` (relative to the box width)
/// away from every face.
inline std::vector<Point> random_interior_points(const ManifoldChart& chart, int count, std::uint64_t seed = 7,
                                                 double margin = 0.02) {
  std::mt19937_64 rng(seed);
  std::vector<Point> pts;
  pts.reserve(count);
  for (int k = 0; k < count; ++k) {
    Point p(chart.dim);
    for (int i = 0; i < chart.dim; ++i) {
      const Interval& iv = chart.box[i];
      std::uniform_real_distribution<double> u(iv.lo + margin * iv.width(), iv.hi - margin * iv.width());
      p[i] = u(rng);
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

struct KillingResiduals {
  double conformal = 0.0;  // sup |L_X g - (2/n) div X g|_g
  double killing = 0.0;    // sup |L_X g|_g
  double divergence = 0.0; // sup |div X|
};

inline KillingResiduals killing_residuals(const VectorFieldSpec& x, const ManifoldChart& chart,
                                          std::span<const Point> sample) {
  KillingResiduals r;
  const int n = chart.dim;
  for (const auto& p : sample) {
    const MetricJet jet = metric_jet(chart, p, 1);
    const Matrix ginv = jet.metric().inverse();
    const Matrix l = lie_metric(x, jet);
    const double div = divergence(x, jet);
    r.conformal = std::max(r.conformal, g_norm(Matrix(l - (2.0 / n) * div * jet.metric()), ginv));
    r.killing = std::max(r.killing, g_norm(l, ginv));
    r.divergence = std::max(r.divergence, std::abs(div));
  }
  return r;
}

inline double conformal_killing_residual(const VectorFieldSpec& x, const ManifoldChart& chart,
                                         std::span<const Point> sample) {
  return killing_residuals(x, chart, sample).conformal;
}

/// X^a d_a V from an order >= 1 jet of V.
inline double lie_scalar(const VectorFieldSpec& x, const Jet& v, std::span<const double> p) {
  const Vector xv = x.components(p);
  double s = 0.0;
  for (int a = 0; a < v.dim(); ++a) s += xv[a] * v.gradient(a);
  return s;
}

/// X^a d_a V with d_a V from a 4th-order stencil of pointwise values.
template <class F>
double lie_scalar_stencil(const VectorFieldSpec& x, F&& v, const ManifoldChart& chart, std::span<const double> p,
                          double h = kStencilStep) {
  require_stencil(chart, p, h);
  const Vector xv = x.components(p);
  double s = 0.0;
  for (int a = 0; a < chart.dim; ++a) s += xv[a] * central_derivative(v, p, a, h);
  return s;
}

// ---------------------------------------------------------------------------
// Named invariants and tensors (scenario vocabulary)

/// A curvature scalar with the metric order needed for its value.
struct ScalarInvariant {
  std::string key;
  int metric_order = 2;
  CurvatureDepth depth = CurvatureDepth::ricci;
  int min_dim = 2;
  std::function<Jet(const CurvatureSuite&)> eval;
};

inline ScalarInvariant scalar_invariant(const std::string& key) {
  using D = CurvatureDepth;
  if (key == "scalar_curvature") return {key, 2, D::ricci, 2, [](const CurvatureSuite& s) { return s.scalar; }};
  if (key == "sigma1") return {key, 2, D::ricci, 3, [](const CurvatureSuite& s) { return sigma_k(s, 1); }};
  if (key == "sigma2") return {key, 2, D::ricci, 3, [](const CurvatureSuite& s) { return sigma_k(s, 2); }};
  if (key == "q4") return {key, 4, D::ricci, 3, [](const CurvatureSuite& s) { return q4(s); }};
  if (key == "weyl_norm_sq") return {key, 2, D::riemann, 3, [](const CurvatureSuite& s) { return weyl_norm_sq(s); }};
  if (key == "gauss_bonnet_4")
    return {key, 2, D::riemann, 4, [](const CurvatureSuite& s) { return gauss_bonnet_S2k(s, 2); }};
  if (key == "one")
    return {key, 0, D::ricci, 1, [](const CurvatureSuite& s) { return Jet(s.g(0, 0).layout(), s.metric_order, 1.0); }};
  throw GeometryError("unknown scalar invariant '" + key + "'");
}

/// Jet of V to `order` at p.
inline Jet evaluate_invariant(const ScalarInvariant& v, const ManifoldChart& chart, std::span<const double> p,
                              int order = 0) {
  if (chart.dim < v.min_dim) {
    throw CurvatureError(v.key + " needs n >= " + std::to_string(v.min_dim));
  }
  if (v.metric_order == 0) return Jet(JetLayout::of(chart.dim), order, 1.0);
  const int k = v.metric_order + order;
  return v.eval(curvature_suite(metric_jet(chart, p, k), v.depth)).truncated(order);
}

/// Named symmetric tensor fields with analytic jets: einstein (P - Jg),
/// ricci, lovelock_g4, metric.
inline SymTensorField tensor_field(const std::string& key, const ManifoldChart& chart) {
  std::function<JetMatrix(const CurvatureSuite&)> f;
  CurvatureDepth depth = CurvatureDepth::ricci;
  if (key == "einstein") {
    f = [](const CurvatureSuite& s) { return einstein_tensor(s); };
  } else if (key == "ricci") {
    f = [](const CurvatureSuite& s) { return s.ricci; };
  } else if (key == "lovelock_g4") {
    f = [](const CurvatureSuite& s) { return lovelock_g4(s); };
    depth = CurvatureDepth::riemann;
  } else if (key == "metric") {
    return SymTensorField{key, [chart](std::span<const double> p) { return metric_value(chart, p); },
                          [chart](std::span<const double> p, int order) { return metric_jet(chart, p, order).g; }};
  } else {
    throw GeometryError("unknown tensor field '" + key + "'");
  }
  auto jets = [chart, f, depth](std::span<const double> p, int order) {
    return f(curvature_suite(metric_jet(chart, p, order + 2), depth));
  };
  return SymTensorField{key, [jets](std::span<const double> p) { return jets(p, 0).value(); }, jets};
}

}  // namespace conflab
