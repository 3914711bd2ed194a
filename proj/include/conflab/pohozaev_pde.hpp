#pragma once

// Radial shooting for u'' + ((n-1)/r) u' + lambda f(u) = 0 on the unit ball
// with u'(0) = 0, u(1) = 0, and the classical Pohozaev identity audit.

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "conflab/identities.hpp"

namespace conflab {

class PdeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// f and its primitive F(u) = int_0^u f.
struct Nonlinearity {
  std::string label;
  std::function<double(double)> f;
  std::function<double(double)> primitive;
  std::optional<double> power;
};

/// f(u) = u |u|^{p-1}.
inline Nonlinearity power_nonlinearity(double p) {
  if (!(p >= 1.0)) throw PdeError("power nonlinearity needs p >= 1");
  return {"u^" + std::to_string(p), [p](double u) { return u * std::pow(std::abs(u), p - 1); },
          [p](double u) { return std::pow(std::abs(u), p + 1) / (p + 1); }, p};
}

/// Piecewise-linear f through (u_i, f_i); f(0) must vanish. F is exact for
/// the interpolant. Outside the table f is extended linearly.
inline Nonlinearity tabulated_nonlinearity(std::vector<double> u, std::vector<double> f) {
  if (u.size() < 2 || u.size() != f.size()) throw PdeError("tabulated nonlinearity needs >= 2 matching samples");
  for (std::size_t i = 1; i < u.size(); ++i)
    if (!(u[i] > u[i - 1])) throw PdeError("tabulated nonlinearity abscissae must increase");
  auto segment = [u](double x) {
    const auto it = std::upper_bound(u.begin(), u.end(), x);
    std::size_t k = it == u.begin() ? 0 : static_cast<std::size_t>(it - u.begin()) - 1;
    return std::min(k, u.size() - 2);
  };
  auto interp = [u, f, segment](double x) {
    const std::size_t k = segment(x);
    const double t = (x - u[k]) / (u[k + 1] - u[k]);
    return f[k] + t * (f[k + 1] - f[k]);
  };
  if (std::abs(interp(0.0)) > 1e-14) throw PdeError("tabulated nonlinearity must satisfy f(0) = 0");
  // Cumulative trapezoids from u_0, shifted so that F(0) = 0 (exact for the interpolant).
  std::vector<double> cum(u.size(), 0.0);
  for (std::size_t k = 1; k < u.size(); ++k) cum[k] = cum[k - 1] + 0.5 * (u[k] - u[k - 1]) * (f[k - 1] + f[k]);
  auto from_start = [u, f, cum, segment, interp](double x) {
    const std::size_t k = segment(x);
    return cum[k] + 0.5 * (x - u[k]) * (f[k] + interp(x));
  };
  const double at_zero = from_start(0.0);
  auto primitive = [from_start, at_zero](double x) { return from_start(x) - at_zero; };
  return {"tabulated", interp, primitive, std::nullopt};
}

inline double sphere_area(int n) { return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n); }

struct RadialSolution {
  int n = 3;
  double lambda = 0.0;
  Nonlinearity f;
  double alpha = 0.0;
  double boundary_residual = 0.0;  // |u(1)|
  std::vector<double> r, u, du;    // profile samples on [r_start, 1]
  double du_at_one = 0.0;
  // Radial integrals over the ball (with measure |S^{n-1}| r^{n-1} dr).
  double int_F = 0.0, int_uf = 0.0, int_grad_sq = 0.0;
};

struct ShootOptions {
  double start_radius = 1e-4;
  double ode_tol = 1e-12;
  double boundary_tol = 1e-10;
  int samples = 201;
  double blowup = 1e12;
};

namespace detail {

using RadialState = std::array<double, 5>;  // u, u', int F r^{n-1}, int u f r^{n-1}, int u'^2 r^{n-1}

inline RadialSolution shoot(int n, const Nonlinearity& f, double lambda, double alpha, const ShootOptions& opt) {
  namespace odeint = boost::numeric::odeint;
  RadialSolution s;
  s.n = n;
  s.lambda = lambda;
  s.f = f;
  s.alpha = alpha;
  const double r0 = opt.start_radius;
  const double fa = f.f(alpha);
  // Two-term series about r = 0.
  RadialState y{alpha - lambda * fa * r0 * r0 / (2 * n), -lambda * fa * r0 / n,
                f.primitive(alpha) * std::pow(r0, n) / n, alpha * fa * std::pow(r0, n) / n,
                std::pow(lambda * fa / n, 2) * std::pow(r0, n + 2) / (n + 2)};
  auto rhs = [&](const RadialState& x, RadialState& dx, double r) {
    const double fu = f.f(x[0]);
    const double w = std::pow(r, n - 1);
    dx[0] = x[1];
    dx[1] = -(n - 1) / r * x[1] - lambda * fu;
    dx[2] = f.primitive(x[0]) * w;
    dx[3] = x[0] * fu * w;
    dx[4] = x[1] * x[1] * w;
  };
  std::vector<double> times(opt.samples);
  for (int i = 0; i < opt.samples; ++i) times[i] = r0 + (1.0 - r0) * i / (opt.samples - 1);
  auto stepper = odeint::make_dense_output(opt.ode_tol, opt.ode_tol, odeint::runge_kutta_dopri5<RadialState>());
  odeint::integrate_times(stepper, rhs, y, times.begin(), times.end(), 1e-3 * (1.0 - r0),
                          [&](const RadialState& x, double r) {
                            if (!std::isfinite(x[0]) || std::abs(x[0]) > opt.blowup) {
                              throw PdeError("radial solution blows up before r = 1");
                            }
                            s.r.push_back(r);
                            s.u.push_back(x[0]);
                            s.du.push_back(x[1]);
                          });
  const double area = sphere_area(n);
  s.boundary_residual = std::abs(y[0]);
  s.du_at_one = y[1];
  s.int_F = area * y[2];
  s.int_uf = area * y[3];
  s.int_grad_sq = area * y[4];
  return s;
}

}  // namespace detail

/// Bisection on alpha = u(0) until |u(1)| < boundary_tol.
inline RadialSolution radial_solve(int n, const Nonlinearity& f, double lambda, std::pair<double, double> bracket,
                                   const ShootOptions& opt = {}) {
  if (n < 1) throw PdeError("dimension must be positive");
  if (std::abs(f.f(0.0)) > 1e-14) throw PdeError("nonlinearity must satisfy f(0) = 0");
  auto [lo, hi] = bracket;
  auto sl = detail::shoot(n, f, lambda, lo, opt);
  if (sl.boundary_residual < opt.boundary_tol) return sl;
  auto sh = detail::shoot(n, f, lambda, hi, opt);
  if (sh.boundary_residual < opt.boundary_tol) return sh;
  const double ul = sl.u.back(), uh = sh.u.back();
  if (ul * uh > 0) throw PdeError("no sign change of u(1) across the alpha bracket");
  double sign_lo = ul;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto sm = detail::shoot(n, f, lambda, mid, opt);
    if (sm.boundary_residual < opt.boundary_tol || hi - lo < 1e-15 * std::abs(mid)) return sm;
    if (sm.u.back() * sign_lo > 0) {
      lo = mid;
      sign_lo = sm.u.back();
    } else {
      hi = mid;
    }
  }
  throw PdeError("bisection on alpha did not converge");
}

/// Linear problem f(u) = u: bisection on lambda with u(0) = alpha fixed.
inline RadialSolution radial_eigenvalue(int n, std::pair<double, double> lambda_bracket, double alpha = 1.0,
                                        const ShootOptions& opt = {}) {
  const auto lin = power_nonlinearity(1.0);
  auto [lo, hi] = lambda_bracket;
  auto sl = detail::shoot(n, lin, lo, alpha, opt);
  auto sh = detail::shoot(n, lin, hi, alpha, opt);
  if (sl.u.back() * sh.u.back() > 0) throw PdeError("no sign change of u(1) across the lambda bracket");
  double sign_lo = sl.u.back();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto sm = detail::shoot(n, lin, mid, alpha, opt);
    if (sm.boundary_residual < opt.boundary_tol * std::abs(alpha) || hi - lo < 1e-15 * mid) return sm;
    if (sm.u.back() * sign_lo > 0) {
      lo = mid;
      sign_lo = sm.u.back();
    } else {
      hi = mid;
    }
  }
  throw PdeError("bisection on lambda did not converge");
}

/// lambda n int F(u) + ((2 - n)/2) lambda int u f(u) = (1/2) int_dB (x.nu)(d_nu u)^2,
/// with the energy identity int |grad u|^2 = lambda int u f(u) as extras.
inline IdentityReport pohozaev_check(const RadialSolution& s, double tol = 1e-4) {
  const int n = s.n;
  const double lhs = s.lambda * n * s.int_F + 0.5 * (2 - n) * s.lambda * s.int_uf;
  const double rhs = 0.5 * sphere_area(n) * s.du_at_one * s.du_at_one;
  const double scale = s.lambda * (n * std::abs(s.int_F) + 0.5 * std::abs(2 - n) * std::abs(s.int_uf));
  auto r = finalize("pohozaev(" + s.f.label + ", n=" + std::to_string(n) + ")",
                    {make_level(0, lhs, rhs, scale, 0.0)}, tol);
  const double elhs = s.int_grad_sq, erhs = s.lambda * s.int_uf;
  r.extras = {{"energy_lhs", elhs},
              {"energy_rhs", erhs},
              {"energy_residual", std::abs(elhs - erhs) / std::max({std::abs(elhs), std::abs(erhs), kScaleFloor})},
              {"alpha", s.alpha},
              {"boundary_residual", s.boundary_residual}};
  return r;
}

/// n/(p + 1) + (2 - n)/2: the multiplier of lambda int u^{p+1}; nonexistence
/// of positive solutions on star-shaped domains when it is <= 0.
inline double critical_coefficient(int n, double p) {
  if (n < 3 || !(p > 1.0)) throw PdeError("critical_coefficient needs n >= 3 and p > 1");
  return n / (p + 1) + (2.0 - n) / 2.0;
}

}  // namespace conflab
