#pragma once

// Truncated multivariate Taylor polynomials ("jets") for forward Taylor-mode
// differentiation of closed-form expressions.
//
// A jet of order K in n variables stores the coefficients c_alpha of
//   f(p + d) = sum_{|alpha| <= K} c_alpha d^alpha + O(|d|^{K+1}),
// in a graded monomial ordering shared by every jet of the same dimension,
// so that truncation to a lower order is a prefix of the coefficient array.
// Partial derivatives at the base point are alpha! * c_alpha.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace conflab {

inline constexpr int kMaxJetOrder = 6;
inline constexpr int kMaxJetDim = 6;

/// Raised when a computation needs more derivative orders than are available.
class JetOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JetLayout {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// Product term c_out += a_lhs * b_rhs.
  struct Term {
    std::uint32_t lhs;
    std::uint32_t rhs;
    std::uint32_t out;
  };

  static const JetLayout& of(int dim) {
    if (dim < 1 || dim > kMaxJetDim) {
      throw std::invalid_argument("jet dimension out of range");
    }
    static std::array<std::unique_ptr<JetLayout>, kMaxJetDim + 1> cache;
    static std::array<std::once_flag, kMaxJetDim + 1> flags;
    std::call_once(flags[dim], [dim] { cache[dim].reset(new JetLayout(dim)); });
    return *cache[dim];
  }

  int dim() const noexcept { return dim_; }

  /// Number of monomials of total degree <= order.
  std::size_t size(int order) const { return sizes_.at(order); }

  std::span<const std::uint8_t> exponents(std::size_t m) const {
    return {exps_.data() + m * dim_, static_cast<std::size_t>(dim_)};
  }

  int degree(std::size_t m) const { return degree_[m]; }

  /// Index of the monomial alpha + e_axis, or npos beyond the maximum order.
  std::size_t raised(std::size_t m, int axis) const { return raise_[m * dim_ + axis]; }

  std::size_t index(std::span<const int> alpha) const {
    std::vector<std::uint8_t> key(alpha.begin(), alpha.end());
    auto it = lookup_.find(key);
    if (it == lookup_.end()) {
      throw JetOrderError("monomial exceeds maximum jet order");
    }
    return it->second;
  }

  /// Product terms whose output monomial has degree <= order.
  std::span<const Term> terms(int order) const {
    return {terms_.data(), term_count_.at(order)};
  }

 private:
  explicit JetLayout(int dim) : dim_(dim) {
    std::vector<std::uint8_t> alpha(dim_, 0);
    for (int d = 0; d <= kMaxJetOrder; ++d) {
      enumerate(alpha, 0, d, d);
      sizes_.push_back(degree_.size());
    }
    const std::size_t count = degree_.size();
    for (std::size_t m = 0; m < count; ++m) {
      lookup_.emplace(std::vector<std::uint8_t>(exps_.begin() + m * dim_,
                                                exps_.begin() + (m + 1) * dim_),
                      m);
    }
    raise_.assign(count * dim_, npos);
    for (std::size_t m = 0; m < count; ++m) {
      if (degree_[m] == kMaxJetOrder) continue;
      for (int i = 0; i < dim_; ++i) {
        std::vector<std::uint8_t> up(exps_.begin() + m * dim_, exps_.begin() + (m + 1) * dim_);
        ++up[i];
        raise_[m * dim_ + i] = lookup_.at(up);
      }
    }
    for (std::size_t a = 0; a < count; ++a) {
      for (std::size_t b = 0; b < count; ++b) {
        if (degree_[a] + degree_[b] > kMaxJetOrder) continue;
        std::vector<std::uint8_t> sum(dim_);
        for (int i = 0; i < dim_; ++i) sum[i] = exps_[a * dim_ + i] + exps_[b * dim_ + i];
        terms_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                          static_cast<std::uint32_t>(lookup_.at(sum))});
      }
    }
    std::stable_sort(terms_.begin(), terms_.end(), [this](const Term& x, const Term& y) {
      return degree_[x.out] < degree_[y.out];
    });
    for (int k = 0; k <= kMaxJetOrder; ++k) {
      term_count_.push_back(static_cast<std::size_t>(
          std::count_if(terms_.begin(), terms_.end(),
                        [&](const Term& t) { return degree_[t.out] <= k; })));
    }
  }

  void enumerate(std::vector<std::uint8_t>& alpha, int axis, int remaining, int total) {
    if (axis == dim_ - 1) {
      alpha[axis] = static_cast<std::uint8_t>(remaining);
      exps_.insert(exps_.end(), alpha.begin(), alpha.end());
      degree_.push_back(total);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      alpha[axis] = static_cast<std::uint8_t>(e);
      enumerate(alpha, axis + 1, remaining - e, total);
    }
    alpha[axis] = 0;
  }

  int dim_;
  std::vector<std::uint8_t> exps_;
  std::vector<int> degree_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> raise_;
  std::vector<Term> terms_;
  std::vector<std::size_t> term_count_;
  std::map<std::vector<std::uint8_t>, std::size_t> lookup_;
};

class Jet {
 public:
  Jet() = default;

  Jet(const JetLayout& layout, int order, double value = 0.0)
      : layout_(&layout), order_(check_order(order)), c_(layout.size(order), 0.0) {
    c_[0] = value;
  }

  /// The coordinate function x_axis expanded about `value`.
  static Jet variable(const JetLayout& layout, int order, int axis, double value) {
    Jet x(layout, order, value);
    if (order >= 1) x.c_[1 + axis] = 1.0;
    return x;
  }

  bool valid() const noexcept { return layout_ != nullptr; }
  const JetLayout& layout() const { return *layout_; }
  int dim() const { return layout_->dim(); }
  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return c_.size(); }

  double value() const { return c_[0]; }
  double operator[](std::size_t m) const { return c_[m]; }
  double& operator[](std::size_t m) { return c_[m]; }
  std::span<const double> coefficients() const { return c_; }

  /// Coefficient of the linear monomial d_axis, i.e. the first partial.
  double gradient(int axis) const {
    if (order_ < 1) throw JetOrderError("first derivative requested from order-0 jet");
    return c_[1 + axis];
  }

  /// Mixed partial derivative at the base point, one entry per differentiation.
  double partial(std::span<const int> axes) const {
    if (static_cast<int>(axes.size()) > order_) {
      throw JetOrderError("partial derivative exceeds jet order");
    }
    std::vector<int> alpha(dim(), 0);
    for (int a : axes) ++alpha[a];
    double factorial = 1.0;
    for (int e : alpha) {
      for (int k = 2; k <= e; ++k) factorial *= k;
    }
    return factorial * c_[layout_->index(alpha)];
  }

  double partial(std::initializer_list<int> axes) const {
    return partial(std::span<const int>(axes.begin(), axes.size()));
  }

  Jet truncated(int order) const {
    if (order > order_) throw JetOrderError("cannot raise jet order by truncation");
    Jet r;
    r.layout_ = layout_;
    r.order_ = order;
    r.c_.assign(c_.begin(), c_.begin() + layout_->size(order));
    return r;
  }

  /// d/dx_axis; the result has one order less.
  Jet derivative(int axis) const {
    if (order_ < 1) throw JetOrderError("derivative of order-0 jet");
    Jet r(*layout_, order_ - 1);
    const std::size_t n = r.c_.size();
    for (std::size_t m = 0; m < n; ++m) {
      r.c_[m] = (layout_->exponents(m)[axis] + 1) * c_[layout_->raised(m, axis)];
    }
    return r;
  }

  /// Antiderivative in x_axis vanishing on {d_axis = 0}; gains one order (capped).
  Jet integral(int axis) const {
    const int out_order = std::min(order_ + 1, kMaxJetOrder);
    Jet r(*layout_, out_order);
    const std::size_t n = layout_->size(out_order - 1);
    for (std::size_t m = 0; m < n && m < c_.size(); ++m) {
      r.c_[layout_->raised(m, axis)] = c_[m] / (layout_->exponents(m)[axis] + 1);
    }
    return r;
  }

  /// this += scale * a * b, truncated to min(order(), a.order(), b.order()).
  void add_product(const Jet& a, const Jet& b, double scale = 1.0) {
    const int k = std::min({order_, a.order_, b.order_});
    if (k < order_) truncate_in_place(k);
    const double* pa = a.c_.data();
    const double* pb = b.c_.data();
    double* out = c_.data();
    if (scale == 1.0) {
      for (const auto& t : layout_->terms(k)) out[t.out] += pa[t.lhs] * pb[t.rhs];
    } else {
      for (const auto& t : layout_->terms(k)) out[t.out] += scale * pa[t.lhs] * pb[t.rhs];
    }
  }

  /// this += scale * a, truncated to min(order(), a.order()).
  void add_scaled(const Jet& a, double scale) {
    if (a.order_ < order_) truncate_in_place(a.order_);
    const std::size_t n = c_.size();
    for (std::size_t m = 0; m < n; ++m) c_[m] += scale * a.c_[m];
  }

  Jet& operator+=(const Jet& a) {
    add_scaled(a, 1.0);
    return *this;
  }
  Jet& operator-=(const Jet& a) {
    add_scaled(a, -1.0);
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }
  Jet& operator*=(const Jet& a) {
    *this = *this * a;
    return *this;
  }
  Jet& operator/=(double s) {
    for (double& v : c_) v /= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a -= s; }
  friend Jet operator-(double s, const Jet& a) { return -a + s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) { return a /= s; }
  friend Jet operator-(Jet a) { return a *= -1.0; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(*a.layout_, std::min(a.order_, b.order_));
    r.add_product(a, b);
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator/(double s, const Jet& b);

  /// f(g) from the derivatives f^(k)(g0), k = 0..order, by the Taylor
  /// expansion of f about g0 applied to the nilpotent part g - g0.
  friend Jet compose(const Jet& g, std::span<const double> derivs) {
    if (static_cast<int>(derivs.size()) < g.order_ + 1) {
      throw JetOrderError("not enough derivatives for composition");
    }
    Jet r(*g.layout_, g.order_, derivs[0]);
    if (g.order_ == 0) return r;
    Jet delta = g;
    delta.c_[0] = 0.0;
    Jet power = delta;
    double factorial = 1.0;
    for (int k = 1; k <= g.order_; ++k) {
      factorial *= k;
      r.add_scaled(power, derivs[k] / factorial);
      if (k < g.order_) power = power * delta;
    }
    return r;
  }

 private:
  static int check_order(int order) {
    if (order < 0 || order > kMaxJetOrder) throw JetOrderError("jet order out of range");
    return order;
  }

  void truncate_in_place(int order) {
    order_ = order;
    c_.resize(layout_->size(order));
  }

  const JetLayout* layout_ = nullptr;
  int order_ = 0;
  std::vector<double> c_;
};

namespace detail {

inline std::vector<double> power_derivs(double x, double p, int order) {
  std::vector<double> d(order + 1);
  double coef = 1.0;
  for (int k = 0; k <= order; ++k) {
    d[k] = coef * std::pow(x, p - k);
    coef *= (p - k);
  }
  return d;
}

}  // namespace detail

inline Jet pow(const Jet& g, double p) {
  if (g.value() <= 0.0 && std::floor(p) != p) {
    throw std::domain_error("fractional power of non-positive jet");
  }
  return compose(g, detail::power_derivs(g.value(), p, g.order()));
}

inline Jet reciprocal(const Jet& g) {
  if (g.value() == 0.0) throw std::domain_error("reciprocal of jet with zero value");
  return compose(g, detail::power_derivs(g.value(), -1.0, g.order()));
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(double s, const Jet& b) { return s * reciprocal(b); }

inline Jet sqrt(const Jet& g) {
  if (g.value() <= 0.0) throw std::domain_error("sqrt of non-positive jet");
  return pow(g, 0.5);
}

inline Jet exp(const Jet& g) {
  return compose(g, std::vector<double>(g.order() + 1, std::exp(g.value())));
}

inline Jet log(const Jet& g) {
  const double x = g.value();
  if (x <= 0.0) throw std::domain_error("log of non-positive jet");
  std::vector<double> d(g.order() + 1);
  d[0] = std::log(x);
  double f = 1.0;
  for (int k = 1; k <= g.order(); ++k) {
    d[k] = ((k % 2) ? 1.0 : -1.0) * f / std::pow(x, k);
    f *= k;
  }
  return compose(g, d);
}

inline Jet sin(const Jet& g) {
  const double s = std::sin(g.value()), c = std::cos(g.value());
  const double cycle[4] = {s, c, -s, -c};
  std::vector<double> d(g.order() + 1);
  for (int k = 0; k <= g.order(); ++k) d[k] = cycle[k % 4];
  return compose(g, d);
}

inline Jet cos(const Jet& g) {
  const double s = std::sin(g.value()), c = std::cos(g.value());
  const double cycle[4] = {c, -s, -c, s};
  std::vector<double> d(g.order() + 1);
  for (int k = 0; k <= g.order(); ++k) d[k] = cycle[k % 4];
  return compose(g, d);
}

inline Jet sinh(const Jet& g) {
  const double s = std::sinh(g.value()), c = std::cosh(g.value());
  std::vector<double> d(g.order() + 1);
  for (int k = 0; k <= g.order(); ++k) d[k] = (k % 2) ? c : s;
  return compose(g, d);
}

inline Jet cosh(const Jet& g) {
  const double s = std::sinh(g.value()), c = std::cosh(g.value());
  std::vector<double> d(g.order() + 1);
  for (int k = 0; k <= g.order(); ++k) d[k] = (k % 2) ? s : c;
  return compose(g, d);
}

inline Jet tanh(const Jet& g) { return sinh(g) / cosh(g); }

inline Jet square(const Jet& g) { return g * g; }

/// Coordinate jets x_i = p_i + d_i.
inline std::vector<Jet> coordinate_jets(std::span<const double> p, int order) {
  const auto& layout = JetLayout::of(static_cast<int>(p.size()));
  std::vector<Jet> x;
  x.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    x.push_back(Jet::variable(layout, order, static_cast<int>(i), p[i]));
  }
  return x;
}

}  // namespace conflab
