#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "conflab/jet.hpp"

namespace conflab {

using Point = std::vector<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Square matrix of jets sharing one layout; symmetric use fills both halves.
class JetMatrix {
 public:
  JetMatrix() = default;
  JetMatrix(int n, const JetLayout& layout, int order)
      : n_(n), data_(static_cast<std::size_t>(n) * n, Jet(layout, order)) {}

  int dim() const noexcept { return n_; }
  bool empty() const noexcept { return data_.empty(); }

  Jet& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * n_ + j]; }
  const Jet& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * n_ + j]; }

  int order() const {
    int k = kMaxJetOrder;
    for (const auto& e : data_) k = std::min(k, e.order());
    return k;
  }

  Matrix value() const {
    Matrix m(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = (*this)(i, j).value();
    return m;
  }

  JetMatrix truncated(int order) const {
    JetMatrix r = *this;
    for (auto& e : r.data_) e = e.truncated(order);
    return r;
  }

  JetMatrix& operator+=(const JetMatrix& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  JetMatrix& operator*=(double s) {
    for (auto& e : data_) e *= s;
    return *this;
  }

  /// Scales every entry by a scalar jet.
  JetMatrix& scale(const Jet& s) {
    for (auto& e : data_) e = e * s;
    return *this;
  }

 private:
  int n_ = 0;
  std::vector<Jet> data_;
};

/// g-norm |T| = sqrt(T_ab T_cd g^ac g^bd) of a covariant 2-tensor.
inline double g_norm(const Matrix& t, const Matrix& ginv) {
  const double s = (ginv * t * ginv * t.transpose()).trace();
  return std::sqrt(std::max(s, 0.0));
}

/// g-norm of a covector.
inline double g_norm(const Vector& w, const Matrix& ginv) {
  return std::sqrt(std::max(w.dot(ginv * w), 0.0));
}

/// Worker count from CONFLAB_THREADS, falling back to the hardware count.
inline unsigned thread_count() {
  if (const char* env = std::getenv("CONFLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates f(i) for i in [0, count) into slot i; each slot is written by
/// exactly one worker, so later reductions see a fixed order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& f) {
  std::vector<T> out(count);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) out[i] = f(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace conflab
