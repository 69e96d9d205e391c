#ifndef LPS_SCALAR_MATH_HPP
#define LPS_SCALAR_MATH_HPP

// Plain-double overloads of the tape operations, so kernels templated on the
// scalar type read the same for `double` and `Var`.

#include <algorithm>
#include <cmath>
#include <limits>

#include "lps/diff.hpp"
#include "lps/special.hpp"

namespace lps {

inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double log1p(double x) { return std::log1p(x); }
inline double expm1(double x) { return std::expm1(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double square(double x) { return x * x; }
inline double pow(double x, double e) { return std::pow(x, e); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double leaky_relu(double x, double slope = 0.01) { return x > 0.0 ? x : slope * x; }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logaddexp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// Smallest entry, for precondition checks shared by both scalar kinds.
inline double min_value(double x) { return x; }
inline double min_value(const Var& x) { return x.value().minCoeff(); }
inline double max_value(double x) { return x; }
inline double max_value(const Var& x) { return x.value().maxCoeff(); }

template <typename T>
using promote_t = std::conditional_t<std::is_same_v<std::decay_t<T>, Var>, Var, double>;

}  // namespace lps

#endif
