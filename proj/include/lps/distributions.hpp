#ifndef LPS_DISTRIBUTIONS_HPP
#define LPS_DISTRIBUTIONS_HPP

// Log-densities, reparameterized samplers and modes.
//
// The kernels are templates over the argument types so that one definition
// serves plain doubles and tape variables (elementwise over batch columns).
// Mixed double/Var arguments are allowed; the result is a Var whenever any
// argument is one.

#include <numbers>
#include <sstream>
#include <span>
#include <string_view>

#include "lps/diff.hpp"
#include "lps/scalar_math.hpp"

namespace lps {

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

struct LogNormalParams {
  double mu = 0.0;
  double var = 1.0;  // variance of log x
};

struct GaussianParams {
  Vector mean;
  Vector sigma;
};

// Two-component log-normal mixture weighted by the risk π.
struct RiskMixtureParams {
  LogNormalParams high;  // weight π
  LogNormalParams low;   // weight 1 - π
};

namespace detail {

template <typename T>
void require_open_unit(std::string_view what, const T& x) {
  if (!(min_value(x) > 0.0) || !(max_value(x) < 1.0)) {
    std::ostringstream os;
    os << what << ": argument must lie in (0, 1), got range [" << min_value(x) << ", " << max_value(x) << "]";
    throw DomainError(os.str());
  }
}

template <typename T>
void require_positive(std::string_view what, const T& x) {
  if (!(min_value(x) > 0.0)) {
    std::ostringstream os;
    os << what << ": argument must be positive, got " << min_value(x);
    throw DomainError(os.str());
  }
}

inline constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace detail

// (a-1) log x + (b-1) log(1-x) - log B(a, b)
template <typename X, typename A, typename B>
auto beta_logpdf(const X& x, const A& a, const B& b) {
  detail::require_open_unit("beta_logpdf", x);
  detail::require_positive("beta_logpdf(a)", a);
  detail::require_positive("beta_logpdf(b)", b);
  return (a - 1.0) * log(x) + (b - 1.0) * log1p(-x) - (lgamma(a) + lgamma(b) - lgamma(a + b));
}

inline double beta_logpdf(double x, const BetaParams& p) { return beta_logpdf(x, p.a, p.b); }

// y log π + (1 - y) log(1 - π); y may be a 0/1 batch column.
template <typename Y, typename P>
auto bernoulli_logpmf(const Y& y, const P& pi) {
  detail::require_open_unit("bernoulli_logpmf", pi);
  return y * log(pi) + (1.0 - y) * log1p(-pi);
}

template <typename X, typename M, typename V>
auto lognormal_logpdf(const X& x, const M& mu, const V& var) {
  detail::require_positive("lognormal_logpdf", x);
  detail::require_positive("lognormal_logpdf(var)", var);
  const auto lx = log(x);
  return -lx - 0.5 * (detail::kLog2Pi + log(var)) - square(lx - mu) / (2.0 * var);
}

inline double lognormal_logpdf(double x, const LogNormalParams& p) { return lognormal_logpdf(x, p.mu, p.var); }

// Log-normal density of x written in terms of log x.
template <typename L, typename M, typename V>
auto lognormal_logpdf_of_log(const L& log_x, const M& mu, const V& var) {
  detail::require_positive("lognormal_logpdf(var)", var);
  return -log_x - 0.5 * (detail::kLog2Pi + log(var)) - square(log_x - mu) / (2.0 * var);
}

// Elementwise univariate normal log-density.
template <typename X, typename M, typename S>
auto normal_logpdf(const X& x, const M& mean, const S& sigma) {
  detail::require_positive("normal_logpdf(sigma)", sigma);
  return -0.5 * detail::kLog2Pi - log(sigma) - square(x - mean) / (2.0 * square(sigma));
}

// Sum of independent univariate normal log-densities.
double gaussian_logpdf(const Vector& x, const GaussianParams& p);

// Per-row sum of independent normal log-densities; `sigma` holds one standard
// deviation per column. Returns a rows x 1 column.
Var gaussian_logpdf_rows(const Var& x, const Var& mean, const RowVector& sigma);

// log(π LN(z; high) + (1 - π) LN(z; low)), by log-sum-exp.
template <typename Z, typename P, typename M1, typename V1, typename M0, typename V0>
auto mixture_logpdf(const Z& z, const P& pi, const M1& mu_high, const V1& var_high, const M0& mu_low,
                    const V0& var_low) {
  detail::require_positive("mixture_logpdf", z);
  return logaddexp(log(pi) + lognormal_logpdf(z, mu_high, var_high),
                   log1p(-pi) + lognormal_logpdf(z, mu_low, var_low));
}

// Double version; accepts π in [0, 1] inclusive.
double mixture_logpdf(double z, double pi, const RiskMixtureParams& p);

// (a-1) log x + (b-1) log(1 - x^a) + log a + log b
template <typename X, typename A, typename B>
auto kumaraswamy_logpdf(const X& x, const A& a, const B& b) {
  detail::require_open_unit("kumaraswamy_logpdf", x);
  detail::require_positive("kumaraswamy_logpdf(a)", a);
  detail::require_positive("kumaraswamy_logpdf(b)", b);
  const auto lx = log(x);
  return log(a) + log(b) + (a - 1.0) * lx + (b - 1.0) * log1p(-exp(a * lx));
}

// exp(μ + σ ε); the draw ε carries no gradient.
template <typename M, typename S, typename E>
auto sample_lognormal_reparam(const M& mu, const S& sigma, const E& eps) {
  return exp(mu + sigma * eps);
}

// Kumaraswamy inverse CDF, x = (1 - (1 - u)^(1/b))^(1/a), in log space.
template <typename A, typename B, typename U>
auto sample_kumaraswamy_reparam(const A& a, const B& b, const U& u) {
  detail::require_open_unit("sample_beta_reparam", u);
  return exp(log(-expm1(log1p(-u) / b)) / a);
}

double sample_beta_reparam(const BetaParams& p, double u);

// exp(μ - σ²)
double lognormal_mode(const LogNormalParams& p);

// (a-1)/(a+b-2); 0.5 for the uniform a = b = 1.
double beta_mode(const BetaParams& p);

// Maximum-likelihood fit on log-samples: mean and population variance, with
// the variance floored at kVarianceFloor.
inline constexpr double kVarianceFloor = 1e-6;
LogNormalParams lognormal_fit(std::span<const double> samples);

// CDFs used by goodness-of-fit tests.
double lognormal_cdf(double x, const LogNormalParams& p);
double kumaraswamy_cdf(double x, double a, double b);

}  // namespace lps

#endif
