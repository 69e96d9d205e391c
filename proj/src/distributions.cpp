#include "lps/distributions.hpp"

#include <cmath>

namespace lps {

double gaussian_logpdf(const Vector& x, const GaussianParams& p) {
  if (x.size() != p.mean.size() || x.size() != p.sigma.size()) {
    std::ostringstream os;
    os << "gaussian_logpdf: dimensions " << x.size() << ", " << p.mean.size() << ", " << p.sigma.size()
       << " do not match";
    throw UsageError(os.str());
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += normal_logpdf(x(i), p.mean(i), p.sigma(i));
  return total;
}

Var gaussian_logpdf_rows(const Var& x, const Var& mean, const RowVector& sigma) {
  if (x.cols() != sigma.size() || mean.cols() != sigma.size()) throw UsageError("gaussian_logpdf_rows: width mismatch");
  if (!(sigma.minCoeff() > 0.0)) throw DomainError("gaussian_logpdf_rows: sigma must be positive");
  Tape& tape = *x.tape();
  const RowVector inv_two_var = (2.0 * sigma.array().square()).inverse().matrix();
  const double log_norm = -0.5 * detail::kLog2Pi * static_cast<double>(sigma.size()) - sigma.array().log().sum();
  const Var scaled = square(x - mean) * tape.constant(Matrix(inv_two_var));
  return log_norm - row_sum(scaled);
}

double mixture_logpdf(double z, double pi, const RiskMixtureParams& p) {
  detail::require_positive("mixture_logpdf", z);
  if (pi < 0.0 || pi > 1.0) throw DomainError("mixture_logpdf: weight must lie in [0, 1]");
  const double high = lognormal_logpdf(z, p.high);
  const double low = lognormal_logpdf(z, p.low);
  if (pi == 0.0) return low;
  if (pi == 1.0) return high;
  return logaddexp(std::log(pi) + high, std::log1p(-pi) + low);
}

double sample_beta_reparam(const BetaParams& p, double u) { return sample_kumaraswamy_reparam(p.a, p.b, u); }

double lognormal_mode(const LogNormalParams& p) { return std::exp(p.mu - p.var); }

double beta_mode(const BetaParams& p) {
  if (p.a < 1.0 || p.b < 1.0) {
    std::ostringstream os;
    os << "beta_mode: needs a, b >= 1, got (" << p.a << ", " << p.b << ")";
    throw DomainError(os.str());
  }
  if (p.a + p.b <= 2.0) return 0.5;
  return (p.a - 1.0) / (p.a + p.b - 2.0);
}

LogNormalParams lognormal_fit(std::span<const double> samples) {
  if (samples.empty()) throw DomainError("lognormal_fit: no samples");
  double mean = 0.0;
  for (double s : samples) {
    if (!(s > 0.0)) {
      std::ostringstream os;
      os << "lognormal_fit: sample " << s << " is not positive";
      throw DomainError(os.str());
    }
    mean += std::log(s);
  }
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double s : samples) var += square(std::log(s) - mean);
  var /= static_cast<double>(samples.size());
  return {mean, std::max(var, kVarianceFloor)};
}

double lognormal_cdf(double x, const LogNormalParams& p) {
  if (x <= 0.0) return 0.0;
  return 0.5 * std::erfc(-(std::log(x) - p.mu) / std::sqrt(2.0 * p.var));
}

double kumaraswamy_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return -std::expm1(b * std::log1p(-std::pow(x, a)));
}

}  // namespace lps
