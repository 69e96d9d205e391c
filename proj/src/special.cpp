#include "lps/special.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lps/errors.hpp"

namespace lps {
namespace {

constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

void require_positive(const char* what, double x) {
  if (!(x > 0.0)) {
    std::ostringstream os;
    os << what << ": argument must be positive, got " << x;
    throw DomainError(os.str());
  }
}

}  // namespace

double lgamma(double x) {
  require_positive("lgamma", x);
  if (x < 0.5) return lgamma(x + 1.0) - std::log(x);
  if (x == 1.0 || x == 2.0) return 0.0;  // exact, so uniform densities are exactly flat
  const double y = x - 1.0;
  double series = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) series += kLanczos[i] / (y + static_cast<double>(i));
  const double t = y + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (y + 0.5) * std::log(t) - t + std::log(series);
}

double digamma(double x) {
  require_positive("digamma", x);
  if (x < 0.5) return digamma(x + 1.0) - 1.0 / x;
  const double y = x - 1.0;
  double series = kLanczos[0];
  double dseries = 0.0;
  for (std::size_t i = 1; i < kLanczos.size(); ++i) {
    const double d = y + static_cast<double>(i);
    series += kLanczos[i] / d;
    dseries -= kLanczos[i] / (d * d);
  }
  const double t = y + kLanczosG + 0.5;
  return std::log(t) + (y + 0.5) / t - 1.0 + dseries / series;
}

double log_beta(double a, double b) { return lgamma(a) + lgamma(b) - lgamma(a + b); }

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  require_positive("incomplete_beta(a)", a);
  require_positive("incomplete_beta(b)", b);
  if (x < 0.0 || x > 1.0) throw DomainError("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  require_positive("student_t_cdf(dof)", dof);
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

}  // namespace lps
