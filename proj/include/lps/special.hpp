#ifndef LPS_SPECIAL_HPP
#define LPS_SPECIAL_HPP

namespace lps {

// log Γ(x) for x > 0 via the Lanczos approximation (g = 7, nine terms), with
// the recurrence Γ(x) = Γ(x + 1) / x below 0.5.
double lgamma(double x);

// d/dx of the same approximation.
double digamma(double x);

// log B(a, b).
double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz).
double incomplete_beta(double a, double b, double x);

// CDF of Student's t with `dof` (possibly fractional) degrees of freedom.
double student_t_cdf(double t, double dof);

}  // namespace lps

#endif
