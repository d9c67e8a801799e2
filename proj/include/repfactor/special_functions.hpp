#pragma once

namespace repfactor {

double normal_cdf(double x);

/// P(|Z| >= |z|) for a standard normal Z.
double normal_two_sided_p(double z);

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// directly so small tails keep their relative accuracy.
double regularized_gamma_q(double a, double x);

double chi_square_cdf(double x, double df);
double chi_square_sf(double x, double df);

}  // namespace repfactor
