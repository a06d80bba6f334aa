#pragma once

namespace flowrecon {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0. Series
/// expansion for x < a + 1, Lentz continued fraction for the complement
/// otherwise.
double regularized_gamma_p(double a, double x);

/// Chi-squared CDF with k degrees of freedom: P(k/2, x/2).
double chi_squared_cdf(int k, double x);

/// Quantile chi2_k(p): bracketed bisection of the CDF to 1e-10 relative.
double chi_squared_quantile(int k, double p);

} // namespace flowrecon
