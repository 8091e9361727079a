#pragma once

namespace procrisk::special {

double log_gamma(double x);  // x > 0

/// Regularized incomplete gamma P(a,x) (lower) and Q(a,x) = 1 - P(a,x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a,b).
double inc_beta(double a, double b, double x);

/// Upper tail of the chi-square distribution with df degrees of freedom.
double chi_square_upper(double x, double df);

/// Two-sided p-value for a Student-t statistic with df degrees of freedom.
double student_t_two_sided(double t, double df);

double logistic(double z);

/// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
double inv_norm_cdf(double p);

}  // namespace procrisk::special
