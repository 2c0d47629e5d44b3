#pragma once

namespace ks {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gammp(double a, double x);

// Kolmogorov asymptotic tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

// Squared Bessel transition law of dimension delta > 0 started at z0 >= 0:
// the time-t value is t times a noncentral chi-square with delta degrees of
// freedom and noncentrality z0/t, evaluated through its Poisson-gamma mixture.
double besq_transition_cdf(double delta, double z0, double t, double z);

double besq_transition_mean(double delta, double z0, double t);
double besq_transition_var(double delta, double z0, double t);

} // namespace ks
