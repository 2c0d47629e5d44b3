#include "core/special.hpp"

#include <cmath>
#include <limits>

#include "core/errors.hpp"

namespace ks {

namespace {

constexpr int kMaxIter = 2000;
constexpr double kEps = 1e-15;

double gammp_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps)
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw NumericError("incomplete gamma series failed to converge");
}

// Gauss-Legendre nodes/weights on [0, 1], computed once by Newton iteration
// on the Legendre polynomial (no tabulated constants to mistype).
struct GaussLegendre {
    static constexpr int n = 24;
    double y[n];
    double w[n];
    GaussLegendre() {
        for (int i = 0; i < n; ++i) {
            // Chebyshev-based starting guess on [-1, 1]
            double z = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
                }
                pp = n * (z * p0 - p1) / (z * z - 1.0);
                const double z1 = z;
                z = z1 - p0 / pp;
                if (std::fabs(z - z1) < 1e-15) break;
            }
            y[i] = 0.5 - 0.5 * z; // map to [0, 1], ascending
            w[i] = 1.0 / ((1.0 - z * z) * pp * pp);
        }
    }
};

// Incomplete gamma by quadrature of the density between x and a point deep in
// the far tail; full double precision for large a, where the series and the
// continued fraction need O(sqrt a) iterations.
double gammp_quadrature(double a, double x) {
    static const GaussLegendre gl;
    const double a1 = a - 1.0;
    const double lna1 = std::log(a1);
    const double sqrta1 = std::sqrt(a1);
    double xu;
    if (x > a1)
        xu = std::max(a1 + 11.5 * sqrta1, x + 6.0 * sqrta1);
    else
        xu = std::max(0.0, std::min(a1 - 7.5 * sqrta1, x - 5.0 * sqrta1));
    double sum = 0.0;
    for (int j = 0; j < GaussLegendre::n; ++j) {
        const double t = x + (xu - x) * gl.y[j];
        sum += gl.w[j] * std::exp(-(t - a1) + a1 * (std::log(t) - lna1));
    }
    const double ans = sum * (xu - x) * std::exp(a1 * (lna1 - 1.0) - std::lgamma(a));
    const double p = x > a1 ? 1.0 - ans : -ans;
    if (p < 0.0) return 0.0;
    if (p > 1.0) return 1.0;
    return p;
}

// Lentz continued fraction for the upper tail Q(a, x)
double gammq_cf(double a, double x) {
    const double tiny = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps)
            return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    throw NumericError("incomplete gamma continued fraction failed to converge");
}

} // namespace

double gammp(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw DomainError("gammp requires a > 0 and x >= 0");
    if (x == 0.0) return 0.0;
    if (a >= 100.0) return gammp_quadrature(a, x);
    if (x < a + 1.0) return gammp_series(a, x);
    return 1.0 - gammq_cf(a, x);
}

double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double q;
    if (lambda < 1.0) {
        // dual theta series, accurate for small lambda
        double p = 0.0;
        const double f = 3.14159265358979323846 * 3.14159265358979323846 / (8.0 * lambda * lambda);
        for (int j = 1; j <= 9; j += 2) {
            const double term = std::exp(-f * j * j);
            p += term;
            if (term < 1e-18) break;
        }
        q = 1.0 - std::sqrt(2.0 * 3.14159265358979323846) / lambda * p;
    } else {
        double sum = 0.0;
        double sign = 1.0;
        for (int k = 1; k <= 100; ++k) {
            const double term = std::exp(-2.0 * k * k * lambda * lambda);
            sum += sign * term;
            if (term < 1e-18) break;
            sign = -sign;
        }
        q = 2.0 * sum;
    }
    if (q < 0.0) return 0.0;
    if (q > 1.0) return 1.0;
    return q;
}

double besq_transition_cdf(double delta, double z0, double t, double z) {
    if (!(delta > 0.0)) throw DomainError("besq transition cdf requires delta > 0");
    if (z0 < 0.0 || !(t > 0.0)) throw DomainError("besq transition cdf requires z0 >= 0 and t > 0");
    if (z <= 0.0) return 0.0;

    const double x = z / (2.0 * t);
    const double mu = z0 / (2.0 * t); // Poisson mixing mean
    if (mu == 0.0) return gammp(0.5 * delta, x);

    // Walk the Poisson mixture outward from its mode. Both the weights and
    // the conditional gamma cdfs obey one-term recurrences,
    //   P(s, x) = P(s+1, x) + x^s e^-x / Gamma(s+1),
    // so each term costs O(1) and the walk stays O(sqrt mu) for any mu.
    const auto j_mode = static_cast<std::int64_t>(mu);
    const double a = 0.5 * delta;
    const double log_x = std::log(x);
    const auto density_term = [&](double s) {
        // x^s e^-x / Gamma(s+1)
        return std::exp(s * log_x - x - std::lgamma(s + 1.0));
    };
    const double w_mode =
        std::exp(-mu + j_mode * std::log(mu) - std::lgamma(static_cast<double>(j_mode) + 1.0));
    const double p_mode = gammp(a + static_cast<double>(j_mode), x);

    double total = w_mode * p_mode;
    constexpr double kTailCut = 1e-18;
    constexpr std::int64_t kMaxWindow = 8000000;

    double w = w_mode;
    double p = p_mode;
    double d = density_term(a + static_cast<double>(j_mode));
    for (std::int64_t j = j_mode; j > 0; --j) {
        w *= static_cast<double>(j) / mu;          // Poisson(j-1)
        d *= (a + static_cast<double>(j)) / x;     // term at s = a + j - 1
        p = std::min(1.0, p + d);                  // gammp(a + j - 1, x)
        total += w * p;
        if (w < kTailCut) break;
        if (j_mode - j > kMaxWindow) throw NumericError("besq transition cdf window overflow");
    }
    w = w_mode;
    p = p_mode;
    d = density_term(a + static_cast<double>(j_mode));
    for (std::int64_t j = j_mode + 1;; ++j) {
        w *= mu / static_cast<double>(j);          // Poisson(j)
        p = std::max(0.0, p - d);                  // gammp(a + j, x)
        d *= x / (a + static_cast<double>(j));     // term at s = a + j
        total += w * p;
        if (w < kTailCut) break;
        if (j - j_mode > kMaxWindow) throw NumericError("besq transition cdf window overflow");
    }
    if (total < 0.0) return 0.0;
    if (total > 1.0) return 1.0;
    return total;
}

double besq_transition_mean(double delta, double z0, double t) {
    return z0 + delta * t;
}

double besq_transition_var(double delta, double z0, double t) {
    return 2.0 * delta * t * t + 4.0 * z0 * t;
}

} // namespace ks
