#include "core/regime.hpp"

#include <charconv>

namespace ks::regime {

namespace {

std::string shortest_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void validate(const ModelParams& p) {
    if (p.n < 2) throw DomainError("model requires N >= 2");
    if (p.n > 1000000) throw DomainError("model supports N <= 10^6");
    // theta = 0 is legal for the dynamics (pure Brownian motion); only the
    // phase diagram needs theta > 0, checked in classify
    if (p.theta.num < 0) throw DomainError("model requires theta >= 0");
}

// sign of 2 N - k theta = (2 N den - k num) / den
int sign_2n_minus_k_theta(const ModelParams& p, int k) {
    const __int128 v = static_cast<__int128>(2) * p.n * p.theta.den -
                       static_cast<__int128>(k) * p.theta.num;
    if (v < 0) return -1;
    if (v > 0) return 1;
    return 0;
}

} // namespace

ModelParams ModelParams::from_decimal(int n, const std::string& theta_decimal) {
    ModelParams p;
    p.n = n;
    p.theta = Rational::from_decimal_string(theta_decimal);
    p.theta_display = theta_decimal;
    validate(p);
    return p;
}

ModelParams ModelParams::from_double(int n, double theta) {
    ModelParams p;
    p.n = n;
    p.theta = Rational::from_double(theta);
    p.theta_display = shortest_double(theta);
    validate(p);
    return p;
}

ModelParams ModelParams::from_rational(int n, const Rational& theta) {
    ModelParams p;
    p.n = n;
    p.theta = theta;
    p.theta_display = std::to_string(theta.num) + "/" + std::to_string(theta.den);
    validate(p);
    return p;
}

ModelParams ModelParams::from_string(int n, const std::string& theta) {
    const auto slash = theta.find('/');
    if (slash == std::string::npos) return from_decimal(n, theta);
    std::int64_t num = 0, den = 0;
    const char* nb = theta.data();
    const char* ne = theta.data() + slash;
    const char* db = theta.data() + slash + 1;
    const char* de = theta.data() + theta.size();
    const auto rn = std::from_chars(nb, ne, num);
    const auto rd = std::from_chars(db, de, den);
    if (rn.ec != std::errc() || rn.ptr != ne || rd.ec != std::errc() || rd.ptr != de)
        throw DomainError("malformed rational: " + theta);
    return from_rational(n, Rational(num, den));
}

double bessel_dimension(const ModelParams& params, int k) {
    if (k < 2 || k > params.n) throw DomainError("bessel dimension requires 2 <= k <= N");
    const double theta = params.theta_value();
    return (k - 1) * (2.0 - k * theta / params.n);
}

int dimension_sign(const ModelParams& params, int k) {
    if (k < 2 || k > params.n) throw DomainError("dimension sign requires 2 <= k <= N");
    // k - 1 > 0, so the sign is that of 2 - k theta / N
    return sign_2n_minus_k_theta(params, k);
}

int dimension_cmp_two(const ModelParams& params, int k) {
    if (k < 2 || k > params.n) throw DomainError("dimension comparison requires 2 <= k <= N");
    // d(k) - 2 = [(k - 1)(2 N den - k num) - 2 N den] / (N den)
    const __int128 nden = static_cast<__int128>(params.n) * params.theta.den;
    const __int128 lhs = static_cast<__int128>(k - 1) *
                         (2 * nden - static_cast<__int128>(k) * params.theta.num);
    const __int128 rhs = 2 * nden;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

int dimension2_cmp_four_thirds(const ModelParams& params) {
    // d(2) = 2 - 2 theta / N; compare against 4/3: 3 (2 N den - 2 num) vs 4 N den
    const __int128 nden = static_cast<__int128>(params.n) * params.theta.den;
    const __int128 lhs = 3 * (2 * nden - 2 * static_cast<__int128>(params.theta.num));
    const __int128 rhs = 4 * nden;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

RegimeReport classify(const ModelParams& params) {
    // the phase-diagram statements all assume 0 < theta < N; geometry and
    // dynamics alone do not
    if (params.theta.num == 0) throw DomainError("classification requires theta > 0");
    if (static_cast<__int128>(params.n) * params.theta.den <= params.theta.num)
        throw DomainError("classification requires N > theta");

    RegimeReport rep;

    // k0 = ceil(2 N / theta) = ceil(2 N den / num), exact integer arithmetic
    const __int128 twond = static_cast<__int128>(2) * params.n * params.theta.den;
    const __int128 num = params.theta.num;
    const __int128 k0 = (twond + num - 1) / num;
    if (k0 > 1000000000000000LL)
        throw DomainError("theta too small: critical cluster size out of supported range");
    rep.k0 = static_cast<std::int64_t>(k0);
    rep.k1 = rep.k0 - 1;

    // k2 = k0 - 2 when d(k0 - 2) < 2, else k0 - 1. The comparison runs on the
    // formula itself (valid beyond the k <= N table): (km2 - 1)(2 N den - km2 num)
    // against 2 N den. The first factor is bounded by 3 num near the ceiling,
    // so the product stays within __int128.
    const __int128 km2 = k0 - 2;
    if (km2 >= 2) {
        const __int128 slack = twond - km2 * num; // in (0, 3 num]
        const bool below_two = (km2 - 1) * slack < twond;
        rep.k2 = below_two ? static_cast<std::int64_t>(km2) : rep.k1;
    } else {
        rep.k2 = rep.k1;
    }

    // supercritical iff theta >= 2, exact
    rep.regime = (params.theta >= Rational(2, 1)) ? Regime::Supercritical : Regime::Subcritical;

    // theta >= 2 and N > 3 theta, exact
    const bool n_gt_3theta =
        static_cast<__int128>(params.n) * params.theta.den > 3 * static_cast<__int128>(params.theta.num);
    rep.theorem_preconditions_met = (rep.regime == Regime::Supercritical) && n_gt_3theta;

    rep.dimension_table.reserve(static_cast<std::size_t>(params.n - 1));
    for (int k = 2; k <= params.n; ++k)
        rep.dimension_table.push_back(bessel_dimension(params, k));

    return rep;
}

BoundaryBehavior bessel_boundary_behavior(double delta) {
    if (delta >= 2.0) return BoundaryBehavior::NeverHitsZero;
    if (delta > 0.0) return BoundaryBehavior::ReflectsAtZero;
    return BoundaryBehavior::AbsorbedAtZero;
}

const char* regime_name(Regime r) {
    return r == Regime::Supercritical ? "supercritical" : "subcritical";
}

const char* boundary_name(BoundaryBehavior b) {
    switch (b) {
        case BoundaryBehavior::NeverHitsZero: return "never_hits_zero";
        case BoundaryBehavior::ReflectsAtZero: return "reflects_at_zero";
        case BoundaryBehavior::AbsorbedAtZero: return "absorbed_at_zero";
    }
    return "unknown";
}

} // namespace ks::regime
