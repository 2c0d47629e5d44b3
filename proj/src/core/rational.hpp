#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "core/errors.hpp"

namespace ks {

// Exact rational with 64-bit numerator/denominator, always reduced, den > 0.
// Covers two sources exactly: decimal strings ("2.35" -> 47/20) and binary64
// doubles (every finite double is dyadic). Arithmetic needed by the regime
// module is comparison-only and runs in __int128, so no overflow for the
// magnitudes involved (num, den < 2^63; N <= 10^7).
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;

    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den == 0) throw DomainError("rational with zero denominator");
        if (den < 0) { num = -num; den = -den; }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    static Rational from_decimal_string(const std::string& s);
    static Rational from_double(double v);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    bool positive() const { return num > 0; }
};

// sign of (a/b - c/d), exact
inline int cmp(const Rational& a, const Rational& b) {
    const __int128 lhs = static_cast<__int128>(a.num) * b.den;
    const __int128 rhs = static_cast<__int128>(b.num) * a.den;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

inline bool operator<(const Rational& a, const Rational& b) { return cmp(a, b) < 0; }
inline bool operator>(const Rational& a, const Rational& b) { return cmp(a, b) > 0; }
inline bool operator<=(const Rational& a, const Rational& b) { return cmp(a, b) <= 0; }
inline bool operator>=(const Rational& a, const Rational& b) { return cmp(a, b) >= 0; }
inline bool operator==(const Rational& a, const Rational& b) { return cmp(a, b) == 0; }

inline Rational Rational::from_decimal_string(const std::string& s) {
    if (s.empty()) throw DomainError("empty decimal string");
    std::size_t i = 0;
    bool negative = false;
    if (s[i] == '+' || s[i] == '-') { negative = (s[i] == '-'); ++i; }
    std::int64_t digits = 0;
    int frac_digits = 0;
    bool seen_digit = false, seen_dot = false;
    for (; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '.') {
            if (seen_dot) throw DomainError("malformed decimal: " + s);
            seen_dot = true;
            continue;
        }
        if (c < '0' || c > '9') throw DomainError("malformed decimal: " + s);
        if (digits > (std::numeric_limits<std::int64_t>::max() - 9) / 10)
            throw DomainError("decimal out of range: " + s);
        digits = digits * 10 + (c - '0');
        seen_digit = true;
        if (seen_dot) ++frac_digits;
    }
    if (!seen_digit) throw DomainError("malformed decimal: " + s);
    if (frac_digits > 17) throw DomainError("decimal has too many fraction digits: " + s);
    std::int64_t den = 1;
    for (int k = 0; k < frac_digits; ++k) den *= 10;
    return Rational(negative ? -digits : digits, den);
}

inline Rational Rational::from_double(double v) {
    if (!std::isfinite(v)) throw DomainError("non-finite value has no rational form");
    if (v == 0.0) return Rational(0, 1);
    int exp2 = 0;
    const double mant = std::frexp(v, &exp2); // v = mant * 2^exp2, |mant| in [0.5, 1)
    auto m = static_cast<std::int64_t>(std::ldexp(mant, 53)); // exact, |m| < 2^53
    int e = exp2 - 53;
    while ((m & 1) == 0 && e < 0) { m >>= 1; ++e; }
    if (e >= 0) {
        if (e > 9) throw DomainError("value too large for exact rational");
        return Rational(m << e, 1);
    }
    if (e < -62) throw DomainError("value too small for exact rational");
    return Rational(m, std::int64_t(1) << (-e));
}

} // namespace ks
