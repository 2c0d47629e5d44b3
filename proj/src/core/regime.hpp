#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/rational.hpp"

namespace ks::regime {

// Model of N planar particles with pairwise attraction intensity theta.
// theta = 0 (free Brownian motion) is admitted; the phase-diagram operations
// additionally require 0 < theta < N and enforce it themselves.
struct ModelParams {
    int n = 0;
    Rational theta;
    std::string theta_display;

    static ModelParams from_decimal(int n, const std::string& theta_decimal);
    static ModelParams from_double(int n, double theta);
    static ModelParams from_rational(int n, const Rational& theta);
    // decimal ("2.35") or rational ("47/20") spelling
    static ModelParams from_string(int n, const std::string& theta);

    double theta_value() const { return theta.value(); }

    bool operator==(const ModelParams& o) const {
        return n == o.n && theta == o.theta;
    }
};

enum class Regime { Subcritical, Supercritical };

enum class BoundaryBehavior { NeverHitsZero, ReflectsAtZero, AbsorbedAtZero };

struct RegimeReport {
    std::int64_t k0 = 0;
    std::int64_t k1 = 0;
    std::int64_t k2 = 0;
    Regime regime = Regime::Subcritical;
    bool theorem_preconditions_met = false;
    // dimension_table[i] = d(k) for k = 2 + i, k up to N
    std::vector<double> dimension_table;

    double dimension_at(int k) const { return dimension_table.at(static_cast<std::size_t>(k - 2)); }
};

// d(k) = (k - 1) (2 - k theta / N), defined for 2 <= k <= N.
double bessel_dimension(const ModelParams& params, int k);

// Exact sign of d(k): -1, 0, +1. Same domain as bessel_dimension.
int dimension_sign(const ModelParams& params, int k);

// Exact comparison of d(k) against 2: -1 if d(k) < 2, 0 if equal, +1 if greater.
int dimension_cmp_two(const ModelParams& params, int k);

// Exact comparison of d(2) against 4/3 (sharp when N > 3 theta).
int dimension2_cmp_four_thirds(const ModelParams& params);

RegimeReport classify(const ModelParams& params);

// Boundary classification of a squared Bessel process of dimension delta.
BoundaryBehavior bessel_boundary_behavior(double delta);

const char* regime_name(Regime r);
const char* boundary_name(BoundaryBehavior b);

} // namespace ks::regime
