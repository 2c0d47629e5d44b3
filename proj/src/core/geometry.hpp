#pragma once

#include <string>
#include <vector>

#include "core/regime.hpp"
#include "core/vec2.hpp"

namespace ks::geometry {

// Positions of the N planar particles.
using Configuration = std::vector<Vec2>;

// K is a set of particle indices, 0-based, distinct, each within [0, N).
using IndexSet = std::vector<int>;

void validate_configuration(const Configuration& x);
void validate_subset(const Configuration& x, const IndexSet& k);

// Center of mass over K, or over all particles.
Vec2 center(const Configuration& x);
Vec2 center(const Configuration& x, const IndexSet& k);

// Dispersion R_K(x) = sum_{i in K} |x^i - S_K(x)|^2, computed in centered form.
double dispersion(const Configuration& x);
double dispersion(const Configuration& x, const IndexSet& k);

// Equivalent pairwise form (2|K|)^-1 sum_{i,j in K} |x^i - x^j|^2, used as a
// cross-check oracle.
double dispersion_pairwise(const Configuration& x, const IndexSet& k);

// Attraction drift b^i(x) = -(theta/N) sum_{j != i} (x^i - x^j)/|x^i - x^j|^2.
// Throws NumericError if any pair sits closer than squared distance 1e-24.
std::vector<Vec2> drift(const regime::ModelParams& model, const Configuration& x);

// Drift with the flat pair cutoff phi_n(r) = max(r, 1/n) applied to squared
// distances: pairs below 1/n contribute nothing, all others exactly as in
// drift(). n >= 1.
std::vector<Vec2> regularized_drift(const regime::ModelParams& model, const Configuration& x,
                                    std::int64_t n);

// Same force field written into a caller-owned buffer (resized to N); returns
// the minimum pairwise squared distance from the same pass. Skips input
// validation: integrator hot path, callers validate once up front.
double regularized_drift_into(const regime::ModelParams& model, const Configuration& x,
                              std::int64_t n, std::vector<Vec2>& out);

// Center/dispersion/direction coordinates: x^i = z + sqrt(r) u^i with u on the
// unit dispersion sphere (zero mean, unit dispersion).
struct SphereCoordinates {
    Vec2 center;
    double dispersion = 0.0;
    Configuration direction;
};

SphereCoordinates sphere_coords(const Configuration& x); // requires positive dispersion
Configuration assemble(const SphereCoordinates& c);      // validates the sphere constraints

// How far a configuration violates the direction-sphere constraints:
// max(|sum u|, |R(u) - 1|).
double sphere_constraint_violation(const Configuration& u);

// c_0 = 1, c_{l+1} = (2 + 8 l) c_l; returned as c_0..c_n.
std::vector<double> campingcar_constants(int n);

// K strictly separated at scale eps: every cross pair has squared distance
// greater than eps and the full configuration norm stays below 1/eps.
bool is_separated(const Configuration& x, const IndexSet& k, double eps);

// log of the interaction density with squared distances smoothed by alpha:
// sum over ordered pairs of -(theta/2N) log(|x^i - x^j|^2 + alpha).
// With alpha = 0 this is log m(x); coincident pairs then raise NumericError.
double log_density_m(const regime::ModelParams& model, const Configuration& x, double alpha);

// CSV rows "particle_index,x,y" with a header; shortest round-trip decimals.
std::string config_to_csv(const Configuration& x);
Configuration config_from_csv(const std::string& text);

// JSON array of [x, y] pairs.
std::string config_to_json(const Configuration& x);
Configuration config_from_json(const std::string& text);

} // namespace ks::geometry
