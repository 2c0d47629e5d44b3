#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/geometry.hpp"
#include "core/regime.hpp"
#include "core/rng.hpp"

namespace ks::dynamics {

struct SimulationParams {
    double dt_base = 1e-4;
    double t_max = 1.0;
    std::int64_t regularization_n = 10000;
    // minimum step; <= 0 requests the derived default 4 dt_base / regularization_n^2
    // (the unclamped adaptive step at the cutoff distance 2/regularization_n), which
    // engages exactly when the closest pair sinks into the drift cutoff zone
    double adapt_floor = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0; // selects the replica stream family
    std::int64_t save_stride = 1;
    // consecutive floor-pinned steps tolerated before the integrator hands back;
    // <= 0 requests the derived default ceil(8 / dt_base). The trip probability
    // per pinned-zone entry scales as exp(-j0^2 patience dt_base) independently
    // of the floor and the cutoff, so the derived value keeps passing encounters
    // below ~1e-20 per entry while a collapsed cluster still trips within
    // patience * floor = 32 / regularization_n time units.
    std::int64_t floor_patience = 0;
    double noise_scale = 1.0; // 0 silences the Brownian term (deterministic runs)
};

void validate(const SimulationParams& sim);
double resolved_adapt_floor(const SimulationParams& sim);
std::int64_t resolved_floor_patience(const SimulationParams& sim);

enum class TrajectoryStatus { Completed, ExplosionFlagged, StepFloorHit };
const char* status_name(TrajectoryStatus s);

struct Trajectory {
    std::vector<double> times; // strictly increasing
    std::vector<geometry::Configuration> frames;
    TrajectoryStatus status = TrajectoryStatus::Completed;
    std::uint64_t seed = 0;
    regime::ModelParams model;
};

struct ScalarPath {
    std::vector<double> times;
    std::vector<double> values;
    std::optional<double> absorbed_at;
};

// Non-finite coordinates during integration; carries the last finite state.
struct BlowupError : NumericError {
    double time;
    geometry::Configuration last_frame;
    BlowupError(double t, geometry::Configuration frame);
};

enum class SegmentEnd { ReachedTime, FloorSaturated };

// Euler-Maruyama integrator for the regularized particle system, built for
// supervised segment-by-segment driving: advance_until returns early when the
// adaptive step has been pinned at the floor for more than floor_patience
// consecutive steps, so a caller can inspect the state, then either resume or
// stop. A diffusing pair that merely grazes the pinned zone escapes in far
// fewer steps (exit times have an exponential tail), while a cluster that has
// chattered down to the drift cutoff stays pinned indefinitely, so the
// run-length test separates the two regimes cleanly.
class ParticleIntegrator {
  public:
    ParticleIntegrator(const regime::ModelParams& model, const SimulationParams& sim,
                       geometry::Configuration x0);

    SegmentEnd advance_until(double t_stop);

    double time() const { return t_; }
    std::uint64_t steps() const { return steps_; }
    const geometry::Configuration& state() const { return x_; }
    void reset_floor_counter() { saturated_run_ = 0; }

    // moves the frames collected so far out; the integrator stays usable but
    // starts a fresh frame list
    Trajectory take_trajectory(TrajectoryStatus status);

  private:
    void save_frame();

    regime::ModelParams model_;
    SimulationParams sim_;
    double floor_ = 0.0;
    std::int64_t patience_ = 0;
    geometry::Configuration x_;
    geometry::Configuration prev_;
    std::vector<Vec2> drift_buf_;
    std::vector<CounterRng> rngs_;
    double t_ = 0.0;
    std::uint64_t steps_ = 0;
    std::int64_t saturated_run_ = 0;
    std::vector<double> times_;
    std::vector<geometry::Configuration> frames_;
};

// One-shot run to sim.t_max; status StepFloorHit when the floor patience
// tripped first, Completed otherwise. Interpretation of a floor hit (real
// explosion vs transient near-collision) is deliberately left to callers.
Trajectory simulate_particles(const regime::ModelParams& model, const SimulationParams& sim,
                              const geometry::Configuration& x0);

// Exact draw from the squared-Bessel transition: Z_t | Z_0 = z0 for dimension
// delta > 0, via the Poisson(z0/2t)-mixed Gamma(delta/2 + J, 2t) law.
double sample_besq_transition(double delta, double z0, double t, CounterRng& rng);

// Squared Bessel path on a uniform grid. delta > 0 chains exact transition
// draws (correct law at every grid time, strictly positive); delta = 0 does
// the same and realizes the genuine absorption atom of the mixture; delta < 0
// falls back to Euler and absorbs at the first zero crossing. Plain Euler is
// not usable for delta near 2: it crosses zero with dt-independent
// probability, which the true process never does.
ScalarPath simulate_besq_path(double delta, double z0, double dt, double t_max, CounterRng& rng);

struct ComparisonPath {
    ScalarPath path;
    std::optional<double> tau_zero;  // first time the state reaches 0
    std::optional<double> tau_level; // first time the state reaches `level`
};

// dS = 2 sqrt|S(1-S)| dW + delta dt + a sqrt(b + |S|) dt from x0, recording
// first hits of 0 and of `level`. Overshoots below zero clamp to 0 only after
// tau_zero is recorded. stop_at_decision ends the path at the first recorded
// hit (for hitting-probability estimation).
ComparisonPath simulate_comparison_sde(double delta, double a, double b, double x0, double level,
                                       double dt, double t_max, CounterRng& rng,
                                       bool stop_at_decision = false);

// Unit-dispersion-sphere dynamics: Euler step of
//   dU = P dB + P b_n(U) dt - ((2N-3)/2) U dt,   P = proj_{U-perp} proj_H,
// then re-centering and renormalization each step. Fixed step dt_base: the
// -(2N-3)/2 U term cancels the Ito norm growth, so the renormalization is an
// O(dt^2) correction rather than a crutch.
Trajectory simulate_sphere(const regime::ModelParams& model, const geometry::Configuration& u0,
                           const SimulationParams& sim);

// Piecewise-linear interpolant through (xs, ys), clamped outside the range.
struct MonotoneInterpolant {
    std::vector<double> xs; // strictly increasing
    std::vector<double> ys;
    double operator()(double x) const;
};

struct TimeChangeResult {
    ScalarPath a_path;        // A_t = int_0^t ds / D_s, trapezoid on the grid
    MonotoneInterpolant rho;  // inverse map: rho(A_t) = t on grid nodes
};

// Additive functional of 1/D and its inverse. D must be strictly positive;
// an absorbed trailing zero sample is excluded, anything else nonpositive
// raises a domain error.
TimeChangeResult time_change(const ScalarPath& d_path);

// Long-form CSV "t,particle,x,y" and a JSON sidecar with model, sim, status,
// seed. The CSV alone round-trips times and frames.
std::string trajectory_to_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(const std::string& text);
std::string trajectory_sidecar_json(const Trajectory& traj, const SimulationParams& sim);

// CSV "t,value" with an absorbed_at header comment when present.
std::string scalar_path_to_csv(const ScalarPath& path);
ScalarPath scalar_path_from_csv(const std::string& text);

} // namespace ks::dynamics
