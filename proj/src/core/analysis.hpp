#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/dynamics.hpp"
#include "core/geometry.hpp"
#include "core/regime.hpp"
#include "core/rng.hpp"

namespace ks::analysis {

using geometry::IndexSet;

// Detection scales, in squared-distance/dispersion units except eps_link
// (plain distance). Tuned for initial configurations rescaled to unit
// dispersion; all overridable per experiment.
struct AnalysisThresholds {
    double eps_coll = 1e-4; // cluster dispersion at or below this is a collision
    double eps_sep = 1e-1;  // adjoining any outside particle must keep dispersion above this
    double eps_link = 1e-2; // linkage distance for cluster partitions
    double eps_expl = 1e-4; // terminal cluster dispersion bound for an explosion report
};

// Connected components of the graph linking i, j when |x^i - x^j| <= eps_link
// (union-find). Components are sorted by smallest member, members ascending.
std::vector<IndexSet> detect_clusters(const geometry::Configuration& config, double eps_link);

struct CollisionEvent {
    double t_start = 0.0;
    double t_end = 0.0;
    IndexSet indices;
    std::int64_t size = 0;
    double min_dispersion = 0.0;
    // no outside particle came within eps_sep (as dispersion of K plus that
    // particle) at any frame of the window
    bool isolated = false;
};

// Scans frames for clusters K with R_K <= eps_coll, one event per maximal run
// of consecutive frames in which the same K qualifies. Candidate clusters are
// the maximal single-linkage clusters satisfying the dispersion bound, so a
// tight pair inside a looser group is still seen. Requires eps_coll < eps_sep.
std::vector<CollisionEvent> collision_census(const dynamics::Trajectory& traj, double eps_coll,
                                             double eps_sep);

struct ExplosionReport {
    double t_explosion = 0.0;
    IndexSet cluster;
    std::int64_t size = 0;
    geometry::Configuration terminal_frame;
};

enum class ExplosionOutcome {
    Absent,       // nothing resembling an explosion in the terminal frame
    Inconclusive, // integration was flagged, but no qualifying cluster found
    Detected,
};

struct ExplosionScan {
    ExplosionOutcome outcome = ExplosionOutcome::Absent;
    std::optional<ExplosionReport> report; // set iff outcome == Detected
};

// Scans the terminal frame for the smallest isolated cluster K with
// |K| >= k0(model) and R_K <= eps_expl. The model must classify (theta > 0).
ExplosionScan detect_explosion(const dynamics::Trajectory& traj, const regime::ModelParams& model,
                               double eps_expl, double eps_sep);

struct ReconstructionCheck {
    double max_reconstruction_error = 0.0;
    std::optional<double> truncated_at;
};

// Reassembly error alone: every frame split into center / dispersion /
// direction and rebuilt, plus the time-change consistency of the dispersion
// path. Stops at the first frame with numerically zero dispersion.
ReconstructionCheck reconstruction_check(const dynamics::Trajectory& traj);

struct DecompositionReport {
    double max_reconstruction_error = 0.0;
    double com_variance_ratio = 0.0;
    double dispersion_ks_p = 0.0;
    double independence_corr = 0.0;
    // set when the dispersion hit numerical zero and the scan stopped there
    std::optional<double> truncated_at;
};

// Splits every frame into center / dispersion / direction, reassembles, and
// reports the worst reconstruction error together with within-path law checks:
// quadratic variation of the center against 2 t / N, probability-integral
// transforms of dispersion steps against the exact squared Bessel transition
// of dimension d(N), and the correlation between normalized center and
// dispersion innovations (independent in the exact law). Needs >= 2 frames.
DecompositionReport decomposition_check(const dynamics::Trajectory& traj,
                                        const regime::ModelParams& model);

// Endpoint-law version across replicas sharing x0 and t_max: center variance
// ratio against t/N, KS of terminal dispersion against the exact transition,
// and correlation of |center displacement|^2 with terminal dispersion.
// Reconstruction is still checked on every frame of every added trajectory.
class EnsembleDecomposition {
  public:
    void add(const dynamics::Trajectory& traj, const regime::ModelParams& model);
    DecompositionReport finish() const; // needs >= 2 replicas

  private:
    double max_err_ = 0.0;
    double r0_ = 0.0, t_ = 0.0;
    double dim_ = 0.0;
    double n_particles_ = 0.0;
    std::vector<double> com_dx_, com_dy_, final_r_;
    std::optional<double> truncated_at_;
};

struct DriftReport {
    double empirical_mean = 0.0;
    double predicted_mean = 0.0; // R_K(x0) + d(|K|) t
    double std_error = 0.0;
};

// Compares the ensemble mean of R_K at time t with the Bessel-dimension drift
// prediction. Replicas must share x0 and carry a frame at time t (within
// 1e-9). Exact for K = all particles; for proper subsets the prediction is the
// leading local drift, useful as a diagnostic only.
DriftReport drift_diagnostic(const std::vector<dynamics::Trajectory>& ensemble,
                             const regime::ModelParams& model, const IndexSet& k, double t);

struct HittingProbability {
    double value = 0.0;
    bool divergent_scale = false; // scale function has f(0) = -inf; value is 0
    double quadrature_error = 0.0;
};

// P(tau_0 < tau_y) for the comparison diffusion started at x, 0 <= x <= y < 1,
// through the scale function f(z) = int exp(-int (delta + a sqrt(b+v)) /
// (2 v (1-v)) dv) du. The v=0 singularity integrates iff c = (delta+a sqrt b)/2
// < 1; otherwise the flagged zero is returned. Requires b > 0.
HittingProbability hitting_probability(double delta, double a, double b, double x, double y);

// Instantaneous drift of R_K under the unit-sphere dynamics at configuration u:
// d(|K|) - d(N) R_K(u) minus the cross-cluster interaction term. Exactly zero
// when K is the full set. Throws NumericError on a coincident cross pair.
double sphere_dispersion_drift(const regime::ModelParams& model, const geometry::Configuration& u,
                               const IndexSet& k);

struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};

// One-sample Kolmogorov-Smirnov against a cdf, asymptotic p-value.
KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf);
// Two-sample variant, asymptotic p-value with the effective sample size.
KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b);

struct MassProbeResult {
    double estimate = 0.0;
    double std_error = 0.0;
};

// Monte-Carlo estimate of the interaction-density mass
//   int_{B(0,1)^k} prod_{i<j} |y^i - y^j|^(-2 theta/N) dy
// restricted to min pairwise distance >= diag_cutoff. Reusing one rng seed
// across different cutoffs gives common random numbers, so shrinking the
// cutoff can only grow the estimate (nested integrands on shared points).
MassProbeResult mass_probe(const regime::ModelParams& model, std::int64_t k,
                           std::int64_t n_samples, double diag_cutoff, CounterRng& rng);

// R_K along the trajectory as a scalar path (for t,R_K trace files).
dynamics::ScalarPath dispersion_trace(const dynamics::Trajectory& traj, const IndexSet& k);

// One JSON object per event / one per line; strict parser.
std::string event_to_json(const CollisionEvent& event);
std::string events_to_jsonl(const std::vector<CollisionEvent>& events);
std::vector<CollisionEvent> events_from_jsonl(const std::string& text);

} // namespace ks::analysis
