#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/analysis.hpp"
#include "core/dynamics.hpp"
#include "core/geometry.hpp"
#include "core/regime.hpp"

namespace ks::harness {

// Initial condition shared by every replica of an experiment. The random kind
// draws N iid standard normal points from its own sub-seeded stream, recenters
// them to zero mean, and rescales to dispersion exactly one, so experiments
// across models start on a common dispersion scale.
struct InitialCondition {
    enum class Kind { ExplicitList, UnitDispersionRandom };
    Kind kind = Kind::UnitDispersionRandom;
    geometry::Configuration points; // ExplicitList only
    std::uint64_t sub_seed = 0;     // UnitDispersionRandom only
};

enum class AnalysisKind { Decomposition, Census, Explosion, DriftDiagnostic };

const char* analysis_name(AnalysisKind a);

struct ExperimentConfig {
    regime::ModelParams model;
    dynamics::SimulationParams sim; // sim.seed is the experiment seed; replica i
                                    // runs on stream (seed, i)
    std::int64_t replicas = 1;
    InitialCondition initial;
    std::vector<AnalysisKind> analyses; // non-empty, duplicates rejected,
                                        // stored in enum order
    analysis::AnalysisThresholds thresholds;
    std::string output_dir;
    bool save_trajectories = false; // also write one CSV + sidecar per replica
};

// Strict JSON parse: an unknown key anywhere is a ConfigError naming the
// key ("sim.dt_bse"). theta accepts a decimal string ("2.35"),
// an exact rational string ("47/20"), or a JSON number (taken as the exact
// binary64 value). Malformed values are ConfigErrors naming the key.
// require_output_dir = false admits the identity echo embedded in
// aggregate.json, which carries no output location.
ExperimentConfig config_from_json(const std::string& text, bool require_output_dir = true);

// Canonical serialization of the experiment identity: sorted keys, rational
// theta, every default materialized. Excludes output_dir and
// save_trajectories, which say where results go, not what they are.
std::string config_canonical_json(const ExperimentConfig& config);

// FNV-1a 64 of the canonical form, 16 hex digits. Stamped into every
// persisted file so outputs stay traceable to their generator.
std::string config_hash(const ExperimentConfig& config);

// Resolves the initial condition to a concrete configuration (deterministic).
geometry::Configuration initial_configuration(const ExperimentConfig& config);

// Runs one path with explosion supervision: whenever the integrator saturates
// its step floor, the current state is scanned for an isolated cluster of at
// least k0(model) particles with dispersion <= thresholds.eps_expl. A hit
// stops the run flagged as an explosion; a false alarm (a transient passage
// that pinned the step) resets the floor counter and resumes until sim.t_max.
// The model must classify, so theta in (0, N) is required.
dynamics::Trajectory simulate_supervised(const regime::ModelParams& model,
                                         const dynamics::SimulationParams& sim,
                                         const geometry::Configuration& x0,
                                         const analysis::AnalysisThresholds& thresholds);

// One row per replica; optional fields are set only when the corresponding
// analysis was requested (and, for explosion details, only when detected).
struct ReplicaRow {
    std::int64_t index = 0;
    dynamics::TrajectoryStatus status = dynamics::TrajectoryStatus::Completed;
    double t_end = 0.0;
    std::uint64_t steps = 0;
    double final_dispersion = 0.0;
    std::optional<double> com_dx;
    std::optional<double> com_dy;
    std::optional<double> recon_error;
    std::optional<double> truncated_at;
    std::optional<analysis::ExplosionOutcome> explosion;
    std::optional<std::int64_t> explosion_size;
    std::optional<double> explosion_time;
    std::optional<std::int64_t> events_total;
    std::optional<std::int64_t> events_isolated;
};

struct TaggedEvent {
    std::int64_t replica = 0;
    analysis::CollisionEvent event;
};

struct BatchResult {
    std::vector<ReplicaRow> rows;     // index order
    std::vector<TaggedEvent> events;  // replica order, census order within
    std::string aggregate_json;       // byte-identical to aggregate.json
};

// Runs config.replicas paths (replica i on RNG stream (sim.seed, i)), applies
// the requested analyses, and persists replicas.csv, events.jsonl, and
// aggregate.json under config.output_dir; per-replica trajectory CSVs are
// added behind config.save_trajectories. Every file is stamped with the code
// version, the config hash, and the seed. Aggregation folds over the replica
// index, never completion order, so identical configs produce bitwise
// identical outputs no matter how the work is scheduled.
BatchResult run_batch(const ExperimentConfig& config);

// Reloads a results directory, recomputes every aggregate from the persisted
// rows and events, and verifies the recomputation matches aggregate.json
// byte for byte; IoError otherwise, and on missing/corrupt files or on files
// stamped with different config hashes (outputs of different experiments
// never aggregate together). Returns the verified aggregate JSON text.
std::string summarize(const std::string& results_dir);

// Dynamic work sharing across hardware threads with results keyed by index;
// rethrows the first worker exception after joining.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body);

} // namespace ks::harness
