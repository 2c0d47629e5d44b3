#include "kellersegel.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <utility>

#include <json.hpp>

#include "core/analysis.hpp"
#include "core/dynamics.hpp"
#include "core/errors.hpp"
#include "core/geometry.hpp"
#include "core/harness.hpp"
#include "core/regime.hpp"
#include "core/rng.hpp"
#include "core/special.hpp"
#include "core/version.hpp"

struct ks_model {
    ks::regime::ModelParams params;
};

struct ks_traj {
    ks::dynamics::Trajectory traj;
};

struct ks_ensemble {
    ks::regime::ModelParams params;
    ks::analysis::EnsembleDecomposition deco;
};

namespace {

thread_local std::string g_last_error;

void set_error(const char* what) { g_last_error = what ? what : ""; }

template <typename Fn>
ks_status guarded(Fn&& fn) noexcept {
    try {
        fn();
        return KS_OK;
    } catch (const ks::ConfigError& e) {
        set_error(e.what());
        return KS_ECONFIG;
    } catch (const ks::IoError& e) {
        set_error(e.what());
        return KS_EIO;
    } catch (const ks::NumericError& e) {
        set_error(e.what());
        return KS_ENUMERIC;
    } catch (const ks::DomainError& e) {
        set_error(e.what());
        return KS_EDOMAIN;
    } catch (const std::exception& e) {
        set_error(e.what());
        return KS_EINTERNAL;
    } catch (...) {
        set_error("unknown failure");
        return KS_EINTERNAL;
    }
}

ks_status invalid(const char* what) {
    set_error(what);
    return KS_EINVAL;
}

char* copy_out(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ks_status string_result(const std::string& s, char** out) {
    *out = copy_out(s);
    if (!*out) {
        set_error("out of memory");
        return KS_EINTERNAL;
    }
    return KS_OK;
}

ks::dynamics::SimulationParams to_sim(const ks_sim_params& c) {
    ks::dynamics::SimulationParams sim;
    sim.dt_base = c.dt_base;
    sim.t_max = c.t_max;
    sim.regularization_n = c.regularization_n;
    sim.adapt_floor = c.adapt_floor;
    sim.seed = c.seed;
    sim.path_index = c.path_index;
    sim.save_stride = c.save_stride;
    sim.floor_patience = c.floor_patience;
    sim.noise_scale = c.noise_scale;
    return sim;
}

void fill_decomposition(const ks::analysis::DecompositionReport& rep,
                        ks_decomposition_report* out) {
    out->max_reconstruction_error = rep.max_reconstruction_error;
    out->com_variance_ratio = rep.com_variance_ratio;
    out->dispersion_ks_p = rep.dispersion_ks_p;
    out->independence_corr = rep.independence_corr;
    out->truncated = rep.truncated_at ? 1 : 0;
    out->truncated_at = rep.truncated_at.value_or(0.0);
}

} // namespace

extern "C" {

const char* ks_version(void) { return ks::kVersion; }

const char* ks_last_error(void) { return g_last_error.c_str(); }

void ks_string_free(char* s) { std::free(s); }

ks_status ks_model_create(int n, const char* theta, ks_model** out) {
    if (!theta || !out) return invalid("ks_model_create: null argument");
    *out = nullptr;
    return guarded([&] {
        *out = new ks_model{ks::regime::ModelParams::from_string(n, theta)};
    });
}

void ks_model_free(ks_model* m) { delete m; }

int ks_model_n(const ks_model* m) { return m ? m->params.n : -1; }

ks_status ks_classify(const ks_model* m, ks_regime_report* out) {
    if (!m || !out) return invalid("ks_classify: null argument");
    return guarded([&] {
        const auto rep = ks::regime::classify(m->params);
        out->k0 = rep.k0;
        out->k1 = rep.k1;
        out->k2 = rep.k2;
        out->supercritical = rep.regime == ks::regime::Regime::Supercritical ? 1 : 0;
        out->preconditions_met = rep.theorem_preconditions_met ? 1 : 0;
    });
}

ks_status ks_dimension(const ks_model* m, int k, double* out) {
    if (!m || !out) return invalid("ks_dimension: null argument");
    return guarded([&] { *out = ks::regime::bessel_dimension(m->params, k); });
}

void ks_sim_defaults(ks_sim_params* out) {
    if (!out) return;
    const ks::dynamics::SimulationParams sim;
    out->dt_base = sim.dt_base;
    out->t_max = sim.t_max;
    out->regularization_n = sim.regularization_n;
    out->adapt_floor = sim.adapt_floor;
    out->seed = sim.seed;
    out->path_index = sim.path_index;
    out->save_stride = sim.save_stride;
    out->floor_patience = sim.floor_patience;
    out->noise_scale = sim.noise_scale;
}

ks_status ks_initial_random(const ks_model* m, uint64_t sub_seed, double* xy) {
    if (!m || !xy) return invalid("ks_initial_random: null argument");
    return guarded([&] {
        ks::harness::ExperimentConfig cfg;
        cfg.model = m->params;
        cfg.initial.kind = ks::harness::InitialCondition::Kind::UnitDispersionRandom;
        cfg.initial.sub_seed = sub_seed;
        const auto x = ks::harness::initial_configuration(cfg);
        for (std::size_t i = 0; i < x.size(); ++i) {
            xy[2 * i] = x[i].x;
            xy[2 * i + 1] = x[i].y;
        }
    });
}

ks_status ks_simulate(const ks_model* m, const ks_sim_params* sim, const double* xy,
                      int supervised, ks_traj** out) {
    if (!m || !sim || !xy || !out) return invalid("ks_simulate: null argument");
    *out = nullptr;
    return guarded([&] {
        ks::geometry::Configuration x0(static_cast<std::size_t>(m->params.n));
        for (std::size_t i = 0; i < x0.size(); ++i) {
            x0[i].x = xy[2 * i];
            x0[i].y = xy[2 * i + 1];
        }
        const auto params = to_sim(*sim);
        ks::dynamics::Trajectory traj =
            supervised ? ks::harness::simulate_supervised(m->params, params, x0,
                                                          ks::analysis::AnalysisThresholds{})
                       : ks::dynamics::simulate_particles(m->params, params, x0);
        *out = new ks_traj{std::move(traj)};
    });
}

void ks_traj_free(ks_traj* t) { delete t; }

int ks_traj_status(const ks_traj* t) {
    if (!t) return -1;
    switch (t->traj.status) {
        case ks::dynamics::TrajectoryStatus::Completed: return 0;
        case ks::dynamics::TrajectoryStatus::ExplosionFlagged: return 1;
        case ks::dynamics::TrajectoryStatus::StepFloorHit: return 2;
    }
    return -1;
}

ks_status ks_traj_frames(const ks_traj* t, int64_t* out) {
    if (!t || !out) return invalid("ks_traj_frames: null argument");
    *out = static_cast<int64_t>(t->traj.frames.size());
    return KS_OK;
}

ks_status ks_traj_final_time(const ks_traj* t, double* out) {
    if (!t || !out) return invalid("ks_traj_final_time: null argument");
    if (t->traj.times.empty()) return invalid("ks_traj_final_time: empty trajectory");
    *out = t->traj.times.back();
    return KS_OK;
}

ks_status ks_traj_to_csv(const ks_traj* t, char** out) {
    if (!t || !out) return invalid("ks_traj_to_csv: null argument");
    return guarded([&] {
        const std::string s = ks::dynamics::trajectory_to_csv(t->traj);
        if (string_result(s, out) != KS_OK) throw std::bad_alloc();
    });
}

ks_status ks_traj_from_csv(const char* text, ks_traj** out) {
    if (!text || !out) return invalid("ks_traj_from_csv: null argument");
    *out = nullptr;
    return guarded([&] {
        *out = new ks_traj{ks::dynamics::trajectory_from_csv(text)};
    });
}

ks_status ks_traj_sidecar_json(const ks_traj* t, const ks_sim_params* sim, char** out) {
    if (!t || !sim || !out) return invalid("ks_traj_sidecar_json: null argument");
    return guarded([&] {
        const std::string s = ks::dynamics::trajectory_sidecar_json(t->traj, to_sim(*sim));
        if (string_result(s, out) != KS_OK) throw std::bad_alloc();
    });
}

ks_status ks_census_jsonl(const ks_traj* t, double eps_coll, double eps_sep, char** out) {
    if (!t || !out) return invalid("ks_census_jsonl: null argument");
    return guarded([&] {
        const auto events = ks::analysis::collision_census(t->traj, eps_coll, eps_sep);
        if (string_result(ks::analysis::events_to_jsonl(events), out) != KS_OK)
            throw std::bad_alloc();
    });
}

ks_status ks_explosion_json(const ks_model* m, const ks_traj* t, double eps_expl,
                            double eps_sep, char** out) {
    if (!m || !t || !out) return invalid("ks_explosion_json: null argument");
    return guarded([&] {
        const auto scan = ks::analysis::detect_explosion(t->traj, m->params, eps_expl, eps_sep);
        nlohmann::json j;
        switch (scan.outcome) {
            case ks::analysis::ExplosionOutcome::Absent: j["outcome"] = "absent"; break;
            case ks::analysis::ExplosionOutcome::Inconclusive:
                j["outcome"] = "inconclusive";
                break;
            case ks::analysis::ExplosionOutcome::Detected: j["outcome"] = "detected"; break;
        }
        if (scan.report) {
            j["t_explosion"] = scan.report->t_explosion;
            j["cluster"] = scan.report->cluster;
            j["size"] = scan.report->size;
        }
        if (string_result(j.dump(), out) != KS_OK) throw std::bad_alloc();
    });
}

ks_status ks_decomposition_check(const ks_model* m, const ks_traj* t,
                                 ks_decomposition_report* out) {
    if (!m || !t || !out) return invalid("ks_decomposition_check: null argument");
    return guarded([&] {
        fill_decomposition(ks::analysis::decomposition_check(t->traj, m->params), out);
    });
}

ks_status ks_dispersion_trace_csv(const ks_traj* t, const int* indices, int count, char** out) {
    if (!t || !indices || !out || count <= 0)
        return invalid("ks_dispersion_trace_csv: null or empty argument");
    return guarded([&] {
        const ks::analysis::IndexSet k(indices, indices + count);
        const auto path = ks::analysis::dispersion_trace(t->traj, k);
        if (string_result(ks::dynamics::scalar_path_to_csv(path), out) != KS_OK)
            throw std::bad_alloc();
    });
}

ks_status ks_ensemble_create(const ks_model* m, ks_ensemble** out) {
    if (!m || !out) return invalid("ks_ensemble_create: null argument");
    *out = new ks_ensemble{m->params, {}};
    return KS_OK;
}

ks_status ks_ensemble_add(ks_ensemble* e, const ks_traj* t) {
    if (!e || !t) return invalid("ks_ensemble_add: null argument");
    return guarded([&] { e->deco.add(t->traj, e->params); });
}

ks_status ks_ensemble_finish(const ks_ensemble* e, ks_decomposition_report* out) {
    if (!e || !out) return invalid("ks_ensemble_finish: null argument");
    return guarded([&] { fill_decomposition(e->deco.finish(), out); });
}

void ks_ensemble_free(ks_ensemble* e) { delete e; }

ks_status ks_besq_cdf(double delta, double z0, double t, double z, double* out) {
    if (!out) return invalid("ks_besq_cdf: null argument");
    return guarded([&] { *out = ks::besq_transition_cdf(delta, z0, t, z); });
}

ks_status ks_besq_mean(double delta, double z0, double t, double* out) {
    if (!out) return invalid("ks_besq_mean: null argument");
    return guarded([&] { *out = ks::besq_transition_mean(delta, z0, t); });
}

ks_status ks_besq_var(double delta, double z0, double t, double* out) {
    if (!out) return invalid("ks_besq_var: null argument");
    return guarded([&] { *out = ks::besq_transition_var(delta, z0, t); });
}

ks_status ks_hitting_probability(double delta, double a, double b, double x, double y,
                                 ks_hitting_result* out) {
    if (!out) return invalid("ks_hitting_probability: null argument");
    return guarded([&] {
        const auto hp = ks::analysis::hitting_probability(delta, a, b, x, y);
        out->value = hp.value;
        out->divergent_scale = hp.divergent_scale ? 1 : 0;
        out->quadrature_error = hp.quadrature_error;
    });
}

ks_status ks_mass_probe(const ks_model* m, int k, int64_t samples, double cutoff,
                        uint64_t seed, double* estimate, double* std_error) {
    if (!m || !estimate || !std_error) return invalid("ks_mass_probe: null argument");
    return guarded([&] {
        ks::CounterRng rng(seed, 0, 0);
        const auto res = ks::analysis::mass_probe(m->params, k, samples, cutoff, rng);
        *estimate = res.estimate;
        *std_error = res.std_error;
    });
}

ks_status ks_run_batch(const char* config_json, char** aggregate_out) {
    if (!config_json || !aggregate_out) return invalid("ks_run_batch: null argument");
    return guarded([&] {
        const auto config = ks::harness::config_from_json(config_json);
        const auto result = ks::harness::run_batch(config);
        if (string_result(result.aggregate_json, aggregate_out) != KS_OK)
            throw std::bad_alloc();
    });
}

ks_status ks_summarize(const char* results_dir, char** aggregate_out) {
    if (!results_dir || !aggregate_out) return invalid("ks_summarize: null argument");
    return guarded([&] {
        if (string_result(ks::harness::summarize(results_dir), aggregate_out) != KS_OK)
            throw std::bad_alloc();
    });
}

} // extern "C"
