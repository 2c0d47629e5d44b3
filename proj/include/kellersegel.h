/* C interface to the particle-system simulator and its verification
 * analyses. Every function that can fail returns a ks_status; the expanded
 * message for the calling thread's most recent failure is ks_last_error().
 * Strings handed out as char** are heap copies released with
 * ks_string_free(). Handles are opaque and freed with their *_free call.
 */
#ifndef KELLERSEGEL_H
#define KELLERSEGEL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ks_status {
    KS_OK = 0,
    KS_EDOMAIN = 1,  /* parameters outside the model's domain */
    KS_ECONFIG = 2,  /* malformed or contradictory experiment config */
    KS_EIO = 3,      /* file or serialization failure */
    KS_ENUMERIC = 4, /* numerical failure (blowup, non-convergence) */
    KS_EINVAL = 5,   /* null or malformed argument at the C boundary */
    KS_EINTERNAL = 6
} ks_status;

typedef struct ks_model ks_model;
typedef struct ks_traj ks_traj;
typedef struct ks_ensemble ks_ensemble;

/* mirrors the integrator's knobs; fill with ks_sim_defaults first */
typedef struct ks_sim_params {
    double dt_base;
    double t_max;
    int64_t regularization_n;
    double adapt_floor;     /* <= 0 selects the derived default */
    uint64_t seed;
    uint64_t path_index;    /* replica stream selector */
    int64_t save_stride;
    int64_t floor_patience; /* <= 0 selects the derived default */
    double noise_scale;
} ks_sim_params;

typedef struct ks_regime_report {
    int64_t k0; /* smallest cluster size with nonpositive dispersion dimension */
    int64_t k1; /* largest k with d(k) in (0, 2), upper end */
    int64_t k2; /* smallest k >= 3 with d(k) in (0, 2) */
    int supercritical;       /* theta >= 2 */
    int preconditions_met;   /* sharp-regime hypotheses (N > 3 theta) hold */
} ks_regime_report;

typedef struct ks_decomposition_report {
    double max_reconstruction_error;
    double com_variance_ratio; /* per-coordinate center variance over t/N */
    double dispersion_ks_p;    /* KS p-value against the exact transition law */
    double independence_corr;  /* center vs dispersion innovation correlation */
    int truncated;             /* 1 when the scan stopped at zero dispersion */
    double truncated_at;       /* meaningful when truncated == 1 */
} ks_decomposition_report;

typedef struct ks_hitting_result {
    double value;
    int divergent_scale; /* 1 when the scale integral diverges (value forced 0) */
    double quadrature_error;
} ks_hitting_result;

/* library identity; static storage, do not free */
const char* ks_version(void);
/* expanded message for this thread's most recent failure; static storage */
const char* ks_last_error(void);
void ks_string_free(char* s);

/* theta accepts a decimal ("2.35") or rational ("47/20") spelling and is
 * held exactly; classification is exact integer arithmetic */
ks_status ks_model_create(int n, const char* theta, ks_model** out);
void ks_model_free(ks_model* m);
int ks_model_n(const ks_model* m);
ks_status ks_classify(const ks_model* m, ks_regime_report* out);
/* d(k) = (k - 1)(2 - k theta / N), 2 <= k <= N */
ks_status ks_dimension(const ks_model* m, int k, double* out);

void ks_sim_defaults(ks_sim_params* out);

/* N iid standard normal points recentered to zero mean and rescaled to unit
 * dispersion; xy must hold 2 n doubles, laid out x0 y0 x1 y1 ... */
ks_status ks_initial_random(const ks_model* m, uint64_t sub_seed, double* xy);

/* supervised != 0 watches for explosion while integrating: the run stops
 * flagged as soon as an isolated cluster of at least k0 particles collapses
 * below the default dispersion threshold (requires a classifiable model) */
ks_status ks_simulate(const ks_model* m, const ks_sim_params* sim, const double* xy,
                      int supervised, ks_traj** out);
void ks_traj_free(ks_traj* t);
/* 0 completed, 1 explosion flagged, 2 step floor hit; negative on error */
int ks_traj_status(const ks_traj* t);
ks_status ks_traj_frames(const ks_traj* t, int64_t* out);
ks_status ks_traj_final_time(const ks_traj* t, double* out);
ks_status ks_traj_to_csv(const ks_traj* t, char** out);
ks_status ks_traj_from_csv(const char* text, ks_traj** out);
ks_status ks_traj_sidecar_json(const ks_traj* t, const ks_sim_params* sim, char** out);

/* collision windows as JSON lines (t_start, t_end, indices, size,
 * min_dispersion, isolated); empty string when nothing qualified */
ks_status ks_census_jsonl(const ks_traj* t, double eps_coll, double eps_sep, char** out);
/* terminal-frame explosion scan as a JSON object: {"outcome": "absent" |
 * "inconclusive" | "detected", ...report fields when detected} */
ks_status ks_explosion_json(const ks_model* m, const ks_traj* t, double eps_expl,
                            double eps_sep, char** out);
ks_status ks_decomposition_check(const ks_model* m, const ks_traj* t,
                                 ks_decomposition_report* out);
/* CSV "t,r_k" of the dispersion of the given particle subset along the path */
ks_status ks_dispersion_trace_csv(const ks_traj* t, const int* indices, int count, char** out);

/* endpoint-law comparison across replicas sharing x0 and horizon */
ks_status ks_ensemble_create(const ks_model* m, ks_ensemble** out);
ks_status ks_ensemble_add(ks_ensemble* e, const ks_traj* t);
ks_status ks_ensemble_finish(const ks_ensemble* e, ks_decomposition_report* out);
void ks_ensemble_free(ks_ensemble* e);

/* exact squared Bessel transition law of dimension delta > 0 */
ks_status ks_besq_cdf(double delta, double z0, double t, double z, double* out);
ks_status ks_besq_mean(double delta, double z0, double t, double* out);
ks_status ks_besq_var(double delta, double z0, double t, double* out);

/* probability that the comparison diffusion started at x hits 0 before y */
ks_status ks_hitting_probability(double delta, double a, double b, double x, double y,
                                 ks_hitting_result* out);

/* Monte-Carlo k-point interaction-weighted volume with a hard core at
 * cutoff; fixed seed gives common random numbers across cutoffs */
ks_status ks_mass_probe(const ks_model* m, int k, int64_t samples, double cutoff,
                        uint64_t seed, double* estimate, double* std_error);

/* parse an experiment config (JSON text), run it, persist outputs under its
 * output_dir, and return the aggregate report text */
ks_status ks_run_batch(const char* config_json, char** aggregate_out);
/* reload a results directory, recompute its aggregates, verify them against
 * the persisted report byte for byte, and return the verified text */
ks_status ks_summarize(const char* results_dir, char** aggregate_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* KELLERSEGEL_H */
