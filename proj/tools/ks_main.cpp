// Command-line front end; everything runs through the C API.
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kellersegel.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int fail() {
    std::cerr << "error: " << ks_last_error() << "\n";
    return 1;
}

int fail_msg(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    return 1;
}

// every number a command prints, in text or JSON mode, renders through the
// same json node, so the two modes always show identical digits
std::string num(const json& j) { return j.dump(); }

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

struct Model {
    ks_model* m = nullptr;
    ~Model() { ks_model_free(m); }
};

struct Traj {
    ks_traj* t = nullptr;
    ~Traj() { ks_traj_free(t); }
};

struct Str {
    char* s = nullptr;
    ~Str() { ks_string_free(s); }
    std::string str() const { return s ? s : ""; }
};

std::string default_out_dir() {
    const char* env = std::getenv("KS_OUTPUT_DIR");
    return env && *env ? env : ".";
}

bool read_file(const std::string& path, std::string& out, std::string& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        err = "cannot read '" + path + "'";
        return false;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    out = buf.str();
    return true;
}

bool write_file(const std::string& path, const std::string& text, std::string& err) {
    const fs::path p(path);
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        err = "cannot write '" + path + "'";
        return false;
    }
    out << text;
    out.flush();
    if (!out) {
        err = "write failed for '" + path + "'";
        return false;
    }
    return true;
}

const char* status_text(int status) {
    switch (status) {
        case 0: return "completed";
        case 1: return "explosion_flagged";
        case 2: return "step_floor_hit";
    }
    return "unknown";
}

struct SimOptions {
    double dt_base = 1e-4;
    double t_max = 1.0;
    std::int64_t regularization_n = 10000;
    double adapt_floor = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    std::int64_t save_stride = 1;
    std::int64_t floor_patience = 0;
    double noise_scale = 1.0;
};

void add_sim_options(CLI::App* cmd, SimOptions& opt) {
    cmd->add_option("--dt", opt.dt_base, "base time step")->capture_default_str();
    cmd->add_option("--t-max", opt.t_max, "time horizon")->capture_default_str();
    cmd->add_option("--regularization-n", opt.regularization_n,
                    "drift cutoff scale (cutoff 2/n)")
        ->capture_default_str();
    cmd->add_option("--adapt-floor", opt.adapt_floor, "minimum adaptive step (<= 0 derives)");
    cmd->add_option("--seed", opt.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--path-index", opt.path_index, "replica stream index")
        ->capture_default_str();
    cmd->add_option("--stride", opt.save_stride, "save every k-th step")->capture_default_str();
    cmd->add_option("--floor-patience", opt.floor_patience,
                    "pinned steps tolerated before handing back (<= 0 derives)");
}

ks_sim_params to_params(const SimOptions& opt) {
    ks_sim_params sim;
    ks_sim_defaults(&sim);
    sim.dt_base = opt.dt_base;
    sim.t_max = opt.t_max;
    sim.regularization_n = opt.regularization_n;
    sim.adapt_floor = opt.adapt_floor;
    sim.seed = opt.seed;
    sim.path_index = opt.path_index;
    sim.save_stride = opt.save_stride;
    sim.floor_patience = opt.floor_patience;
    sim.noise_scale = opt.noise_scale;
    return sim;
}

int cmd_classify(int n, const std::string& theta, bool as_json) {
    Model model;
    if (ks_model_create(n, theta.c_str(), &model.m) != KS_OK) return fail();
    ks_regime_report rep;
    if (ks_classify(model.m, &rep) != KS_OK) return fail();
    json j;
    j["k0"] = rep.k0;
    j["k1"] = rep.k1;
    j["k2"] = rep.k2;
    j["regime"] = rep.supercritical ? "supercritical" : "subcritical";
    j["preconditions_met"] = rep.preconditions_met != 0;
    if (as_json) {
        print_json(j);
        return 0;
    }
    std::cout << "k0=" << num(j["k0"]) << " k1=" << num(j["k1"]) << " k2=" << num(j["k2"])
              << "\n";
    std::cout << "regime=" << j["regime"].get<std::string>()
              << " preconditions=" << (rep.preconditions_met ? "met" : "not-met") << "\n";
    return 0;
}

int cmd_figure1(int n, const std::string& theta, const std::string& out, bool as_json) {
    Model model;
    if (ks_model_create(n, theta.c_str(), &model.m) != KS_OK) return fail();
    json ks = json::array(), ds = json::array();
    for (int k = 2; k <= n; ++k) {
        double d = 0.0;
        if (ks_dimension(model.m, k, &d) != KS_OK) return fail();
        ks.push_back(k);
        ds.push_back(d);
    }
    json j;
    j["n"] = n;
    j["theta"] = theta;
    j["k"] = ks;
    j["d"] = ds;
    std::string csv = "k,d\n";
    for (std::size_t i = 0; i < ks.size(); ++i)
        csv += num(ks[i]) + "," + num(ds[i]) + "\n";
    if (!out.empty()) {
        std::string err;
        if (!write_file(out, csv, err)) return fail_msg(err);
        j["file"] = out;
        if (as_json) print_json(j);
        else std::cout << "wrote " << out << " (" << ks.size() << " rows)\n";
        return 0;
    }
    if (as_json) print_json(j);
    else std::cout << csv;
    return 0;
}

int cmd_hitting(double delta, double a, double b, double x, double y, bool as_json) {
    ks_hitting_result hp;
    if (ks_hitting_probability(delta, a, b, x, y, &hp) != KS_OK) return fail();
    json j;
    j["value"] = hp.value;
    j["divergent_scale"] = hp.divergent_scale != 0;
    j["quadrature_error"] = hp.quadrature_error;
    if (as_json) {
        print_json(j);
        return 0;
    }
    std::cout << num(j["value"]) << "\n";
    if (hp.divergent_scale)
        std::cout << "scale integral diverges; the boundary is not reached\n";
    else
        std::cout << "quadrature_error=" << num(j["quadrature_error"]) << "\n";
    return 0;
}

int cmd_mass_probe(int n, const std::string& theta, int k, std::int64_t samples, double cutoff,
                   std::uint64_t seed, bool as_json) {
    Model model;
    if (ks_model_create(n, theta.c_str(), &model.m) != KS_OK) return fail();
    double est = 0.0, se = 0.0;
    if (ks_mass_probe(model.m, k, samples, cutoff, seed, &est, &se) != KS_OK) return fail();
    json j;
    j["k"] = k;
    j["cutoff"] = cutoff;
    j["samples"] = samples;
    j["estimate"] = est;
    j["std_error"] = se;
    if (as_json) {
        print_json(j);
        return 0;
    }
    std::cout << "estimate=" << num(j["estimate"]) << " std_error=" << num(j["std_error"])
              << "\n";
    return 0;
}

int cmd_simulate(int n, const std::string& theta, const SimOptions& opt, std::uint64_t sub_seed,
                 bool supervised, const std::string& out_dir, const std::string& prefix,
                 bool as_json) {
    Model model;
    if (ks_model_create(n, theta.c_str(), &model.m) != KS_OK) return fail();
    std::vector<double> xy(2 * static_cast<std::size_t>(n), 0.0);
    if (ks_initial_random(model.m, sub_seed, xy.data()) != KS_OK) return fail();
    const ks_sim_params sim = to_params(opt);
    Traj traj;
    if (ks_simulate(model.m, &sim, xy.data(), supervised ? 1 : 0, &traj.t) != KS_OK)
        return fail();

    Str csv, sidecar;
    if (ks_traj_to_csv(traj.t, &csv.s) != KS_OK) return fail();
    if (ks_traj_sidecar_json(traj.t, &sim, &sidecar.s) != KS_OK) return fail();
    const std::string csv_path = (fs::path(out_dir) / (prefix + ".csv")).string();
    const std::string sidecar_path = (fs::path(out_dir) / (prefix + ".json")).string();
    std::string err;
    if (!write_file(csv_path, csv.str(), err)) return fail_msg(err);
    if (!write_file(sidecar_path, sidecar.str(), err)) return fail_msg(err);

    int64_t frames = 0;
    double t_end = 0.0;
    if (ks_traj_frames(traj.t, &frames) != KS_OK) return fail();
    if (ks_traj_final_time(traj.t, &t_end) != KS_OK) return fail();
    json j;
    j["status"] = status_text(ks_traj_status(traj.t));
    j["frames"] = frames;
    j["t_end"] = t_end;
    j["csv"] = csv_path;
    j["sidecar"] = sidecar_path;
    if (as_json) {
        print_json(j);
        return 0;
    }
    std::cout << "status=" << j["status"].get<std::string>() << " frames=" << num(j["frames"])
              << " t_end=" << num(j["t_end"]) << "\n";
    std::cout << "wrote " << csv_path << " and " << sidecar_path << "\n";
    return 0;
}

int load_trajectory(const std::string& input, Traj& traj) {
    std::string text, err;
    if (!read_file(input, text, err)) return fail_msg(err);
    if (ks_traj_from_csv(text.c_str(), &traj.t) != KS_OK) return fail();
    return 0;
}

int parse_subset(const std::string& spec, std::vector<int>& out) {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const std::size_t comma = std::min(spec.find(',', pos), spec.size());
        int v = 0;
        const auto r = std::from_chars(spec.data() + pos, spec.data() + comma, v);
        if (r.ec != std::errc() || r.ptr != spec.data() + comma)
            return fail_msg("malformed particle list '" + spec + "' (expected e.g. 0,1,2)");
        out.push_back(v);
        pos = comma + 1;
    }
    return 0;
}

int cmd_census(const std::string& input, double eps_coll, double eps_sep,
               const std::string& trace_k, const std::string& trace_out, bool as_json) {
    Traj traj;
    if (const int rc = load_trajectory(input, traj)) return rc;
    Str events;
    if (ks_census_jsonl(traj.t, eps_coll, eps_sep, &events.s) != KS_OK) return fail();

    json trace_note;
    if (!trace_k.empty()) {
        std::vector<int> subset;
        if (const int rc = parse_subset(trace_k, subset)) return rc;
        Str trace;
        if (ks_dispersion_trace_csv(traj.t, subset.data(), static_cast<int>(subset.size()),
                                    &trace.s) != KS_OK)
            return fail();
        std::string err;
        if (!write_file(trace_out, trace.str(), err)) return fail_msg(err);
        trace_note = trace_out;
    }

    if (as_json) {
        json arr = json::array();
        std::istringstream in(events.str());
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) arr.push_back(json::parse(line));
        json j;
        j["events"] = std::move(arr);
        if (!trace_note.is_null()) j["trace_file"] = trace_note;
        print_json(j);
        return 0;
    }
    std::cout << events.str();
    if (!trace_note.is_null())
        std::cerr << "wrote trace " << trace_note.get<std::string>() << "\n";
    return 0;
}

int cmd_decompose_check(const std::string& input, int n, const std::string& theta,
                        bool as_json) {
    Model model;
    if (ks_model_create(n, theta.c_str(), &model.m) != KS_OK) return fail();
    Traj traj;
    if (const int rc = load_trajectory(input, traj)) return rc;
    ks_decomposition_report rep;
    if (ks_decomposition_check(model.m, traj.t, &rep) != KS_OK) return fail();
    json j;
    j["max_reconstruction_error"] = rep.max_reconstruction_error;
    j["com_variance_ratio"] = rep.com_variance_ratio;
    j["dispersion_ks_p"] = rep.dispersion_ks_p;
    j["independence_corr"] = rep.independence_corr;
    if (rep.truncated) j["truncated_at"] = rep.truncated_at;
    if (as_json) {
        print_json(j);
        return 0;
    }
    std::cout << "max_reconstruction_error=" << num(j["max_reconstruction_error"]) << "\n"
              << "com_variance_ratio=" << num(j["com_variance_ratio"]) << "\n"
              << "dispersion_ks_p=" << num(j["dispersion_ks_p"]) << "\n"
              << "independence_corr=" << num(j["independence_corr"]) << "\n";
    if (rep.truncated) std::cout << "truncated_at=" << num(j["truncated_at"]) << "\n";
    return 0;
}

int cmd_besq_compare(int n, const std::string& theta, std::int64_t replicas,
                     const SimOptions& opt, std::uint64_t sub_seed, bool as_json) {
    Model model;
    if (ks_model_create(n, theta.c_str(), &model.m) != KS_OK) return fail();
    std::vector<double> xy(2 * static_cast<std::size_t>(n), 0.0);
    if (ks_initial_random(model.m, sub_seed, xy.data()) != KS_OK) return fail();

    ks_ensemble* ens = nullptr;
    if (ks_ensemble_create(model.m, &ens) != KS_OK) return fail();
    ks_sim_params sim = to_params(opt);
    for (std::int64_t p = 0; p < replicas; ++p) {
        sim.path_index = static_cast<std::uint64_t>(p);
        Traj traj;
        if (ks_simulate(model.m, &sim, xy.data(), 0, &traj.t) != KS_OK) {
            ks_ensemble_free(ens);
            return fail();
        }
        if (ks_ensemble_add(ens, traj.t) != KS_OK) {
            ks_ensemble_free(ens);
            return fail();
        }
    }
    ks_decomposition_report rep;
    const ks_status rc = ks_ensemble_finish(ens, &rep);
    ks_ensemble_free(ens);
    if (rc != KS_OK) return fail();

    double dim = 0.0, exact_mean = 0.0, exact_var = 0.0;
    if (ks_dimension(model.m, n, &dim) != KS_OK) return fail();
    if (ks_besq_mean(dim, 1.0, opt.t_max, &exact_mean) != KS_OK) return fail();
    if (ks_besq_var(dim, 1.0, opt.t_max, &exact_var) != KS_OK) return fail();

    json j;
    j["replicas"] = replicas;
    j["dimension"] = dim;
    j["exact_mean"] = exact_mean;
    j["exact_var"] = exact_var;
    j["dispersion_ks_p"] = rep.dispersion_ks_p;
    j["com_variance_ratio"] = rep.com_variance_ratio;
    j["independence_corr"] = rep.independence_corr;
    j["max_reconstruction_error"] = rep.max_reconstruction_error;
    if (as_json) {
        print_json(j);
        return 0;
    }
    std::cout << "dimension=" << num(j["dimension"]) << " exact_mean=" << num(j["exact_mean"])
              << " exact_var=" << num(j["exact_var"]) << "\n"
              << "dispersion_ks_p=" << num(j["dispersion_ks_p"]) << "\n"
              << "com_variance_ratio=" << num(j["com_variance_ratio"]) << "\n"
              << "independence_corr=" << num(j["independence_corr"]) << "\n"
              << "max_reconstruction_error=" << num(j["max_reconstruction_error"]) << "\n";
    return 0;
}

int print_aggregate(const std::string& aggregate, bool as_json, const std::string& lead) {
    if (as_json) {
        std::cout << aggregate; // already formatted JSON with trailing newline
        return 0;
    }
    json agg;
    try {
        agg = json::parse(aggregate);
    } catch (const json::exception& e) {
        return fail_msg(std::string("aggregate is not valid JSON: ") + e.what());
    }
    std::cout << lead << "\n";
    const json& sc = agg["status_counts"];
    std::cout << "replicas=" << num(agg["replicas"]) << " completed=" << num(sc["completed"])
              << " explosion_flagged=" << num(sc["explosion_flagged"])
              << " step_floor_hit=" << num(sc["step_floor_hit"]) << "\n";
    if (!agg["explosion"].is_null()) {
        const json& e = agg["explosion"];
        std::cout << "explosion: flag_rate=" << num(e["flag_rate"])
                  << " modal_size=" << num(e["modal_size"]) << "\n";
    }
    if (!agg["census"].is_null()) {
        const json& c = agg["census"];
        std::cout << "census: events=" << num(c["events_total"])
                  << " isolated=" << num(c["isolated_total"]) << "\n";
    }
    if (!agg["decomposition"].is_null()) {
        const json& d = agg["decomposition"];
        std::cout << "decomposition: max_reconstruction_error="
                  << num(d["max_reconstruction_error"])
                  << " dispersion_ks_p=" << num(d["dispersion_ks_p"]) << "\n";
    }
    if (!agg["drift"].is_null()) {
        const json& d = agg["drift"];
        std::cout << "drift: empirical_mean=" << num(d["empirical_mean"])
                  << " predicted_mean=" << num(d["predicted_mean"]) << "\n";
    }
    std::cout << "config_hash=" << agg["config_hash"].get<std::string>() << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override, bool as_json) {
    std::string text, err;
    if (!read_file(config_path, text, err)) return fail_msg(err);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        return fail_msg("config is not valid JSON: " + std::string(e.what()));
    }
    if (!out_override.empty()) {
        j["output_dir"] = out_override;
    } else if (!j.contains("output_dir")) {
        const char* env = std::getenv("KS_OUTPUT_DIR");
        if (env && *env) j["output_dir"] = env;
    }
    const std::string resolved = j.dump();
    Str aggregate;
    if (ks_run_batch(resolved.c_str(), &aggregate.s) != KS_OK) return fail();
    const std::string dir = j.value("output_dir", std::string());
    return print_aggregate(aggregate.str(), as_json, "wrote " + dir);
}

int cmd_summarize(const std::string& dir, bool as_json) {
    Str aggregate;
    if (ks_summarize(dir.c_str(), &aggregate.s) != KS_OK) return fail();
    return print_aggregate(aggregate.str(), as_json, "verified " + dir);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"planar interacting-particle simulator and verification toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    // classify
    int cl_n = 0;
    std::string cl_theta;
    bool cl_json = false;
    auto* classify = app.add_subcommand(
        "classify", "phase-diagram summary k0, k1, k2 for a model (exact arithmetic)");
    classify->add_option("--n", cl_n, "particle count")->required();
    classify->add_option("--theta", cl_theta, "interaction strength (decimal or p/q)")
        ->required();
    classify->add_flag("--json", cl_json, "JSON output");
    classify->callback([&] { rc = cmd_classify(cl_n, cl_theta, cl_json); });

    // figure1
    int f1_n = 0;
    std::string f1_theta, f1_out;
    bool f1_json = false;
    auto* figure1 = app.add_subcommand(
        "figure1", "cluster dispersion dimension d(k) for k = 2..N as CSV curve data");
    figure1->add_option("--n", f1_n, "particle count")->required();
    figure1->add_option("--theta", f1_theta, "interaction strength")->required();
    figure1->add_option("--out", f1_out, "write CSV here instead of stdout");
    figure1->add_flag("--json", f1_json, "JSON output");
    figure1->callback([&] { rc = cmd_figure1(f1_n, f1_theta, f1_out, f1_json); });

    // hitting-prob
    double hp_delta = 0.0, hp_a = 0.0, hp_b = 0.0, hp_x = 0.0, hp_y = 0.0;
    bool hp_json = false;
    auto* hitting = app.add_subcommand(
        "hitting-prob", "probability the comparison diffusion hits 0 before y");
    hitting->add_option("--delta", hp_delta, "drift constant")->required();
    hitting->add_option("--a", hp_a, "perturbation amplitude")->required();
    hitting->add_option("--b", hp_b, "perturbation offset (> 0)")->required();
    hitting->add_option("--x", hp_x, "start point in [0, y]")->required();
    hitting->add_option("--y", hp_y, "upper barrier in (x, 1)")->required();
    hitting->add_flag("--json", hp_json, "JSON output");
    hitting->callback([&] { rc = cmd_hitting(hp_delta, hp_a, hp_b, hp_x, hp_y, hp_json); });

    // mass-probe
    int mp_n = 0, mp_k = 0;
    std::string mp_theta;
    std::int64_t mp_samples = 100000;
    double mp_cutoff = 0.01;
    std::uint64_t mp_seed = 0;
    bool mp_json = false;
    auto* probe = app.add_subcommand(
        "mass-probe", "Monte-Carlo interaction-weighted k-point volume with a hard core");
    probe->add_option("--n", mp_n, "particle count")->required();
    probe->add_option("--theta", mp_theta, "interaction strength")->required();
    probe->add_option("--k", mp_k, "cluster size")->required();
    probe->add_option("--samples", mp_samples, "Monte-Carlo samples")->capture_default_str();
    probe->add_option("--cutoff", mp_cutoff, "hard-core pair distance")->capture_default_str();
    probe->add_option("--seed", mp_seed, "RNG seed; keep fixed across cutoffs for CRN")
        ->capture_default_str();
    probe->add_flag("--json", mp_json, "JSON output");
    probe->callback(
        [&] { rc = cmd_mass_probe(mp_n, mp_theta, mp_k, mp_samples, mp_cutoff, mp_seed, mp_json); });

    // simulate
    int si_n = 0;
    std::string si_theta, si_prefix = "trajectory", si_out = default_out_dir();
    SimOptions si_opt;
    std::uint64_t si_sub_seed = 0;
    bool si_supervised = false, si_json = false;
    auto* simulate = app.add_subcommand(
        "simulate", "run one path from a unit-dispersion random start and save CSV + sidecar");
    simulate->add_option("--n", si_n, "particle count")->required();
    simulate->add_option("--theta", si_theta, "interaction strength")->required();
    add_sim_options(simulate, si_opt);
    simulate->add_option("--sub-seed", si_sub_seed, "initial-condition stream seed")
        ->capture_default_str();
    simulate->add_flag("--supervised", si_supervised,
                       "stop flagged once an isolated critical cluster collapses");
    simulate->add_option("--out", si_out, "output directory (default $KS_OUTPUT_DIR or .)");
    simulate->add_option("--prefix", si_prefix, "output basename")->capture_default_str();
    simulate->add_flag("--json", si_json, "JSON output");
    simulate->callback([&] {
        rc = cmd_simulate(si_n, si_theta, si_opt, si_sub_seed, si_supervised, si_out, si_prefix,
                          si_json);
    });

    // census
    std::string ce_input, ce_trace_k, ce_trace_out;
    double ce_eps_coll = 1e-4, ce_eps_sep = 1e-1;
    bool ce_json = false;
    auto* census = app.add_subcommand(
        "census", "collision windows of a saved trajectory as JSON lines");
    census->add_option("--input", ce_input, "trajectory CSV from 'simulate'")->required();
    census->add_option("--eps-coll", ce_eps_coll, "collision dispersion threshold")
        ->capture_default_str();
    census->add_option("--eps-sep", ce_eps_sep, "isolation dispersion threshold")
        ->capture_default_str();
    auto* tk = census->add_option("--trace-k", ce_trace_k,
                                  "comma-separated particle list for an R_K trace");
    census->add_option("--trace-out", ce_trace_out, "write the R_K trace CSV here")->needs(tk);
    tk->needs(census->get_option("--trace-out"));
    census->add_flag("--json", ce_json, "JSON output");
    census->callback([&] {
        rc = cmd_census(ce_input, ce_eps_coll, ce_eps_sep, ce_trace_k, ce_trace_out, ce_json);
    });

    // decompose-check
    std::string dc_input, dc_theta;
    int dc_n = 0;
    bool dc_json = false;
    auto* decompose = app.add_subcommand(
        "decompose-check",
        "center/dispersion/direction reconstruction and law checks on a saved trajectory");
    decompose->add_option("--input", dc_input, "trajectory CSV from 'simulate'")->required();
    decompose->add_option("--n", dc_n, "particle count")->required();
    decompose->add_option("--theta", dc_theta, "interaction strength")->required();
    decompose->add_flag("--json", dc_json, "JSON output");
    decompose->callback([&] { rc = cmd_decompose_check(dc_input, dc_n, dc_theta, dc_json); });

    // besq-compare
    int bc_n = 0;
    std::string bc_theta;
    std::int64_t bc_replicas = 200;
    SimOptions bc_opt;
    std::uint64_t bc_sub_seed = 0;
    bool bc_json = false;
    auto* besq = app.add_subcommand(
        "besq-compare",
        "endpoint law of the dispersion across replicas against the exact transition");
    besq->add_option("--n", bc_n, "particle count")->required();
    besq->add_option("--theta", bc_theta, "interaction strength")->required();
    besq->add_option("--replicas", bc_replicas, "independent paths")->capture_default_str();
    add_sim_options(besq, bc_opt);
    besq->add_option("--sub-seed", bc_sub_seed, "initial-condition stream seed")
        ->capture_default_str();
    besq->add_flag("--json", bc_json, "JSON output");
    besq->callback(
        [&] { rc = cmd_besq_compare(bc_n, bc_theta, bc_replicas, bc_opt, bc_sub_seed, bc_json); });

    // run
    std::string ru_config, ru_out;
    bool ru_json = false;
    auto* run = app.add_subcommand("run", "execute an experiment config and persist results");
    run->add_option("--config", ru_config, "experiment config JSON file")->required();
    run->add_option("--output-dir", ru_out,
                    "override the config's output_dir (else $KS_OUTPUT_DIR fills a missing one)");
    run->add_flag("--json", ru_json, "print the full aggregate report");
    run->callback([&] { rc = cmd_run(ru_config, ru_out, ru_json); });

    // summarize
    std::string su_dir;
    bool su_json = false;
    auto* summarize = app.add_subcommand(
        "summarize", "recompute and verify the aggregate of a results directory");
    summarize->add_option("--dir", su_dir, "results directory")->required();
    summarize->add_flag("--json", su_json, "print the full aggregate report");
    summarize->callback([&] { rc = cmd_summarize(su_dir, su_json); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    return rc;
}
