#include "core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/format.hpp"
#include "core/rng.hpp"
#include "core/special.hpp"
#include "core/version.hpp"

namespace ks::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCsvHeader =
    "index,status,t_end,steps,final_dispersion,com_dx,com_dy,recon_error,truncated_at,"
    "explosion,explosion_size,explosion_time,events,events_isolated";

const char* outcome_name(analysis::ExplosionOutcome o) {
    switch (o) {
        case analysis::ExplosionOutcome::Absent: return "absent";
        case analysis::ExplosionOutcome::Inconclusive: return "inconclusive";
        case analysis::ExplosionOutcome::Detected: return "detected";
    }
    return "unknown";
}

analysis::ExplosionOutcome outcome_from_name(const std::string& s, const std::string& where) {
    if (s == "absent") return analysis::ExplosionOutcome::Absent;
    if (s == "inconclusive") return analysis::ExplosionOutcome::Inconclusive;
    if (s == "detected") return analysis::ExplosionOutcome::Detected;
    throw IoError(where + ": unknown explosion outcome '" + s + "'");
}

dynamics::TrajectoryStatus status_from_name(const std::string& s, const std::string& where) {
    if (s == "completed") return dynamics::TrajectoryStatus::Completed;
    if (s == "explosion_flagged") return dynamics::TrajectoryStatus::ExplosionFlagged;
    if (s == "step_floor_hit") return dynamics::TrajectoryStatus::StepFloorHit;
    throw IoError(where + ": unknown trajectory status '" + s + "'");
}

[[noreturn]] void bad_key(const std::string& path) {
    throw ConfigError("unknown config key '" + path + "'");
}

double need_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("config key '" + path + "' must be a number");
    return v.get<double>();
}

std::int64_t need_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        throw ConfigError("config key '" + path + "' must be an integer");
    return v.get<std::int64_t>();
}

std::uint64_t need_unsigned(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError("config key '" + path + "' must be a non-negative integer");
}

std::string need_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("config key '" + path + "' must be a string");
    return v.get<std::string>();
}

bool need_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError("config key '" + path + "' must be a boolean");
    return v.get<bool>();
}

regime::ModelParams parse_model(const json& j) {
    if (!j.is_object()) throw ConfigError("config key 'model' must be an object");
    std::optional<int> n;
    const json* theta = nullptr;
    for (const auto& [key, val] : j.items()) {
        if (key == "n") {
            n = static_cast<int>(need_integer(val, "model.n"));
        } else if (key == "theta") {
            if (!val.is_string() && !val.is_number())
                throw ConfigError("config key 'model.theta' must be a string or number");
            theta = &val;
        } else {
            bad_key("model." + key);
        }
    }
    if (!n) throw ConfigError("missing config key 'model.n'");
    if (!theta) throw ConfigError("missing config key 'model.theta'");
    try {
        return theta->is_string()
                   ? regime::ModelParams::from_string(*n, theta->get<std::string>())
                   : regime::ModelParams::from_double(*n, theta->get<double>());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config key 'model': ") + e.what());
    }
}

dynamics::SimulationParams parse_sim(const json& j) {
    if (!j.is_object()) throw ConfigError("config key 'sim' must be an object");
    dynamics::SimulationParams sim;
    for (const auto& [key, val] : j.items()) {
        if (key == "dt_base") sim.dt_base = need_number(val, "sim.dt_base");
        else if (key == "t_max") sim.t_max = need_number(val, "sim.t_max");
        else if (key == "regularization_n") sim.regularization_n = need_integer(val, "sim.regularization_n");
        else if (key == "adapt_floor") sim.adapt_floor = need_number(val, "sim.adapt_floor");
        else if (key == "seed") sim.seed = need_unsigned(val, "sim.seed");
        else if (key == "save_stride") sim.save_stride = need_integer(val, "sim.save_stride");
        else if (key == "floor_patience") sim.floor_patience = need_integer(val, "sim.floor_patience");
        else if (key == "noise_scale") sim.noise_scale = need_number(val, "sim.noise_scale");
        else bad_key("sim." + key);
    }
    try {
        dynamics::validate(sim);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config key 'sim': ") + e.what());
    }
    return sim;
}

InitialCondition parse_initial(const json& j) {
    if (!j.is_object()) throw ConfigError("config key 'initial_condition' must be an object");
    InitialCondition init;
    std::string kind;
    if (auto it = j.find("kind"); it != j.end()) kind = need_string(*it, "initial_condition.kind");
    else throw ConfigError("missing config key 'initial_condition.kind'");
    if (kind == "unit_dispersion_random") init.kind = InitialCondition::Kind::UnitDispersionRandom;
    else if (kind == "explicit") init.kind = InitialCondition::Kind::ExplicitList;
    else throw ConfigError("config key 'initial_condition.kind' must be 'explicit' or "
                           "'unit_dispersion_random', got '" + kind + "'");
    const bool random = init.kind == InitialCondition::Kind::UnitDispersionRandom;
    bool has_points = false;
    for (const auto& [key, val] : j.items()) {
        if (key == "kind") continue;
        if (key == "sub_seed") {
            if (!random)
                throw ConfigError("config key 'initial_condition.sub_seed' does not apply to "
                                  "kind 'explicit'");
            init.sub_seed = need_unsigned(val, "initial_condition.sub_seed");
        } else if (key == "points") {
            if (random)
                throw ConfigError("config key 'initial_condition.points' does not apply to "
                                  "kind 'unit_dispersion_random'");
            if (!val.is_array())
                throw ConfigError("config key 'initial_condition.points' must be an array");
            for (std::size_t i = 0; i < val.size(); ++i) {
                const json& p = val[i];
                const std::string path =
                    "initial_condition.points[" + std::to_string(i) + "]";
                if (!p.is_array() || p.size() != 2)
                    throw ConfigError("config key '" + path + "' must be an [x, y] pair");
                const double x = need_number(p[0], path);
                const double y = need_number(p[1], path);
                if (!std::isfinite(x) || !std::isfinite(y))
                    throw ConfigError("config key '" + path + "' must be finite");
                init.points.push_back(Vec2{x, y});
            }
            has_points = true;
        } else {
            bad_key("initial_condition." + key);
        }
    }
    if (!random && !has_points)
        throw ConfigError("missing config key 'initial_condition.points'");
    return init;
}

AnalysisKind analysis_from_name(const std::string& s) {
    if (s == "decomposition") return AnalysisKind::Decomposition;
    if (s == "census") return AnalysisKind::Census;
    if (s == "explosion") return AnalysisKind::Explosion;
    if (s == "drift_diagnostic") return AnalysisKind::DriftDiagnostic;
    throw ConfigError("unknown analysis '" + s + "' in 'analyses'");
}

std::vector<AnalysisKind> parse_analyses(const json& j) {
    if (!j.is_array()) throw ConfigError("config key 'analyses' must be an array");
    std::vector<AnalysisKind> out;
    for (const json& v : j) {
        const AnalysisKind a = analysis_from_name(need_string(v, "analyses"));
        if (std::find(out.begin(), out.end(), a) != out.end())
            throw ConfigError(std::string("duplicate analysis '") + analysis_name(a) +
                              "' in 'analyses'");
        out.push_back(a);
    }
    if (out.empty()) throw ConfigError("'analyses' must name at least one analysis");
    std::sort(out.begin(), out.end());
    return out;
}

analysis::AnalysisThresholds parse_thresholds(const json& j) {
    if (!j.is_object()) throw ConfigError("config key 'thresholds' must be an object");
    analysis::AnalysisThresholds th;
    for (const auto& [key, val] : j.items()) {
        if (key == "eps_coll") th.eps_coll = need_number(val, "thresholds.eps_coll");
        else if (key == "eps_sep") th.eps_sep = need_number(val, "thresholds.eps_sep");
        else if (key == "eps_link") th.eps_link = need_number(val, "thresholds.eps_link");
        else if (key == "eps_expl") th.eps_expl = need_number(val, "thresholds.eps_expl");
        else bad_key("thresholds." + key);
    }
    return th;
}

bool wants(const ExperimentConfig& config, AnalysisKind a) {
    return std::find(config.analyses.begin(), config.analyses.end(), a) != config.analyses.end();
}

// shared by config_from_json and run_batch so programmatically built configs
// meet the same contract as parsed ones
void validate_config(const ExperimentConfig& config, bool require_output_dir) {
    try {
        dynamics::validate(config.sim);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config key 'sim': ") + e.what());
    }
    if (config.replicas < 1) throw ConfigError("'replicas' must be >= 1");
    if (config.analyses.empty()) throw ConfigError("'analyses' must name at least one analysis");
    const auto& th = config.thresholds;
    if (!(th.eps_coll > 0.0) || !(th.eps_sep > 0.0) || !(th.eps_link > 0.0) ||
        !(th.eps_expl > 0.0))
        throw ConfigError("'thresholds' must all be positive");
    if (!(th.eps_coll < th.eps_sep))
        throw ConfigError("'thresholds.eps_coll' must be smaller than 'thresholds.eps_sep'");
    if (config.initial.kind == InitialCondition::Kind::ExplicitList &&
        config.initial.points.size() != static_cast<std::size_t>(config.model.n))
        throw ConfigError("'initial_condition.points' must list exactly model.n points");
    if (wants(config, AnalysisKind::Explosion)) {
        try {
            (void)regime::classify(config.model);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("'explosion' analysis needs a classifiable model: ") +
                              e.what());
        }
    }
    if (wants(config, AnalysisKind::Decomposition) &&
        !(regime::bessel_dimension(config.model, config.model.n) > 0.0))
        throw ConfigError("'decomposition' analysis requires d(N) > 0; supercritical models are "
                          "analyzed through the census and explosion scans");
    if (require_output_dir && config.output_dir.empty())
        throw ConfigError("missing config key 'output_dir'");
}

json canonical_config(const ExperimentConfig& config) {
    json j;
    json names = json::array();
    for (AnalysisKind a : config.analyses) names.push_back(analysis_name(a));
    j["analyses"] = std::move(names);
    json init;
    if (config.initial.kind == InitialCondition::Kind::ExplicitList) {
        init["kind"] = "explicit";
        json pts = json::array();
        for (const Vec2& p : config.initial.points) pts.push_back(json::array({p.x, p.y}));
        init["points"] = std::move(pts);
    } else {
        init["kind"] = "unit_dispersion_random";
        init["sub_seed"] = config.initial.sub_seed;
    }
    j["initial_condition"] = std::move(init);
    j["model"] = {{"n", config.model.n},
                  {"theta", std::to_string(config.model.theta.num) + "/" +
                                std::to_string(config.model.theta.den)}};
    j["replicas"] = config.replicas;
    j["sim"] = {{"adapt_floor", config.sim.adapt_floor},
                {"dt_base", config.sim.dt_base},
                {"floor_patience", config.sim.floor_patience},
                {"noise_scale", config.sim.noise_scale},
                {"regularization_n", config.sim.regularization_n},
                {"save_stride", config.sim.save_stride},
                {"seed", config.sim.seed},
                {"t_max", config.sim.t_max}};
    j["thresholds"] = {{"eps_coll", config.thresholds.eps_coll},
                       {"eps_expl", config.thresholds.eps_expl},
                       {"eps_link", config.thresholds.eps_link},
                       {"eps_sep", config.thresholds.eps_sep}};
    return j;
}

// explosion supervision shared by simulate_supervised and run_batch; the
// caller keeps the integrator, so step counts stay observable
dynamics::TrajectoryStatus supervise(dynamics::ParticleIntegrator& integ,
                                     const regime::ModelParams& model,
                                     const analysis::AnalysisThresholds& th, double t_max) {
    (void)regime::classify(model); // fail before integrating if k0 is undefined
    // Sub-k0 clusters have d(k) > 0 and re-expand, so saturation episodes are
    // short; the cap only guards against a pathological stall.
    constexpr std::int64_t kMaxResumes = 1000000;
    for (std::int64_t resumes = 0;; ++resumes) {
        if (integ.advance_until(t_max) == dynamics::SegmentEnd::ReachedTime)
            return dynamics::TrajectoryStatus::Completed;
        dynamics::Trajectory probe;
        probe.times = {integ.time()};
        probe.frames = {integ.state()};
        probe.status = dynamics::TrajectoryStatus::StepFloorHit;
        probe.model = model;
        const auto scan = analysis::detect_explosion(probe, model, th.eps_expl, th.eps_sep);
        if (scan.outcome == analysis::ExplosionOutcome::Detected)
            return dynamics::TrajectoryStatus::ExplosionFlagged;
        if (resumes >= kMaxResumes) return dynamics::TrajectoryStatus::StepFloorHit;
        integ.reset_floor_counter();
    }
}

std::string opt_double(const std::optional<double>& v) { return v ? fmt_double(*v) : ""; }
std::string opt_int(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : ""; }

std::string rows_to_csv(const std::vector<ReplicaRow>& rows, const std::string& hash,
                        std::uint64_t seed) {
    std::string out;
    out += std::string("# version=") + kVersion + "\n";
    out += "# config=" + hash + "\n";
    out += "# seed=" + std::to_string(seed) + "\n";
    out += std::string(kCsvHeader) + "\n";
    for (const ReplicaRow& r : rows) {
        out += std::to_string(r.index);
        out += ',';
        out += dynamics::status_name(r.status);
        out += ',';
        out += fmt_double(r.t_end);
        out += ',';
        out += std::to_string(r.steps);
        out += ',';
        out += fmt_double(r.final_dispersion);
        out += ',';
        out += opt_double(r.com_dx);
        out += ',';
        out += opt_double(r.com_dy);
        out += ',';
        out += opt_double(r.recon_error);
        out += ',';
        out += opt_double(r.truncated_at);
        out += ',';
        out += r.explosion ? outcome_name(*r.explosion) : "";
        out += ',';
        out += opt_int(r.explosion_size);
        out += ',';
        out += opt_double(r.explosion_time);
        out += ',';
        out += opt_int(r.events_total);
        out += ',';
        out += opt_int(r.events_isolated);
        out += '\n';
    }
    return out;
}

struct FileStamp {
    std::string version;
    std::string hash;
    std::uint64_t seed = 0;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::int64_t parse_i64(const std::string& s, const std::string& where) {
    std::int64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw IoError(where + ": malformed integer '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw IoError(where + ": malformed unsigned integer '" + s + "'");
    return v;
}

double parse_f64(const std::string& s, const std::string& where) {
    try {
        return parse_double(s);
    } catch (const IoError& e) {
        throw IoError(where + ": " + e.what());
    }
}

std::optional<double> opt_f64(const std::string& s, const std::string& where) {
    if (s.empty()) return std::nullopt;
    return parse_f64(s, where);
}

std::optional<std::int64_t> opt_i64(const std::string& s, const std::string& where) {
    if (s.empty()) return std::nullopt;
    return parse_i64(s, where);
}

std::string stamp_value(const std::string& line, const std::string& prefix,
                        const std::string& file) {
    if (line.rfind(prefix, 0) != 0)
        throw IoError(file + ": expected header line '" + prefix + "...', got '" + line + "'");
    return line.substr(prefix.size());
}

std::pair<FileStamp, std::vector<ReplicaRow>> rows_from_csv(const std::string& text,
                                                            const std::string& file) {
    std::istringstream in(text);
    std::string line;
    FileStamp stamp;
    if (!std::getline(in, line)) throw IoError(file + ": empty file");
    stamp.version = stamp_value(line, "# version=", file);
    if (!std::getline(in, line)) throw IoError(file + ": truncated header");
    stamp.hash = stamp_value(line, "# config=", file);
    if (!std::getline(in, line)) throw IoError(file + ": truncated header");
    stamp.seed = parse_u64(stamp_value(line, "# seed=", file), file);
    if (!std::getline(in, line) || line != kCsvHeader)
        throw IoError(file + ": unexpected column header");
    std::vector<ReplicaRow> rows;
    std::size_t lineno = 4;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = file + " line " + std::to_string(lineno);
        const auto f = split_csv_line(line);
        if (f.size() != 14) throw IoError(where + ": expected 14 fields, got " +
                                          std::to_string(f.size()));
        ReplicaRow r;
        r.index = parse_i64(f[0], where);
        r.status = status_from_name(f[1], where);
        r.t_end = parse_f64(f[2], where);
        r.steps = parse_u64(f[3], where);
        r.final_dispersion = parse_f64(f[4], where);
        r.com_dx = opt_f64(f[5], where);
        r.com_dy = opt_f64(f[6], where);
        r.recon_error = opt_f64(f[7], where);
        r.truncated_at = opt_f64(f[8], where);
        if (!f[9].empty()) r.explosion = outcome_from_name(f[9], where);
        r.explosion_size = opt_i64(f[10], where);
        r.explosion_time = opt_f64(f[11], where);
        r.events_total = opt_i64(f[12], where);
        r.events_isolated = opt_i64(f[13], where);
        rows.push_back(std::move(r));
    }
    return {stamp, rows};
}

std::string events_to_jsonl(const std::vector<TaggedEvent>& events, const std::string& hash,
                            std::uint64_t seed) {
    json header;
    header["config"] = hash;
    header["seed"] = seed;
    header["version"] = kVersion;
    std::string out = header.dump() + "\n";
    for (const TaggedEvent& te : events) {
        json j;
        j["indices"] = te.event.indices;
        j["isolated"] = te.event.isolated;
        j["min_dispersion"] = te.event.min_dispersion;
        j["replica"] = te.replica;
        j["size"] = te.event.size;
        j["t_end"] = te.event.t_end;
        j["t_start"] = te.event.t_start;
        out += j.dump() + "\n";
    }
    return out;
}

std::pair<FileStamp, std::vector<TaggedEvent>> events_from_jsonl_file(const std::string& text,
                                                                      const std::string& file) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError(file + ": empty file");
    FileStamp stamp;
    try {
        const json h = json::parse(line);
        if (!h.is_object()) throw IoError(file + ": header line is not an object");
        for (const auto& [key, val] : h.items()) {
            if (key == "config") stamp.hash = val.get<std::string>();
            else if (key == "seed") stamp.seed = val.get<std::uint64_t>();
            else if (key == "version") stamp.version = val.get<std::string>();
            else throw IoError(file + ": unknown header field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw IoError(file + " header: " + e.what());
    }
    if (stamp.version.empty() || stamp.hash.empty())
        throw IoError(file + ": header must carry version, config, and seed");
    std::vector<TaggedEvent> events;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = file + " line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(where + ": " + e.what());
        }
        if (!j.is_object()) throw IoError(where + ": not an object");
        TaggedEvent te;
        bool has_replica = false, has_start = false, has_end = false, has_indices = false,
             has_size = false, has_min = false, has_iso = false;
        try {
            for (const auto& [key, val] : j.items()) {
                if (key == "replica") { te.replica = val.get<std::int64_t>(); has_replica = true; }
                else if (key == "t_start") { te.event.t_start = val.get<double>(); has_start = true; }
                else if (key == "t_end") { te.event.t_end = val.get<double>(); has_end = true; }
                else if (key == "indices") {
                    te.event.indices = val.get<geometry::IndexSet>();
                    has_indices = true;
                } else if (key == "size") { te.event.size = val.get<std::int64_t>(); has_size = true; }
                else if (key == "min_dispersion") {
                    te.event.min_dispersion = val.get<double>();
                    has_min = true;
                } else if (key == "isolated") { te.event.isolated = val.get<bool>(); has_iso = true; }
                else throw IoError(where + ": unknown event field '" + key + "'");
            }
        } catch (const json::exception& e) {
            throw IoError(where + ": " + e.what());
        }
        if (!(has_replica && has_start && has_end && has_indices && has_size && has_min && has_iso))
            throw IoError(where + ": missing event field");
        if (te.event.size != static_cast<std::int64_t>(te.event.indices.size()))
            throw IoError(where + ": size does not match its index set");
        if (!events.empty() && te.replica < events.back().replica)
            throw IoError(where + ": replica indices out of order");
        events.push_back(std::move(te));
    }
    return {stamp, events};
}

double fold_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double fold_variance(const std::vector<double>& v) {
    const double m = fold_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double fold_corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = fold_mean(a), mb = fold_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

json size_counts(const std::map<std::int64_t, std::int64_t>& counts) {
    json arr = json::array();
    for (const auto& [size, count] : counts) arr.push_back(json::array({size, count}));
    return arr;
}

json census_section(const std::vector<TaggedEvent>& events) {
    std::map<std::int64_t, std::int64_t> by_size, iso_by_size;
    std::int64_t isolated = 0;
    for (const TaggedEvent& te : events) {
        ++by_size[te.event.size];
        if (te.event.isolated) {
            ++iso_by_size[te.event.size];
            ++isolated;
        }
    }
    json j;
    j["events_total"] = static_cast<std::int64_t>(events.size());
    j["events_by_size"] = size_counts(by_size);
    j["isolated_total"] = isolated;
    j["isolated_by_size"] = size_counts(iso_by_size);
    return j;
}

json explosion_section(const std::vector<ReplicaRow>& rows, std::int64_t replicas) {
    std::int64_t absent = 0, inconclusive = 0, detected = 0, flagged = 0;
    std::map<std::int64_t, std::int64_t> sizes;
    double time_sum = 0.0;
    for (const ReplicaRow& r : rows) {
        if (r.status == dynamics::TrajectoryStatus::ExplosionFlagged) ++flagged;
        if (!r.explosion) continue;
        switch (*r.explosion) {
            case analysis::ExplosionOutcome::Absent: ++absent; break;
            case analysis::ExplosionOutcome::Inconclusive: ++inconclusive; break;
            case analysis::ExplosionOutcome::Detected: ++detected; break;
        }
        if (r.explosion_size) ++sizes[*r.explosion_size];
        if (r.explosion_time) time_sum += *r.explosion_time;
    }
    json j;
    j["absent"] = absent;
    j["inconclusive"] = inconclusive;
    j["detected"] = detected;
    j["flagged"] = flagged;
    j["flag_rate"] = static_cast<double>(flagged) / static_cast<double>(replicas);
    j["size_counts"] = size_counts(sizes);
    if (sizes.empty()) {
        j["modal_size"] = nullptr;
        j["mean_time"] = nullptr;
    } else {
        std::int64_t best = 0, best_count = 0;
        for (const auto& [size, count] : sizes)
            if (count > best_count) { best = size; best_count = count; }
        j["modal_size"] = best;
        j["mean_time"] = time_sum / static_cast<double>(detected);
    }
    return j;
}

json decomposition_section(const ExperimentConfig& config, double r0,
                           const std::vector<ReplicaRow>& rows) {
    double max_err = 0.0;
    std::int64_t truncated = 0, checked = 0;
    std::vector<double> dx, dy, final_r;
    for (const ReplicaRow& r : rows) {
        if (r.recon_error) {
            max_err = std::max(max_err, *r.recon_error);
            ++checked;
        }
        if (r.truncated_at) ++truncated;
        // endpoint statistics need the full horizon and a live dispersion
        if (r.status != dynamics::TrajectoryStatus::Completed) continue;
        if (r.truncated_at || !r.com_dx || !r.com_dy) continue;
        dx.push_back(*r.com_dx);
        dy.push_back(*r.com_dy);
        final_r.push_back(r.final_dispersion);
    }
    json j;
    j["checked"] = checked;
    j["truncated"] = truncated;
    j["max_reconstruction_error"] = max_err;
    j["replicas_used"] = static_cast<std::int64_t>(final_r.size());
    if (final_r.size() < 2) {
        j["com_variance_ratio"] = nullptr;
        j["dispersion_ks_p"] = nullptr;
        j["independence_corr"] = nullptr;
        return j;
    }
    const double n = static_cast<double>(config.model.n);
    const double per_coord = 0.5 * (fold_variance(dx) + fold_variance(dy));
    j["com_variance_ratio"] = per_coord / (config.sim.t_max / n);
    const double dim = regime::bessel_dimension(config.model, config.model.n);
    const auto ks = analysis::ks_test(final_r, [&](double r) {
        return besq_transition_cdf(dim, r0, config.sim.t_max, r);
    });
    j["dispersion_ks_p"] = ks.p_value;
    std::vector<double> disp2(dx.size());
    for (std::size_t i = 0; i < dx.size(); ++i) disp2[i] = dx[i] * dx[i] + dy[i] * dy[i];
    j["independence_corr"] = fold_corr(disp2, final_r);
    return j;
}

json drift_section(const ExperimentConfig& config, double r0,
                   const std::vector<ReplicaRow>& rows) {
    std::vector<double> final_r;
    for (const ReplicaRow& r : rows)
        if (r.status == dynamics::TrajectoryStatus::Completed)
            final_r.push_back(r.final_dispersion);
    const double dim = regime::bessel_dimension(config.model, config.model.n);
    json j;
    j["predicted_mean"] = r0 + dim * config.sim.t_max;
    j["replicas_used"] = static_cast<std::int64_t>(final_r.size());
    if (final_r.empty()) {
        j["empirical_mean"] = nullptr;
        j["std_error"] = nullptr;
        return j;
    }
    j["empirical_mean"] = fold_mean(final_r);
    j["std_error"] = final_r.size() < 2
                         ? json(nullptr)
                         : json(std::sqrt(fold_variance(final_r) /
                                          static_cast<double>(final_r.size())));
    return j;
}

// one aggregation routine serves run_batch and summarize, so "recomputed
// equals persisted" is a byte-level check of the data, not of two folds
json build_aggregate(const ExperimentConfig& config, double r0,
                     const std::vector<ReplicaRow>& rows,
                     const std::vector<TaggedEvent>& events) {
    json j;
    j["version"] = kVersion;
    j["config_hash"] = config_hash(config);
    j["seed"] = config.sim.seed;
    j["config"] = canonical_config(config);
    j["replicas"] = config.replicas;
    j["initial_dispersion"] = r0;
    std::int64_t completed = 0, flagged = 0, floor_hit = 0;
    for (const ReplicaRow& r : rows) {
        switch (r.status) {
            case dynamics::TrajectoryStatus::Completed: ++completed; break;
            case dynamics::TrajectoryStatus::ExplosionFlagged: ++flagged; break;
            case dynamics::TrajectoryStatus::StepFloorHit: ++floor_hit; break;
        }
    }
    j["status_counts"] = {{"completed", completed},
                          {"explosion_flagged", flagged},
                          {"step_floor_hit", floor_hit}};
    j["census"] = wants(config, AnalysisKind::Census) ? census_section(events) : json(nullptr);
    j["decomposition"] = wants(config, AnalysisKind::Decomposition)
                             ? decomposition_section(config, r0, rows)
                             : json(nullptr);
    j["drift"] = wants(config, AnalysisKind::DriftDiagnostic) ? drift_section(config, r0, rows)
                                                              : json(nullptr);
    j["explosion"] = wants(config, AnalysisKind::Explosion)
                         ? explosion_section(rows, config.replicas)
                         : json(nullptr);
    return j;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string replica_basename(std::int64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "replica_%06lld", static_cast<long long>(index));
    return buf;
}

} // namespace

const char* analysis_name(AnalysisKind a) {
    switch (a) {
        case AnalysisKind::Decomposition: return "decomposition";
        case AnalysisKind::Census: return "census";
        case AnalysisKind::Explosion: return "explosion";
        case AnalysisKind::DriftDiagnostic: return "drift_diagnostic";
    }
    return "unknown";
}

ExperimentConfig config_from_json(const std::string& text, bool require_output_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig config;
    bool has_model = false, has_analyses = false;
    for (const auto& [key, val] : j.items()) {
        if (key == "model") {
            config.model = parse_model(val);
            has_model = true;
        } else if (key == "sim") {
            config.sim = parse_sim(val);
        } else if (key == "replicas") {
            config.replicas = need_integer(val, "replicas");
        } else if (key == "initial_condition") {
            config.initial = parse_initial(val);
        } else if (key == "analyses") {
            config.analyses = parse_analyses(val);
            has_analyses = true;
        } else if (key == "thresholds") {
            config.thresholds = parse_thresholds(val);
        } else if (key == "output_dir") {
            config.output_dir = need_string(val, "output_dir");
        } else if (key == "save_trajectories") {
            config.save_trajectories = need_bool(val, "save_trajectories");
        } else {
            bad_key(key);
        }
    }
    if (!has_model) throw ConfigError("missing config key 'model'");
    if (!has_analyses) throw ConfigError("missing config key 'analyses'");
    validate_config(config, require_output_dir);
    return config;
}

std::string config_canonical_json(const ExperimentConfig& config) {
    return canonical_config(config).dump();
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string s = config_canonical_json(config);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

geometry::Configuration initial_configuration(const ExperimentConfig& config) {
    if (config.initial.kind == InitialCondition::Kind::ExplicitList) {
        if (config.initial.points.size() != static_cast<std::size_t>(config.model.n))
            throw DomainError("initial_condition.points must list exactly model.n points");
        return config.initial.points;
    }
    const std::size_t n = static_cast<std::size_t>(config.model.n);
    CounterRng rng(config.initial.sub_seed, 0, 0);
    geometry::Configuration x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i].x = rng.normal();
        x[i].y = rng.normal();
    }
    Vec2 m{0.0, 0.0};
    for (const Vec2& p : x) m += p;
    m *= 1.0 / static_cast<double>(n);
    for (Vec2& p : x) p -= m;
    const double r = geometry::dispersion(x);
    if (!(r > 0.0)) throw NumericError("degenerate random initial configuration");
    const double scale = 1.0 / std::sqrt(r);
    for (Vec2& p : x) p *= scale;
    return x;
}

dynamics::Trajectory simulate_supervised(const regime::ModelParams& model,
                                         const dynamics::SimulationParams& sim,
                                         const geometry::Configuration& x0,
                                         const analysis::AnalysisThresholds& thresholds) {
    dynamics::ParticleIntegrator integ(model, sim, x0);
    const auto status = supervise(integ, model, thresholds, sim.t_max);
    return integ.take_trajectory(status);
}

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body) {
    if (count <= 0) return;
    const unsigned hw = std::thread::hardware_concurrency();
    const std::int64_t workers = std::min<std::int64_t>(count, hw == 0 ? 1 : hw);
    if (workers <= 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::int64_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

BatchResult run_batch(const ExperimentConfig& config) {
    validate_config(config, true);
    const geometry::Configuration x0 = initial_configuration(config);
    const double r0 = geometry::dispersion(x0);
    const std::string hash = config_hash(config);
    const bool want_deco = wants(config, AnalysisKind::Decomposition);
    const bool want_census = wants(config, AnalysisKind::Census);
    const bool want_expl = wants(config, AnalysisKind::Explosion);

    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory '" + config.output_dir +
                      "': " + ec.message());

    std::vector<ReplicaRow> rows(static_cast<std::size_t>(config.replicas));
    std::vector<std::vector<analysis::CollisionEvent>> events_by_replica(
        static_cast<std::size_t>(config.replicas));

    parallel_for(config.replicas, [&](std::int64_t i) {
        dynamics::SimulationParams sim = config.sim;
        sim.path_index = static_cast<std::uint64_t>(i);
        dynamics::ParticleIntegrator integ(config.model, sim, x0);
        dynamics::TrajectoryStatus status;
        if (want_expl) {
            status = supervise(integ, config.model, config.thresholds, sim.t_max);
        } else {
            status = integ.advance_until(sim.t_max) == dynamics::SegmentEnd::ReachedTime
                         ? dynamics::TrajectoryStatus::Completed
                         : dynamics::TrajectoryStatus::StepFloorHit;
        }
        const std::uint64_t steps = integ.steps();
        const dynamics::Trajectory traj = integ.take_trajectory(status);

        ReplicaRow row;
        row.index = i;
        row.status = status;
        row.t_end = traj.times.back();
        row.steps = steps;
        row.final_dispersion = geometry::dispersion(traj.frames.back());
        if (want_deco) {
            const auto rc = analysis::reconstruction_check(traj);
            row.recon_error = rc.max_reconstruction_error;
            row.truncated_at = rc.truncated_at;
            const Vec2 d = geometry::center(traj.frames.back()) - geometry::center(traj.frames.front());
            row.com_dx = d.x;
            row.com_dy = d.y;
        }
        if (want_expl) {
            const auto scan = analysis::detect_explosion(traj, config.model,
                                                         config.thresholds.eps_expl,
                                                         config.thresholds.eps_sep);
            row.explosion = scan.outcome;
            if (scan.report) {
                row.explosion_size = scan.report->size;
                row.explosion_time = scan.report->t_explosion;
            }
        }
        if (want_census) {
            auto evs = analysis::collision_census(traj, config.thresholds.eps_coll,
                                                  config.thresholds.eps_sep);
            row.events_total = static_cast<std::int64_t>(evs.size());
            std::int64_t iso = 0;
            for (const auto& e : evs)
                if (e.isolated) ++iso;
            row.events_isolated = iso;
            events_by_replica[static_cast<std::size_t>(i)] = std::move(evs);
        }
        if (config.save_trajectories) {
            const std::string base = replica_basename(i);
            write_file(dir / (base + ".csv"), dynamics::trajectory_to_csv(traj));
            write_file(dir / (base + ".json"), dynamics::trajectory_sidecar_json(traj, sim));
        }
        rows[static_cast<std::size_t>(i)] = std::move(row);
    });

    std::vector<TaggedEvent> events;
    for (std::size_t i = 0; i < events_by_replica.size(); ++i)
        for (auto& ev : events_by_replica[i])
            events.push_back(TaggedEvent{static_cast<std::int64_t>(i), std::move(ev)});

    const json agg = build_aggregate(config, r0, rows, events);
    const std::string agg_text = agg.dump(2) + "\n";

    write_file(dir / "replicas.csv", rows_to_csv(rows, hash, config.sim.seed));
    write_file(dir / "events.jsonl", events_to_jsonl(events, hash, config.sim.seed));
    write_file(dir / "aggregate.json", agg_text);

    return BatchResult{std::move(rows), std::move(events), agg_text};
}

std::string summarize(const std::string& results_dir) {
    const fs::path dir(results_dir);
    if (!fs::is_directory(dir))
        throw IoError("no results directory '" + results_dir + "'");
    const fs::path agg_path = dir / "aggregate.json";
    if (!fs::exists(agg_path))
        throw IoError("'" + results_dir + "' has no aggregate.json; nothing to summarize");
    const std::string agg_text = read_file(agg_path);
    json agg;
    try {
        agg = json::parse(agg_text);
    } catch (const json::exception& e) {
        throw IoError("aggregate.json: " + std::string(e.what()));
    }
    if (!agg.is_object() || !agg.contains("config") || !agg.contains("config_hash") ||
        !agg.contains("seed") || !agg.contains("version"))
        throw IoError("aggregate.json lacks its identity fields "
                      "(version, config_hash, seed, config)");

    ExperimentConfig config = config_from_json(agg["config"].dump(), false);
    const std::string hash = config_hash(config);
    if (hash != agg["config_hash"].get<std::string>())
        throw IoError("aggregate.json config echo hashes to " + hash + " but the file claims " +
                      agg["config_hash"].get<std::string>());
    if (config.sim.seed != agg["seed"].get<std::uint64_t>())
        throw IoError("aggregate.json seed does not match its config echo");

    const auto [row_stamp, rows] = rows_from_csv(read_file(dir / "replicas.csv"), "replicas.csv");
    if (row_stamp.hash != hash)
        throw IoError("results directory mixes experiments: replicas.csv is stamped " +
                      row_stamp.hash + " but aggregate.json is " + hash);
    const auto [ev_stamp, events] =
        events_from_jsonl_file(read_file(dir / "events.jsonl"), "events.jsonl");
    if (ev_stamp.hash != hash)
        throw IoError("results directory mixes experiments: events.jsonl is stamped " +
                      ev_stamp.hash + " but aggregate.json is " + hash);

    if (rows.size() != static_cast<std::size_t>(config.replicas))
        throw IoError("replicas.csv has " + std::to_string(rows.size()) + " rows but the config "
                      "names " + std::to_string(config.replicas) + " replicas");
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].index != static_cast<std::int64_t>(i))
            throw IoError("replicas.csv does not cover replica indices 0.." +
                          std::to_string(config.replicas - 1) + " in order");
    for (const TaggedEvent& te : events)
        if (te.replica < 0 || te.replica >= config.replicas)
            throw IoError("events.jsonl names replica " + std::to_string(te.replica) +
                          " outside 0.." + std::to_string(config.replicas - 1));

    const double r0 = geometry::dispersion(initial_configuration(config));
    const json rebuilt = build_aggregate(config, r0, rows, events);
    const std::string rebuilt_text = rebuilt.dump(2) + "\n";
    if (rebuilt_text != agg_text)
        throw IoError("aggregate.json does not match a recomputation from replicas.csv and "
                      "events.jsonl");
    return rebuilt_text;
}

} // namespace ks::harness
