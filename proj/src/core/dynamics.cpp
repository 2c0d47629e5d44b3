#include "core/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "core/format.hpp"

namespace ks::dynamics {

void validate(const SimulationParams& sim) {
    if (!(sim.dt_base > 0.0) || !std::isfinite(sim.dt_base))
        throw DomainError("dt_base must be positive and finite");
    if (!(sim.t_max > 0.0) || !std::isfinite(sim.t_max))
        throw DomainError("t_max must be positive and finite");
    if (sim.regularization_n < 1) throw DomainError("regularization_n must be >= 1");
    if (sim.adapt_floor > sim.dt_base) throw DomainError("adapt_floor must not exceed dt_base");
    if (sim.save_stride < 1) throw DomainError("save_stride must be >= 1");
    if (!(sim.noise_scale >= 0.0) || !std::isfinite(sim.noise_scale))
        throw DomainError("noise_scale must be nonnegative and finite");
}

double resolved_adapt_floor(const SimulationParams& sim) {
    if (sim.adapt_floor > 0.0) return sim.adapt_floor;
    // the unclamped adaptive step at the drift cutoff distance 2/n, so the
    // floor binds exactly where the cutoff makes the drift Lipschitz; the
    // per-step noise sqrt(floor) then stays well inside the cutoff zone and
    // the integrator can resolve a genuine sub-cutoff collapse instead of
    // bouncing off its own discretization noise
    const double n = static_cast<double>(sim.regularization_n);
    const double derived = 4.0 * sim.dt_base / (n * n);
    return std::min(derived, sim.dt_base);
}

std::int64_t resolved_floor_patience(const SimulationParams& sim) {
    if (sim.floor_patience > 0) return sim.floor_patience;
    return static_cast<std::int64_t>(std::ceil(8.0 / sim.dt_base));
}

const char* status_name(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::Completed: return "completed";
        case TrajectoryStatus::ExplosionFlagged: return "explosion_flagged";
        case TrajectoryStatus::StepFloorHit: return "step_floor_hit";
    }
    return "unknown";
}

BlowupError::BlowupError(double t, geometry::Configuration frame)
    : NumericError("non-finite state at t = " + fmt_double(t)),
      time(t),
      last_frame(std::move(frame)) {}

ParticleIntegrator::ParticleIntegrator(const regime::ModelParams& model,
                                       const SimulationParams& sim, geometry::Configuration x0)
    : model_(model),
      sim_(sim),
      floor_(resolved_adapt_floor(sim)),
      patience_(resolved_floor_patience(sim)),
      x_(std::move(x0)) {
    validate(sim_);
    geometry::validate_configuration(x_);
    if (static_cast<std::size_t>(model_.n) != x_.size())
        throw DomainError("initial configuration size does not match model N");
    for (std::size_t i = 0; i < x_.size(); ++i)
        for (std::size_t j = i + 1; j < x_.size(); ++j)
            if (norm2(x_[i] - x_[j]) == 0.0)
                throw DomainError("initial particles must be pairwise distinct");
    rngs_.reserve(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i)
        rngs_.emplace_back(sim_.seed, sim_.path_index, static_cast<std::uint64_t>(i));
    save_frame();
}

void ParticleIntegrator::save_frame() {
    if (!times_.empty() && times_.back() == t_) return;
    times_.push_back(t_);
    frames_.push_back(x_);
}

SegmentEnd ParticleIntegrator::advance_until(double t_stop) {
    const double ns = sim_.noise_scale;
    while (t_ < t_stop) {
        const double min_d2 = geometry::regularized_drift_into(model_, x_, sim_.regularization_n,
                                                               drift_buf_);
        const double raw = sim_.dt_base * min_d2;
        const bool saturated = raw <= floor_;
        double dt = std::clamp(raw, floor_, sim_.dt_base);
        const bool last = dt >= t_stop - t_;
        if (last) dt = t_stop - t_;

        prev_ = x_;
        const double sq = ns * std::sqrt(dt);
        bool finite = true;
        for (std::size_t i = 0; i < x_.size(); ++i) {
            x_[i] += drift_buf_[i] * dt;
            if (ns > 0.0) {
                x_[i].x += sq * rngs_[i].normal();
                x_[i].y += sq * rngs_[i].normal();
            }
            finite = finite && std::isfinite(x_[i].x) && std::isfinite(x_[i].y);
        }
        if (!finite) throw BlowupError(t_, std::move(prev_));

        ++steps_;
        t_ = last ? t_stop : t_ + dt;
        saturated_run_ = saturated ? saturated_run_ + 1 : 0;

        if (last) {
            save_frame();
            return SegmentEnd::ReachedTime;
        }
        if (saturated_run_ > patience_) {
            save_frame();
            return SegmentEnd::FloorSaturated;
        }
        if (steps_ % static_cast<std::uint64_t>(sim_.save_stride) == 0) save_frame();
    }
    return SegmentEnd::ReachedTime;
}

Trajectory ParticleIntegrator::take_trajectory(TrajectoryStatus status) {
    save_frame();
    Trajectory tr;
    tr.times = std::move(times_);
    tr.frames = std::move(frames_);
    tr.status = status;
    tr.seed = sim_.seed;
    tr.model = model_;
    times_.clear();
    frames_.clear();
    return tr;
}

Trajectory simulate_particles(const regime::ModelParams& model, const SimulationParams& sim,
                              const geometry::Configuration& x0) {
    ParticleIntegrator integ(model, sim, x0);
    const SegmentEnd end = integ.advance_until(sim.t_max);
    return integ.take_trajectory(end == SegmentEnd::FloorSaturated
                                     ? TrajectoryStatus::StepFloorHit
                                     : TrajectoryStatus::Completed);
}

double sample_besq_transition(double delta, double z0, double t, CounterRng& rng) {
    if (!(delta > 0.0)) throw DomainError("exact transition sampling requires delta > 0");
    if (z0 < 0.0) throw DomainError("squared Bessel state must be nonnegative");
    if (t < 0.0) throw DomainError("transition time must be nonnegative");
    if (t == 0.0) return z0;
    const std::int64_t j = rng.poisson(z0 / (2.0 * t));
    return 2.0 * t * rng.gamma(0.5 * delta + static_cast<double>(j));
}

ScalarPath simulate_besq_path(double delta, double z0, double dt, double t_max, CounterRng& rng) {
    if (z0 < 0.0) throw DomainError("squared Bessel start must be nonnegative");
    if (!(dt > 0.0) || !(t_max > 0.0)) throw DomainError("dt and t_max must be positive");

    ScalarPath path;
    path.times.push_back(0.0);
    path.values.push_back(z0);
    if (delta <= 0.0 && z0 <= 0.0) {
        path.absorbed_at = 0.0;
        return path;
    }

    double z = z0;
    std::uint64_t k = 0;
    double t = 0.0;
    while (t < t_max) {
        ++k;
        const double t_next = std::min(static_cast<double>(k) * dt, t_max);
        const double step = t_next - t;
        t = t_next;
        if (delta > 0.0) {
            z = sample_besq_transition(delta, z, step, rng);
        } else if (delta == 0.0) {
            // the mixture's j = 0 term is the genuine absorption atom
            const std::int64_t j = rng.poisson(z / (2.0 * step));
            if (j == 0) {
                path.times.push_back(t);
                path.values.push_back(0.0);
                path.absorbed_at = t;
                return path;
            }
            z = 2.0 * step * rng.gamma(static_cast<double>(j));
        } else {
            const double diffused =
                z + 2.0 * std::sqrt(std::max(z, 0.0) * step) * rng.normal() + delta * step;
            if (diffused <= 0.0) {
                path.times.push_back(t);
                path.values.push_back(0.0);
                path.absorbed_at = t;
                return path;
            }
            z = diffused;
        }
        path.times.push_back(t);
        path.values.push_back(z);
    }
    return path;
}

ComparisonPath simulate_comparison_sde(double delta, double a, double b, double x0, double level,
                                       double dt, double t_max, CounterRng& rng,
                                       bool stop_at_decision) {
    if (!(b > 0.0)) throw DomainError("comparison SDE requires b > 0");
    if (a < 0.0) throw DomainError("comparison SDE requires a >= 0");
    if (x0 < 0.0 || x0 >= 1.0) throw DomainError("comparison SDE start must lie in [0, 1)");
    if (!(dt > 0.0) || !(t_max > 0.0)) throw DomainError("dt and t_max must be positive");
    if (!(level > 0.0)) throw DomainError("hitting level must be positive");

    ComparisonPath out;
    out.path.times.push_back(0.0);
    out.path.values.push_back(x0);
    if (x0 <= 0.0) out.tau_zero = 0.0;
    if (x0 >= level) out.tau_level = 0.0;

    double s = x0;
    std::uint64_t k = 0;
    double t = 0.0;
    while (t < t_max) {
        if (stop_at_decision && (out.tau_zero || out.tau_level)) break;
        ++k;
        const double t_next = std::min(static_cast<double>(k) * dt, t_max);
        const double step = t_next - t;
        t = t_next;
        const double diff = 2.0 * std::sqrt(std::fabs(s * (1.0 - s)));
        const double drift = delta + a * std::sqrt(b + std::fabs(s));
        s += diff * std::sqrt(step) * rng.normal() + drift * step;
        if (!out.tau_zero && s <= 0.0) out.tau_zero = t;
        if (s < 0.0) s = 0.0; // clamp only after recording the hit
        if (!out.tau_level && s >= level) out.tau_level = t;
        out.path.times.push_back(t);
        out.path.values.push_back(s);
    }
    return out;
}

Trajectory simulate_sphere(const regime::ModelParams& model, const geometry::Configuration& u0,
                           const SimulationParams& sim) {
    validate(sim);
    geometry::validate_configuration(u0);
    if (static_cast<std::size_t>(model.n) != u0.size())
        throw DomainError("direction size does not match model N");
    if (geometry::sphere_constraint_violation(u0) > 1e-12)
        throw DomainError("initial direction is not on the unit dispersion sphere");

    const std::size_t n = u0.size();
    const double half_norm_drift = 0.5 * (2.0 * static_cast<double>(model.n) - 3.0);
    geometry::Configuration u = u0;
    std::vector<CounterRng> rngs;
    rngs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        rngs.emplace_back(sim.seed, sim.path_index, static_cast<std::uint64_t>(i));

    Trajectory tr;
    tr.seed = sim.seed;
    tr.model = model;
    tr.times.push_back(0.0);
    tr.frames.push_back(u);

    // projection P = proj_{u-perp} proj_H: remove the mean, then the component
    // along u (u itself is mean-free, so the two projections commute here)
    std::vector<Vec2> buf(n);
    const auto project = [&](std::vector<Vec2>& v) {
        Vec2 m;
        for (const auto& w : v) m += w;
        m *= 1.0 / static_cast<double>(n);
        double along = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v[i] -= m;
            along += dot(v[i], u[i]);
        }
        for (std::size_t i = 0; i < n; ++i) v[i] -= u[i] * along;
    };

    std::vector<Vec2> drift_buf;
    geometry::Configuration prev;
    std::uint64_t k = 0;
    double t = 0.0;
    while (t < sim.t_max) {
        ++k;
        const double t_next = std::min(static_cast<double>(k) * sim.dt_base, sim.t_max);
        const double step = t_next - t;

        prev = u;
        geometry::regularized_drift_into(model, u, sim.regularization_n, drift_buf);
        project(drift_buf);
        const double sq = sim.noise_scale * std::sqrt(step);
        for (std::size_t i = 0; i < n; ++i) {
            const double gx = rngs[i].normal();
            const double gy = rngs[i].normal();
            buf[i] = {sq * gx, sq * gy};
        }
        project(buf);

        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] += buf[i] + drift_buf[i] * step - u[i] * (half_norm_drift * step);
            finite = finite && std::isfinite(u[i].x) && std::isfinite(u[i].y);
        }
        if (!finite) throw BlowupError(t, std::move(prev));

        // re-center and renormalize; the norm drift keeps this an O(step^2) nudge
        Vec2 m;
        for (const auto& p : u) m += p;
        m *= 1.0 / static_cast<double>(n);
        double r = 0.0;
        for (auto& p : u) {
            p -= m;
            r += norm2(p);
        }
        const double inv = 1.0 / std::sqrt(r);
        for (auto& p : u) p *= inv;

        t = t_next;
        if (k % static_cast<std::uint64_t>(sim.save_stride) == 0 || t >= sim.t_max) {
            tr.times.push_back(t);
            tr.frames.push_back(u);
        }
    }
    tr.status = TrajectoryStatus::Completed;
    return tr;
}

double MonotoneInterpolant::operator()(double x) const {
    if (xs.empty()) throw DomainError("empty interpolant");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + w * (ys[hi] - ys[lo]);
}

TimeChangeResult time_change(const ScalarPath& d_path) {
    if (d_path.times.size() != d_path.values.size())
        throw DomainError("scalar path times and values must have equal length");
    std::size_t n = d_path.values.size();
    if (n < 2) throw DomainError("time change needs at least two samples");
    // an absorbed path ends on a zero sample; the functional stops just before
    if (d_path.absorbed_at && d_path.values.back() <= 0.0) --n;
    for (std::size_t k = 0; k < n; ++k)
        if (!(d_path.values[k] > 0.0))
            throw DomainError("time change requires strictly positive values before absorption");
    if (n < 2) throw DomainError("time change needs at least two positive samples");

    TimeChangeResult out;
    out.a_path.times.assign(d_path.times.begin(), d_path.times.begin() + static_cast<long>(n));
    out.a_path.values.resize(n);
    out.a_path.values[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = d_path.times[k] - d_path.times[k - 1];
        if (!(dt > 0.0)) throw DomainError("scalar path times must be strictly increasing");
        out.a_path.values[k] =
            out.a_path.values[k - 1] +
            dt * 0.5 * (1.0 / d_path.values[k - 1] + 1.0 / d_path.values[k]);
    }
    out.rho.xs = out.a_path.values;
    out.rho.ys = out.a_path.times;
    return out;
}

std::string trajectory_to_csv(const Trajectory& traj) {
    std::string out = "t,particle,x,y\n";
    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
        const std::string ts = fmt_double(traj.times[f]);
        for (std::size_t i = 0; i < traj.frames[f].size(); ++i) {
            out += ts;
            out += ',';
            out += std::to_string(i);
            out += ',';
            out += fmt_double(traj.frames[f][i].x);
            out += ',';
            out += fmt_double(traj.frames[f][i].y);
            out += '\n';
        }
    }
    return out;
}

Trajectory trajectory_from_csv(const std::string& text) {
    Trajectory tr;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line == "t,particle,x,y") continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos || c3 == std::string::npos)
            throw IoError("malformed trajectory row: " + line);
        const std::string_view sv(line);
        const double t = parse_double(sv.substr(0, c1));
        const auto particle = static_cast<std::size_t>(std::stoul(line.substr(c1 + 1, c2 - c1 - 1)));
        const Vec2 p{parse_double(sv.substr(c2 + 1, c3 - c2 - 1)), parse_double(sv.substr(c3 + 1))};
        if (particle == 0) {
            if (!tr.times.empty() && !(t > tr.times.back()))
                throw IoError("trajectory times must be strictly increasing");
            tr.times.push_back(t);
            tr.frames.emplace_back();
        }
        if (tr.frames.empty() || particle != tr.frames.back().size())
            throw IoError("trajectory rows out of order");
        tr.frames.back().push_back(p);
    }
    if (tr.frames.empty()) throw IoError("trajectory csv has no rows");
    for (const auto& f : tr.frames)
        if (f.size() != tr.frames.front().size())
            throw IoError("trajectory frames have inconsistent particle counts");
    return tr;
}

std::string trajectory_sidecar_json(const Trajectory& traj, const SimulationParams& sim) {
    nlohmann::json j;
    j["model"] = {{"n", traj.model.n},
                  {"theta", traj.model.theta_display},
                  {"theta_num", traj.model.theta.num},
                  {"theta_den", traj.model.theta.den}};
    j["sim"] = {{"dt_base", sim.dt_base},
                {"t_max", sim.t_max},
                {"regularization_n", sim.regularization_n},
                {"adapt_floor", resolved_adapt_floor(sim)},
                {"seed", sim.seed},
                {"path_index", sim.path_index},
                {"save_stride", sim.save_stride},
                {"floor_patience", resolved_floor_patience(sim)},
                {"noise_scale", sim.noise_scale}};
    j["status"] = status_name(traj.status);
    j["seed"] = traj.seed;
    j["frames"] = traj.frames.size();
    return j.dump(2);
}

std::string scalar_path_to_csv(const ScalarPath& path) {
    std::string out;
    if (path.absorbed_at) out += "# absorbed_at," + fmt_double(*path.absorbed_at) + "\n";
    out += "t,value\n";
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        out += fmt_double(path.times[k]);
        out += ',';
        out += fmt_double(path.values[k]);
        out += '\n';
    }
    return out;
}

ScalarPath scalar_path_from_csv(const std::string& text) {
    ScalarPath path;
    std::istringstream in(text);
    std::string line;
    const std::string marker = "# absorbed_at,";
    while (std::getline(in, line)) {
        if (line.rfind(marker, 0) == 0) {
            path.absorbed_at = parse_double(std::string_view(line).substr(marker.size()));
            continue;
        }
        if (line.empty() || line[0] == '#' || line == "t,value") continue;
        const auto c = line.find(',');
        if (c == std::string::npos) throw IoError("malformed scalar path row: " + line);
        const std::string_view sv(line);
        path.times.push_back(parse_double(sv.substr(0, c)));
        path.values.push_back(parse_double(sv.substr(c + 1)));
    }
    if (path.times.empty()) throw IoError("scalar path csv has no rows");
    return path;
}

} // namespace ks::dynamics
