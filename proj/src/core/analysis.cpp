#include "core/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/special.hpp"

namespace ks::analysis {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    }
    int find(int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }
};

// Cluster of a single frame with enough sufficient statistics to grow it by
// one point or to test isolation without revisiting members.
struct FrameCluster {
    IndexSet indices; // ascending
    std::int64_t count = 0;
    Vec2 sum{};
    double sumsq = 0.0;
    double dispersion = 0.0; // R_K = sumsq - |sum|^2 / count
};

double cluster_dispersion(std::int64_t count, const Vec2& sum, double sumsq) {
    return sumsq - (sum.x * sum.x + sum.y * sum.y) / static_cast<double>(count);
}

// Maximal single-linkage clusters of the frame with R_K <= eps and |K| >= 2.
// Merging never decreases dispersion (it adds the between-means term), so the
// qualifying clusters form downward-closed subtrees of the merge tree and the
// maximal ones are found by freezing children the moment a merge exceeds eps.
std::vector<FrameCluster> qualifying_clusters(const geometry::Configuration& x, double eps) {
    const std::size_t n = x.size();
    std::vector<FrameCluster> out;
    if (n < 2) return out;

    // cheap screen: any K with R_K <= eps contains a pair at squared distance
    // <= 4 eps (two members within 2 R_K / |K| of the mean)
    double min_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            min_d2 = std::min(min_d2, norm2(x[i] - x[j]));
    if (!(min_d2 <= 4.0 * eps)) return out;

    struct Edge {
        double d2;
        int i, j;
    };
    std::vector<Edge> edges;
    edges.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            edges.push_back({norm2(x[i] - x[j]), static_cast<int>(i), static_cast<int>(j)});
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    UnionFind uf(n);
    std::vector<FrameCluster> node(n);
    std::vector<char> alive(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        node[i].indices = {static_cast<int>(i)};
        node[i].count = 1;
        node[i].sum = x[i];
        node[i].sumsq = norm2(x[i]);
    }

    auto freeze = [&](FrameCluster&& c) {
        if (c.count >= 2) out.push_back(std::move(c));
    };

    for (const Edge& e : edges) {
        const int ra = uf.find(e.i);
        const int rb = uf.find(e.j);
        if (ra == rb) continue;
        FrameCluster& a = node[static_cast<std::size_t>(ra)];
        FrameCluster& b = node[static_cast<std::size_t>(rb)];
        const std::int64_t count = a.count + b.count;
        const Vec2 sum = a.sum + b.sum;
        const double sumsq = a.sumsq + b.sumsq;
        const double disp = cluster_dispersion(count, sum, sumsq);
        const bool a_ok = alive[static_cast<std::size_t>(ra)];
        const bool b_ok = alive[static_cast<std::size_t>(rb)];
        const bool merged_ok = a_ok && b_ok && disp <= eps;
        if (!merged_ok) {
            if (a_ok) freeze(std::move(a));
            if (b_ok) freeze(std::move(b));
        }
        // union by member count, reusing the larger root's storage
        const int keep = a.count >= b.count ? ra : rb;
        const int drop = keep == ra ? rb : ra;
        FrameCluster& k = node[static_cast<std::size_t>(keep)];
        FrameCluster& d = node[static_cast<std::size_t>(drop)];
        if (merged_ok) {
            k.indices.insert(k.indices.end(), d.indices.begin(), d.indices.end());
            k.count = count;
            k.sum = sum;
            k.sumsq = sumsq;
            k.dispersion = disp;
        } else {
            k.indices.clear();
            k.count = count; // keep counts so union-by-size stays balanced
        }
        d.indices.clear();
        d.indices.shrink_to_fit();
        alive[static_cast<std::size_t>(keep)] = merged_ok ? 1 : 0;
        uf.parent[static_cast<std::size_t>(drop)] = keep;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (alive[i] && uf.find(static_cast<int>(i)) == static_cast<int>(i))
            freeze(std::move(node[i]));

    for (auto& c : out) std::sort(c.indices.begin(), c.indices.end());
    std::sort(out.begin(), out.end(),
              [](const FrameCluster& a, const FrameCluster& b) { return a.indices < b.indices; });
    return out;
}

// min over outside particles j of R_{K + j}; +inf when K is everything
double nearest_outside_dispersion(const geometry::Configuration& x, const FrameCluster& c) {
    std::vector<char> inside(x.size(), 0);
    for (int i : c.indices) inside[static_cast<std::size_t>(i)] = 1;
    const double k = static_cast<double>(c.count);
    const Vec2 mean = c.sum * (1.0 / k);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (inside[j]) continue;
        const double grow = c.dispersion + (k / (k + 1.0)) * norm2(x[j] - mean);
        best = std::min(best, grow);
    }
    return best;
}

void require_frames(const dynamics::Trajectory& traj) {
    if (traj.frames.empty() || traj.times.size() != traj.frames.size())
        throw DomainError("trajectory has no frames");
}

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double pearson_corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = sample_mean(a);
    const double mb = sample_mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// adaptive Simpson with a running error bound
template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb, double whole,
                   double tol, int depth, double& err) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) {
        err += std::fabs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err);
}

template <class F>
double integrate(const F& f, double a, double b, double tol, double& err) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48, err);
}

KsResult ks_of_sorted(const std::vector<double>& values,
                      const std::function<double(double)>& cdf) {
    const double n = static_cast<double>(values.size());
    double stat = 0.0;
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double f = cdf(values[i]);
        if (!(f >= 0.0 && f <= 1.0)) throw DomainError("cdf must map into [0, 1]");
        if (f < prev - 1e-12) throw DomainError("cdf must be nondecreasing");
        prev = f;
        const double hi = static_cast<double>(i + 1) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        stat = std::max(stat, std::max(hi, lo));
    }
    return {stat, kolmogorov_q(std::sqrt(n) * stat)};
}

} // namespace

std::vector<IndexSet> detect_clusters(const geometry::Configuration& config, double eps_link) {
    geometry::validate_configuration(config);
    if (!(eps_link > 0.0) || !std::isfinite(eps_link))
        throw DomainError("eps_link must be positive and finite");
    const std::size_t n = config.size();
    UnionFind uf(n);
    const double link2 = eps_link * eps_link;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (norm2(config[i] - config[j]) <= link2)
                uf.parent[static_cast<std::size_t>(uf.find(static_cast<int>(j)))] =
                    uf.find(static_cast<int>(i));
    std::map<int, IndexSet> groups;
    for (std::size_t i = 0; i < n; ++i)
        groups[uf.find(static_cast<int>(i))].push_back(static_cast<int>(i));
    std::vector<IndexSet> out;
    out.reserve(groups.size());
    for (auto& [root, members] : groups) out.push_back(std::move(members));
    std::sort(out.begin(), out.end(),
              [](const IndexSet& a, const IndexSet& b) { return a.front() < b.front(); });
    return out;
}

std::vector<CollisionEvent> collision_census(const dynamics::Trajectory& traj, double eps_coll,
                                             double eps_sep) {
    require_frames(traj);
    if (!(eps_coll > 0.0) || !(eps_sep > 0.0)) throw DomainError("thresholds must be positive");
    if (!(eps_coll < eps_sep)) throw DomainError("eps_coll must be smaller than eps_sep");

    struct Window {
        double t_start;
        double t_end;
        double min_disp;
        bool isolated;
        std::size_t last_frame;
    };
    std::map<IndexSet, Window> open;
    std::vector<CollisionEvent> out;

    auto emit = [&](const IndexSet& k, const Window& w) {
        CollisionEvent ev;
        ev.t_start = w.t_start;
        ev.t_end = w.t_end;
        ev.indices = k;
        ev.size = static_cast<std::int64_t>(k.size());
        ev.min_dispersion = w.min_disp;
        ev.isolated = w.isolated;
        out.push_back(std::move(ev));
    };

    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
        const auto& frame = traj.frames[f];
        const double t = traj.times[f];
        for (const FrameCluster& c : qualifying_clusters(frame, eps_coll)) {
            const bool isolated_now = nearest_outside_dispersion(frame, c) >= eps_sep;
            auto it = open.find(c.indices);
            if (it != open.end() && it->second.last_frame + 1 == f) {
                Window& w = it->second;
                w.t_end = t;
                w.min_disp = std::min(w.min_disp, c.dispersion);
                w.isolated = w.isolated && isolated_now;
                w.last_frame = f;
            } else {
                if (it != open.end()) {
                    emit(it->first, it->second);
                    open.erase(it);
                }
                open.emplace(c.indices, Window{t, t, c.dispersion, isolated_now, f});
            }
        }
        for (auto it = open.begin(); it != open.end();) {
            if (it->second.last_frame != f) {
                emit(it->first, it->second);
                it = open.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (const auto& [k, w] : open) emit(k, w);

    std::sort(out.begin(), out.end(), [](const CollisionEvent& a, const CollisionEvent& b) {
        if (a.t_start != b.t_start) return a.t_start < b.t_start;
        return a.indices < b.indices;
    });
    return out;
}

ExplosionScan detect_explosion(const dynamics::Trajectory& traj, const regime::ModelParams& model,
                               double eps_expl, double eps_sep) {
    require_frames(traj);
    if (!(eps_expl > 0.0) || !(eps_sep > 0.0)) throw DomainError("thresholds must be positive");
    const auto report = regime::classify(model);

    const auto& frame = traj.frames.back();
    const FrameCluster* best = nullptr;
    auto clusters = qualifying_clusters(frame, eps_expl);
    for (const FrameCluster& c : clusters) {
        if (c.count < report.k0) continue;
        if (nearest_outside_dispersion(frame, c) < eps_sep) continue;
        if (best == nullptr || c.count < best->count ||
            (c.count == best->count && c.indices < best->indices))
            best = &c;
    }

    ExplosionScan scan;
    if (best != nullptr) {
        scan.outcome = ExplosionOutcome::Detected;
        scan.report = ExplosionReport{traj.times.back(), best->indices, best->count, frame};
    } else if (traj.status != dynamics::TrajectoryStatus::Completed) {
        // the run stopped early on a suspected collapse; finding no qualifying
        // cluster in the terminal frame cannot certify absence
        scan.outcome = ExplosionOutcome::Inconclusive;
    } else {
        scan.outcome = ExplosionOutcome::Absent;
    }
    return scan;
}

namespace {

struct FramewisePieces {
    double max_err = 0.0;
    std::optional<double> truncated_at;
    std::size_t usable_frames = 0; // prefix length before truncation
};

// reconstruction error of center/dispersion/direction coordinates plus the
// time-change bookkeeping, shared between the per-path and ensemble checks
FramewisePieces reconstruction_scan(const dynamics::Trajectory& traj) {
    FramewisePieces p;
    std::size_t stop = traj.frames.size();
    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
        if (geometry::dispersion(traj.frames[f]) < 1e-300) {
            stop = f;
            p.truncated_at = traj.times[f];
            break;
        }
    }
    p.usable_frames = stop;

    dynamics::ScalarPath d_path;
    for (std::size_t f = 0; f < stop; ++f) {
        d_path.times.push_back(traj.times[f]);
        d_path.values.push_back(geometry::dispersion(traj.frames[f]));
    }
    std::optional<dynamics::TimeChangeResult> tc;
    if (stop >= 2) tc = dynamics::time_change(d_path);

    for (std::size_t f = 0; f < stop; ++f) {
        const auto coords = geometry::sphere_coords(traj.frames[f]);
        const auto back = geometry::assemble(coords);
        for (std::size_t i = 0; i < back.size(); ++i) {
            p.max_err = std::max(p.max_err, std::fabs(back[i].x - traj.frames[f][i].x));
            p.max_err = std::max(p.max_err, std::fabs(back[i].y - traj.frames[f][i].y));
        }
        if (tc) {
            // the inverse clock must return the frame's own time at its A-value
            const double s = tc->a_path.values[f];
            p.max_err = std::max(p.max_err, std::fabs(tc->rho(s) - traj.times[f]));
        }
    }
    return p;
}

} // namespace

ReconstructionCheck reconstruction_check(const dynamics::Trajectory& traj) {
    require_frames(traj);
    const FramewisePieces pieces = reconstruction_scan(traj);
    return ReconstructionCheck{pieces.max_err, pieces.truncated_at};
}

DecompositionReport decomposition_check(const dynamics::Trajectory& traj,
                                        const regime::ModelParams& model) {
    require_frames(traj);
    if (traj.frames.front().size() != static_cast<std::size_t>(model.n))
        throw DomainError("trajectory frame size does not match model N");
    const double dim = regime::bessel_dimension(model, model.n);
    if (!(dim > 0.0))
        throw DomainError("dispersion law checks require d(N) > 0; supercritical runs are "
                          "analyzed through the census instead");

    const FramewisePieces pieces = reconstruction_scan(traj);
    if (pieces.usable_frames < 2) throw DomainError("need at least 2 frames before truncation");

    const double n = static_cast<double>(model.n);
    std::vector<double> m_innov, d_innov, pit;
    double qv_sum = 0.0;
    for (std::size_t f = 0; f + 1 < pieces.usable_frames; ++f) {
        const double dt = traj.times[f + 1] - traj.times[f];
        const Vec2 m0 = geometry::center(traj.frames[f]);
        const Vec2 m1 = geometry::center(traj.frames[f + 1]);
        const double r0 = geometry::dispersion(traj.frames[f]);
        const double r1 = geometry::dispersion(traj.frames[f + 1]);
        const double mx = (m1.x - m0.x) * std::sqrt(n / dt);
        const double my = (m1.y - m0.y) * std::sqrt(n / dt);
        qv_sum += 0.5 * (mx * mx + my * my);
        const double dz = (r1 - r0 - dim * dt) / std::sqrt(4.0 * r0 * dt);
        m_innov.push_back(mx);
        d_innov.push_back(dz);
        m_innov.push_back(my);
        d_innov.push_back(dz);
        pit.push_back(besq_transition_cdf(dim, r0, dt, r1));
    }

    DecompositionReport rep;
    rep.max_reconstruction_error = pieces.max_err;
    rep.truncated_at = pieces.truncated_at;
    rep.com_variance_ratio = qv_sum / static_cast<double>(pit.size());
    std::sort(pit.begin(), pit.end());
    rep.dispersion_ks_p =
        ks_of_sorted(pit, [](double z) { return std::clamp(z, 0.0, 1.0); }).p_value;
    rep.independence_corr = pearson_corr(m_innov, d_innov);
    return rep;
}

void EnsembleDecomposition::add(const dynamics::Trajectory& traj,
                                const regime::ModelParams& model) {
    require_frames(traj);
    if (traj.frames.front().size() != static_cast<std::size_t>(model.n))
        throw DomainError("trajectory frame size does not match model N");
    const double dim = regime::bessel_dimension(model, model.n);
    if (!(dim > 0.0)) throw DomainError("dispersion law checks require d(N) > 0");

    const FramewisePieces pieces = reconstruction_scan(traj);
    max_err_ = std::max(max_err_, pieces.max_err);
    if (pieces.truncated_at && !truncated_at_) truncated_at_ = pieces.truncated_at;

    const double r0 = geometry::dispersion(traj.frames.front());
    const double t = traj.times.back() - traj.times.front();
    if (!(t > 0.0)) throw DomainError("replica needs a positive time horizon");
    if (final_r_.empty() && com_dx_.empty()) {
        r0_ = r0;
        t_ = t;
        dim_ = dim;
        n_particles_ = static_cast<double>(model.n);
    } else if (std::fabs(r0 - r0_) > 1e-9 || std::fabs(t - t_) > 1e-9 ||
               n_particles_ != static_cast<double>(model.n)) {
        throw DomainError("replicas must share the model, initial dispersion, and horizon");
    }
    if (pieces.truncated_at) return; // no terminal law sample from a truncated path

    const Vec2 m0 = geometry::center(traj.frames.front());
    const Vec2 m1 = geometry::center(traj.frames.back());
    com_dx_.push_back(m1.x - m0.x);
    com_dy_.push_back(m1.y - m0.y);
    final_r_.push_back(geometry::dispersion(traj.frames.back()));
}

DecompositionReport EnsembleDecomposition::finish() const {
    if (final_r_.size() < 2) throw DomainError("need at least 2 untruncated replicas");
    DecompositionReport rep;
    rep.max_reconstruction_error = max_err_;
    rep.truncated_at = truncated_at_;

    const double per_coord = 0.5 * (sample_variance(com_dx_) + sample_variance(com_dy_));
    rep.com_variance_ratio = per_coord / (t_ / n_particles_);

    std::vector<double> sorted = final_r_;
    std::sort(sorted.begin(), sorted.end());
    const double d = dim_, z0 = r0_, t = t_;
    rep.dispersion_ks_p =
        ks_of_sorted(sorted, [=](double z) { return besq_transition_cdf(d, z0, t, z); }).p_value;

    std::vector<double> disp2(com_dx_.size());
    for (std::size_t i = 0; i < disp2.size(); ++i)
        disp2[i] = com_dx_[i] * com_dx_[i] + com_dy_[i] * com_dy_[i];
    rep.independence_corr = pearson_corr(disp2, final_r_);
    return rep;
}

DriftReport drift_diagnostic(const std::vector<dynamics::Trajectory>& ensemble,
                             const regime::ModelParams& model, const IndexSet& k, double t) {
    if (ensemble.empty()) throw DomainError("drift diagnostic needs a non-empty ensemble");
    const auto& first = ensemble.front();
    require_frames(first);
    geometry::validate_subset(first.frames.front(), k);
    const double d = regime::bessel_dimension(model, static_cast<int>(k.size()));
    const double r0 = geometry::dispersion(first.frames.front(), k);

    std::vector<double> values;
    values.reserve(ensemble.size());
    for (const auto& traj : ensemble) {
        require_frames(traj);
        if (std::fabs(geometry::dispersion(traj.frames.front(), k) - r0) > 1e-9)
            throw DomainError("replicas must share the initial configuration");
        const auto& ts = traj.times;
        auto it = std::lower_bound(ts.begin(), ts.end(), t - 1e-9);
        if (it == ts.end() || std::fabs(*it - t) > 1e-9)
            throw DomainError("trajectory has no frame at the requested time");
        const std::size_t f = static_cast<std::size_t>(it - ts.begin());
        values.push_back(geometry::dispersion(traj.frames[f], k));
    }

    DriftReport rep;
    rep.predicted_mean = r0 + d * t;
    rep.empirical_mean = sample_mean(values);
    rep.std_error = values.size() > 1
                        ? std::sqrt(sample_variance(values) / static_cast<double>(values.size()))
                        : 0.0;
    return rep;
}

HittingProbability hitting_probability(double delta, double a, double b, double x, double y) {
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("b must be positive");
    if (!std::isfinite(delta) || !std::isfinite(a)) throw DomainError("parameters must be finite");
    if (!(x >= 0.0 && x <= y && y < 1.0))
        throw DomainError("need 0 <= x <= y < 1");

    const double c = 0.5 * (delta + a * std::sqrt(b));
    if (c >= 1.0) return {0.0, true, 0.0};
    if (x == y) return {0.0, false, 0.0};

    // g(v) = (delta + a sqrt(b+v)) / (2 v (1-v)) splits into c/v plus the
    // bounded remainder h; the c/v part integrates in closed form, so only
    // exp of H(u) = int_{1/2}^u h needs quadrature.
    const auto h = [=](double v) {
        return (a / (std::sqrt(b + v) + std::sqrt(b)) + 2.0 * c) / (2.0 * (1.0 - v));
    };
    const auto big_h = [&](double u) {
        double err = 0.0;
        return integrate(h, 0.5, u, 1e-13, err);
    };

    // F0(s) = int_0^s (2u)^(-c) exp(-H(u)) du; for c in (0,1) the substitution
    // u = w^(1/(1-c)) absorbs the power singularity exactly
    double err_y = 0.0, err_x = 0.0;
    double f0_y = 0.0, f0_x = 0.0;
    if (c > 0.0) {
        const double q = 1.0 / (1.0 - c);
        const auto smooth = [&](double w) { return std::exp(-big_h(std::pow(w, q))); };
        const double scale = std::pow(2.0, -c) / (1.0 - c);
        f0_y = scale * integrate(smooth, 0.0, std::pow(y, 1.0 - c), 1e-11, err_y);
        if (x > 0.0) f0_x = scale * integrate(smooth, 0.0, std::pow(x, 1.0 - c), 1e-11, err_x);
        err_y *= scale;
        err_x *= scale;
    } else {
        const auto direct = [&](double u) {
            return (u == 0.0 && c < 0.0 ? 0.0 : std::pow(2.0 * u, -c)) * std::exp(-big_h(u));
        };
        f0_y = integrate(direct, 0.0, y, 1e-11, err_y);
        if (x > 0.0) f0_x = integrate(direct, 0.0, x, 1e-11, err_x);
    }

    HittingProbability out;
    out.value = (f0_y - f0_x) / f0_y;
    out.quadrature_error = (err_x + err_y + std::fabs(out.value) * err_y) / f0_y;
    return out;
}

double sphere_dispersion_drift(const regime::ModelParams& model, const geometry::Configuration& u,
                               const IndexSet& k) {
    geometry::validate_subset(u, k);
    if (u.size() != static_cast<std::size_t>(model.n))
        throw DomainError("configuration size does not match model N");
    const int ksize = static_cast<int>(k.size());
    const double d_k = regime::bessel_dimension(model, ksize);
    if (k.size() == u.size()) return 0.0; // R_K(u) = 1 identically on the sphere

    const double d_n = regime::bessel_dimension(model, model.n);
    const double r_k = geometry::dispersion(u, k);
    const Vec2 s_k = geometry::center(u, k);

    std::vector<char> inside(u.size(), 0);
    for (int i : k) inside[static_cast<std::size_t>(i)] = 1;
    double cross = 0.0;
    for (int i : k) {
        const Vec2 ui = u[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < u.size(); ++j) {
            if (inside[j]) continue;
            const Vec2 diff = ui - u[j];
            const double d2 = norm2(diff);
            if (d2 < 1e-24) throw NumericError("coincident cross pair");
            cross += dot(diff, ui - s_k) / d2;
        }
    }
    const double w = 2.0 * model.theta_value() / static_cast<double>(model.n);
    return d_k - d_n * r_k - w * cross;
}

KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw DomainError("KS test needs a non-empty sample");
    std::sort(sample.begin(), sample.end());
    return ks_of_sorted(sample, cdf);
}

KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("KS test needs non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double stat = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        const double v = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= v) ++ia;
        while (ib < b.size() && b[ib] <= v) ++ib;
        stat = std::max(stat, std::fabs(static_cast<double>(ia) / na -
                                        static_cast<double>(ib) / nb));
    }
    const double n_eff = na * nb / (na + nb);
    return {stat, kolmogorov_q(std::sqrt(n_eff) * stat)};
}

MassProbeResult mass_probe(const regime::ModelParams& model, std::int64_t k,
                           std::int64_t n_samples, double diag_cutoff, CounterRng& rng) {
    if (k < 2 || k > model.n) throw DomainError("need 2 <= k <= N");
    if (k > 64) throw DomainError("mass probe limited to k <= 64");
    if (n_samples < 2) throw DomainError("need at least 2 samples");
    if (!(diag_cutoff > 0.0)) throw DomainError("diag_cutoff must be positive");

    const double exponent = model.theta_value() / static_cast<double>(model.n);
    const double cutoff2 = diag_cutoff * diag_cutoff;
    const double volume = std::pow(std::numbers::pi, static_cast<double>(k));

    std::vector<Vec2> pts(static_cast<std::size_t>(k));
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        for (auto& p : pts) {
            const double r = std::sqrt(rng.uniform());
            const double ang = 2.0 * std::numbers::pi * rng.uniform();
            p = {r * std::cos(ang), r * std::sin(ang)};
        }
        double log_w = 0.0;
        bool keep = true;
        for (std::size_t i = 0; i < pts.size() && keep; ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double d2 = norm2(pts[i] - pts[j]);
                if (d2 < cutoff2) {
                    keep = false;
                    break;
                }
                log_w += std::log(d2);
            }
        const double w = keep ? std::exp(-exponent * log_w) : 0.0;
        sum += w;
        sumsq += w * w;
    }
    const double n = static_cast<double>(n_samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean) * n / (n - 1.0);
    return {volume * mean, volume * std::sqrt(var / n)};
}

dynamics::ScalarPath dispersion_trace(const dynamics::Trajectory& traj, const IndexSet& k) {
    require_frames(traj);
    geometry::validate_subset(traj.frames.front(), k);
    dynamics::ScalarPath path;
    path.times = traj.times;
    path.values.reserve(traj.frames.size());
    for (const auto& frame : traj.frames) path.values.push_back(geometry::dispersion(frame, k));
    return path;
}

namespace {

nlohmann::json event_json(const CollisionEvent& e) {
    return nlohmann::json{{"t_start", e.t_start},
                          {"t_end", e.t_end},
                          {"indices", e.indices},
                          {"size", e.size},
                          {"min_dispersion", e.min_dispersion},
                          {"isolated", e.isolated}};
}

CollisionEvent event_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw IoError("event must be a JSON object");
    static const std::vector<std::string> allowed = {"t_start", "t_end", "indices",
                                                     "size", "min_dispersion", "isolated"};
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw IoError("unknown event field '" + key + "'");
    for (const auto& key : allowed)
        if (!j.contains(key)) throw IoError("missing event field '" + key + "'");
    CollisionEvent e;
    e.t_start = j.at("t_start").get<double>();
    e.t_end = j.at("t_end").get<double>();
    e.indices = j.at("indices").get<IndexSet>();
    e.size = j.at("size").get<std::int64_t>();
    e.min_dispersion = j.at("min_dispersion").get<double>();
    e.isolated = j.at("isolated").get<bool>();
    if (e.size != static_cast<std::int64_t>(e.indices.size()))
        throw IoError("event size does not match its index set");
    if (!(e.t_start <= e.t_end)) throw IoError("event window is reversed");
    if (!(e.min_dispersion >= 0.0)) throw IoError("event dispersion must be nonnegative");
    return e;
}

} // namespace

std::string event_to_json(const CollisionEvent& event) { return event_json(event).dump(); }

std::string events_to_jsonl(const std::vector<CollisionEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        out += event_json(e).dump();
        out += '\n';
    }
    return out;
}

std::vector<CollisionEvent> events_from_jsonl(const std::string& text) {
    std::vector<CollisionEvent> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            out.push_back(event_from_json(j));
        } catch (const IoError& e) {
            throw IoError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw IoError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace ks::analysis
