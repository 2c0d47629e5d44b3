#include "core/geometry.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "core/format.hpp"

namespace ks::geometry {

void validate_configuration(const Configuration& x) {
    if (x.size() < 2) throw DomainError("configuration requires at least 2 particles");
    for (const auto& p : x)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw DomainError("configuration has non-finite coordinates");
}

void validate_subset(const Configuration& x, const IndexSet& k) {
    if (k.empty()) throw DomainError("index set is empty");
    std::vector<char> seen(x.size(), 0);
    for (const int i : k) {
        if (i < 0 || static_cast<std::size_t>(i) >= x.size())
            throw DomainError("index set out of range");
        if (seen[static_cast<std::size_t>(i)]) throw DomainError("index set has duplicates");
        seen[static_cast<std::size_t>(i)] = 1;
    }
}

Vec2 center(const Configuration& x) {
    Vec2 s;
    for (const auto& p : x) s += p;
    return s * (1.0 / static_cast<double>(x.size()));
}

Vec2 center(const Configuration& x, const IndexSet& k) {
    validate_subset(x, k);
    Vec2 s;
    for (const int i : k) s += x[static_cast<std::size_t>(i)];
    return s * (1.0 / static_cast<double>(k.size()));
}

namespace {

// debug-only agreement check between the centered and pairwise forms
[[maybe_unused]] bool pairwise_agrees(const Configuration& x, const IndexSet& k, double centered) {
    return std::fabs(centered - dispersion_pairwise(x, k)) <=
           1e-10 * std::max(1.0, std::fabs(centered));
}

} // namespace

double dispersion(const Configuration& x) {
    const Vec2 s = center(x);
    double r = 0.0;
    for (const auto& p : x) r += norm2(p - s);
#ifndef NDEBUG
    IndexSet all(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) all[i] = static_cast<int>(i);
    assert(pairwise_agrees(x, all, r));
#endif
    return r;
}

double dispersion(const Configuration& x, const IndexSet& k) {
    const Vec2 s = center(x, k);
    double r = 0.0;
    for (const int i : k) r += norm2(x[static_cast<std::size_t>(i)] - s);
    assert(pairwise_agrees(x, k, r));
    return r;
}

double dispersion_pairwise(const Configuration& x, const IndexSet& k) {
    validate_subset(x, k);
    double acc = 0.0;
    for (const int i : k)
        for (const int j : k)
            acc += norm2(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
    return acc / (2.0 * static_cast<double>(k.size()));
}

namespace {

// shared pairwise accumulation; cutoff < 0 requests the singular (exact) drift
std::vector<Vec2> drift_impl(const regime::ModelParams& model, const Configuration& x,
                             double cutoff) {
    validate_configuration(x);
    if (static_cast<std::size_t>(model.n) != x.size())
        throw DomainError("configuration size does not match model N");
    const double w = model.theta_value() / static_cast<double>(model.n);
    std::vector<Vec2> b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const Vec2 diff = x[i] - x[j];
            const double d2 = norm2(diff);
            if (cutoff < 0.0) {
                if (d2 < 1e-24)
                    throw NumericError("singular configuration: coincident particles");
            } else if (d2 < cutoff) {
                continue; // flat cutoff: phi' vanishes below 1/n
            }
            const Vec2 pull = diff * (w / d2);
            b[i] -= pull;
            b[j] += pull;
        }
    }
    return b;
}

} // namespace

std::vector<Vec2> drift(const regime::ModelParams& model, const Configuration& x) {
    return drift_impl(model, x, -1.0);
}

std::vector<Vec2> regularized_drift(const regime::ModelParams& model, const Configuration& x,
                                    std::int64_t n) {
    if (n < 1) throw DomainError("regularization index must be >= 1");
    return drift_impl(model, x, 1.0 / static_cast<double>(n));
}

double regularized_drift_into(const regime::ModelParams& model, const Configuration& x,
                              std::int64_t n, std::vector<Vec2>& out) {
    const double cutoff = 1.0 / static_cast<double>(n);
    const double w = model.theta_value() / static_cast<double>(model.n);
    out.assign(x.size(), Vec2{});
    double min_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const Vec2 diff = x[i] - x[j];
            const double d2 = norm2(diff);
            min_d2 = std::min(min_d2, d2);
            if (d2 < cutoff) continue;
            const Vec2 pull = diff * (w / d2);
            out[i] -= pull;
            out[j] += pull;
        }
    }
    return min_d2;
}

SphereCoordinates sphere_coords(const Configuration& x) {
    validate_configuration(x);
    SphereCoordinates c;
    c.center = center(x);
    c.dispersion = dispersion(x);
    if (!(c.dispersion > 0.0))
        throw DomainError("sphere coordinates require positive dispersion");
    const double inv = 1.0 / std::sqrt(c.dispersion);
    c.direction.reserve(x.size());
    for (const auto& p : x) c.direction.push_back((p - c.center) * inv);
    return c;
}

double sphere_constraint_violation(const Configuration& u) {
    Vec2 s;
    double r = 0.0;
    for (const auto& p : u) {
        s += p;
        r += norm2(p);
    }
    return std::max(norm(s), std::fabs(r - 1.0));
}

Configuration assemble(const SphereCoordinates& c) {
    validate_configuration(c.direction);
    if (!(c.dispersion > 0.0)) throw DomainError("assembly requires positive dispersion");
    if (sphere_constraint_violation(c.direction) > 1e-12)
        throw DomainError("direction is not on the unit dispersion sphere");
    const double scale = std::sqrt(c.dispersion);
    Configuration x;
    x.reserve(c.direction.size());
    for (const auto& u : c.direction) x.push_back(c.center + u * scale);
    return x;
}

std::vector<double> campingcar_constants(int n) {
    if (n < 0) throw DomainError("campingcar constants require n >= 0");
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    c[0] = 1.0;
    for (int l = 0; l < n; ++l)
        c[static_cast<std::size_t>(l) + 1] = (2.0 + 8.0 * l) * c[static_cast<std::size_t>(l)];
    return c;
}

bool is_separated(const Configuration& x, const IndexSet& k, double eps) {
    validate_configuration(x);
    validate_subset(x, k);
    if (k.size() == x.size()) throw DomainError("separation requires a proper subset");
    if (!(eps > 0.0)) throw DomainError("separation scale must be positive");
    std::vector<char> in_k(x.size(), 0);
    for (const int i : k) in_k[static_cast<std::size_t>(i)] = 1;
    double norm_sq = 0.0;
    for (const auto& p : x) norm_sq += norm2(p);
    if (!(std::sqrt(norm_sq) < 1.0 / eps)) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!in_k[i]) continue;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (in_k[j]) continue;
            if (!(norm2(x[i] - x[j]) > eps)) return false;
        }
    }
    return true;
}

double log_density_m(const regime::ModelParams& model, const Configuration& x, double alpha) {
    validate_configuration(x);
    if (static_cast<std::size_t>(model.n) != x.size())
        throw DomainError("configuration size does not match model N");
    if (alpha < 0.0) throw DomainError("alpha must be >= 0");
    const double w = model.theta_value() / static_cast<double>(model.n);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double d2 = norm2(x[i] - x[j]);
            if (alpha == 0.0 && d2 < 1e-24)
                throw NumericError("singular configuration: coincident particles");
            acc += std::log(d2 + alpha);
        }
    }
    return -w * acc;
}

std::string config_to_csv(const Configuration& x) {
    validate_configuration(x);
    std::string out = "particle_index,x,y\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += fmt_double(x[i].x);
        out += ',';
        out += fmt_double(x[i].y);
        out += '\n';
    }
    return out;
}

Configuration config_from_csv(const std::string& text) {
    Configuration x;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line == "particle_index,x,y") continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw IoError("malformed configuration row: " + line);
        const auto idx = static_cast<std::size_t>(std::stoul(line.substr(0, c1)));
        if (idx != x.size()) throw IoError("configuration rows out of order");
        x.push_back({parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)),
                     parse_double(std::string_view(line).substr(c2 + 1))});
    }
    validate_configuration(x);
    return x;
}

std::string config_to_json(const Configuration& x) {
    validate_configuration(x);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : x) j.push_back({p.x, p.y});
    return j.dump();
}

Configuration config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw IoError("configuration json must be an array of [x, y] pairs");
    Configuration x;
    for (const auto& item : j) {
        if (!item.is_array() || item.size() != 2)
            throw IoError("configuration json must be an array of [x, y] pairs");
        x.push_back({item[0].get<double>(), item[1].get<double>()});
    }
    validate_configuration(x);
    return x;
}

} // namespace ks::geometry
