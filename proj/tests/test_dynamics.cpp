#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/dynamics.hpp"
#include "core/special.hpp"
#include "helpers.hpp"

using ks::CounterRng;
using ks::DomainError;
using ks::Vec2;
using ks::dynamics::SimulationParams;
using ks::dynamics::Trajectory;
using ks::dynamics::TrajectoryStatus;
using ks::geometry::Configuration;
using ks::regime::ModelParams;
using ks::testutil::ks_stat;
using ks::testutil::mean;
using ks::testutil::variance;

namespace {

// separation of the symmetric two-particle system under pure drift obeys
// (r^2)' = -4 theta / N, so r(t) = sqrt(r0^2 - 4 theta t / N)
double two_body_separation(double r0, double theta, double n, double t) {
    return std::sqrt(r0 * r0 - 4.0 * theta * t / n);
}

Configuration unit_dispersion_square() {
    // four particles on a square scaled to dispersion 1: 4 * 2 h^2 = 1
    const double h = 0.5 / std::sqrt(2.0);
    return {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
}

} // namespace

TEST_CASE("deterministic two-body collapse matches the closed form and an ODE oracle") {
    const auto model = ModelParams::from_decimal(2, "1");
    SimulationParams sim;
    sim.dt_base = 1e-6;
    sim.t_max = 0.1;
    sim.noise_scale = 0.0;
    sim.save_stride = 1000;
    const Configuration x0{{-0.5, 0.0}, {0.5, 0.0}};

    const Trajectory tr = ks::dynamics::simulate_particles(model, sim, x0);
    REQUIRE(tr.status == TrajectoryStatus::Completed);
    CHECK(tr.times.back() == sim.t_max);

    // closed form: r0 = 1, r(t) = sqrt(1 - 2 t)
    const Vec2 final_gap = tr.frames.back()[1] - tr.frames.back()[0];
    const double expected = two_body_separation(1.0, 1.0, 2.0, sim.t_max);
    CHECK(std::fabs(ks::norm(final_gap) - expected) < 1e-6);

    // independent RK4 integration of the full 4-dimensional ODE
    Configuration y = x0;
    const double h = 1e-5;
    const auto rhs = [&](const Configuration& q) {
        return ks::geometry::drift(model, q);
    };
    for (int k = 0; k < 10000; ++k) {
        const auto k1 = rhs(y);
        Configuration tmp(2);
        for (int i = 0; i < 2; ++i) tmp[i] = y[i] + k1[i] * (h / 2);
        const auto k2 = rhs(tmp);
        for (int i = 0; i < 2; ++i) tmp[i] = y[i] + k2[i] * (h / 2);
        const auto k3 = rhs(tmp);
        for (int i = 0; i < 2; ++i) tmp[i] = y[i] + k3[i] * h;
        const auto k4 = rhs(tmp);
        for (int i = 0; i < 2; ++i)
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(std::fabs(tr.frames.back()[i].x - y[i].x) < 1e-6);
        CHECK(std::fabs(tr.frames.back()[i].y - y[i].y) < 1e-6);
    }
    // and both particles stay symmetric about the origin
    CHECK(std::fabs(tr.frames.back()[0].x + tr.frames.back()[1].x) < 1e-12);
}

TEST_CASE("trajectories are reproducible bit for bit from the seed") {
    const auto model = ModelParams::from_decimal(3, "1.2");
    SimulationParams sim;
    sim.dt_base = 1e-3;
    sim.t_max = 0.25;
    sim.seed = 99;
    const Configuration x0{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    const Trajectory a = ks::dynamics::simulate_particles(model, sim, x0);
    const Trajectory b = ks::dynamics::simulate_particles(model, sim, x0);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t f = 0; f < a.frames.size(); ++f) {
        CHECK(a.times[f] == b.times[f]);
        for (std::size_t i = 0; i < a.frames[f].size(); ++i) {
            CHECK(a.frames[f][i].x == b.frames[f][i].x);
            CHECK(a.frames[f][i].y == b.frames[f][i].y);
        }
    }
    SimulationParams other = sim;
    other.seed = 100;
    const Trajectory c = ks::dynamics::simulate_particles(model, other, x0);
    CHECK(c.frames.back()[0].x != a.frames.back()[0].x);
}

TEST_CASE("theta zero gives standard Brownian increments") {
    const auto model = ModelParams::from_decimal(2, "0");
    SimulationParams sim;
    sim.dt_base = 1e-3;
    sim.t_max = 6.0;
    sim.seed = 31;
    const Configuration x0{{-2.0, 0.0}, {2.0, 0.0}};
    const Trajectory tr = ks::dynamics::simulate_particles(model, sim, x0);
    REQUIRE(tr.status == TrajectoryStatus::Completed);

    // normalized per-coordinate increments should be standard normal
    std::vector<double> zs;
    for (std::size_t f = 1; f < tr.frames.size(); ++f) {
        const double dt = tr.times[f] - tr.times[f - 1];
        REQUIRE(dt > 0.0);
        const double inv = 1.0 / std::sqrt(dt);
        for (std::size_t i = 0; i < 2; ++i) {
            zs.push_back((tr.frames[f][i].x - tr.frames[f - 1][i].x) * inv);
            zs.push_back((tr.frames[f][i].y - tr.frames[f - 1][i].y) * inv);
        }
    }
    REQUIRE(zs.size() >= 10000);
    const double m = mean(zs);
    const double v = variance(zs);
    const double n = static_cast<double>(zs.size());
    CHECK(std::fabs(m) < 3.0 / std::sqrt(n));
    CHECK(std::fabs(v - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("interacting ensemble dispersion drifts at the effective dimension") {
    // N=4, theta=1: dispersion of the full system should gain d = 3 per unit time
    const auto model = ModelParams::from_decimal(4, "1");
    const Configuration x0 = unit_dispersion_square();
    REQUIRE(ks::geometry::dispersion(x0, {0, 1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-12));

    const int paths = 1200;
    const double t = 0.5;
    std::vector<double> final_r(paths);
    for (int p = 0; p < paths; ++p) {
        SimulationParams sim;
        sim.dt_base = 5e-4;
        sim.t_max = t;
        sim.seed = 2026'0701;
        sim.path_index = static_cast<std::uint64_t>(p);
        sim.save_stride = 1 << 30; // keep only endpoints
        const Trajectory tr = ks::dynamics::simulate_particles(model, sim, x0);
        REQUIRE(tr.status == TrajectoryStatus::Completed);
        final_r[static_cast<std::size_t>(p)] =
            ks::geometry::dispersion(tr.frames.back(), {0, 1, 2, 3});
    }
    const double expect = 1.0 + 3.0 * t; // d_{1,4}(4) = 3
    const double se = std::sqrt(variance(final_r) / paths);
    CHECK(std::fabs(mean(final_r) - expect) < 3.0 * se);
}

TEST_CASE("free ensemble dispersion follows the exact reference transition") {
    // theta = 0: R(X_t) is a squared Bessel of dimension 2(N-1) started at R(x0)
    const auto model = ModelParams::from_decimal(4, "0");
    const Configuration x0 = unit_dispersion_square();
    const int paths = 1500;
    const double t = 0.5;
    std::vector<double> final_r(paths);
    std::vector<double> com_x(paths);
    for (int p = 0; p < paths; ++p) {
        SimulationParams sim;
        sim.dt_base = 1e-3;
        sim.t_max = t;
        sim.seed = 555;
        sim.path_index = static_cast<std::uint64_t>(p);
        sim.save_stride = 1 << 30;
        const Trajectory tr = ks::dynamics::simulate_particles(model, sim, x0);
        final_r[static_cast<std::size_t>(p)] =
            ks::geometry::dispersion(tr.frames.back(), {0, 1, 2, 3});
        com_x[static_cast<std::size_t>(p)] = ks::geometry::center(tr.frames.back()).x;
    }
    const double d = 6.0; // 2 (N - 1)
    const double stat = ks_stat(final_r, [&](double z) {
        return ks::besq_transition_cdf(d, 1.0, t, z);
    });
    CHECK(ks::kolmogorov_q(std::sqrt(static_cast<double>(paths)) * stat) > 0.005);

    // center of mass is Brownian with per-coordinate variance t / N
    const double v = variance(com_x);
    CHECK(std::fabs(v - t / 4.0) < 0.05 * (t / 4.0) * 3.0);
}

TEST_CASE("exact squared Bessel transition sampling") {
    CounterRng rng(808, 0, 0);
    CHECK(ks::dynamics::sample_besq_transition(2.0, 0.7, 0.0, rng) == 0.7);
    CHECK_THROWS_AS(ks::dynamics::sample_besq_transition(0.0, 1.0, 1.0, rng), DomainError);
    CHECK_THROWS_AS(ks::dynamics::sample_besq_transition(2.0, -1.0, 1.0, rng), DomainError);

    {
        // delta = 2 from zero: mean delta t = 2
        const int n = 100000;
        std::vector<double> xs(n);
        for (auto& x : xs) x = ks::dynamics::sample_besq_transition(2.0, 0.0, 1.0, rng);
        const double se = std::sqrt(variance(xs) / n);
        CHECK(std::fabs(mean(xs) - 2.0) < 3.0 * se);
    }
    {
        // delta = 3 from 1: mean z0 + delta t = 4, and the whole law matches
        // a fine-step Euler oracle
        const int n = 30000;
        std::vector<double> xs(n);
        for (auto& x : xs) x = ks::dynamics::sample_besq_transition(3.0, 1.0, 1.0, rng);
        const double se = std::sqrt(variance(xs) / n);
        CHECK(std::fabs(mean(xs) - 4.0) < 3.0 * se);

        CounterRng erng(809, 0, 0);
        const int m = 8000;
        const double dt = 2e-4;
        std::vector<double> euler(m);
        for (auto& e : euler) {
            double z = 1.0;
            for (int k = 0; k < 5000; ++k)
                z += 2.0 * std::sqrt(std::max(z, 0.0) * dt) * erng.normal() + 3.0 * dt;
            e = z;
        }
        std::sort(xs.begin(), xs.end());
        std::sort(euler.begin(), euler.end());
        // two-sample KS statistic
        double stat = 0.0;
        std::size_t i = 0, j = 0;
        while (i < xs.size() && j < euler.size()) {
            if (xs[i] <= euler[j]) ++i;
            else ++j;
            stat = std::max(stat, std::fabs(static_cast<double>(i) / xs.size() -
                                            static_cast<double>(j) / euler.size()));
        }
        const double ne = static_cast<double>(xs.size()) * euler.size() /
                          (xs.size() + euler.size());
        CHECK(ks::kolmogorov_q(std::sqrt(ne) * stat) > 0.005);
    }
}

TEST_CASE("squared Bessel paths: absorption and positivity by regime") {
    {
        CounterRng rng(11, 0, 0);
        const auto path = ks::dynamics::simulate_besq_path(0.0, 0.0, 0.01, 1.0, rng);
        REQUIRE(path.absorbed_at.has_value());
        CHECK(*path.absorbed_at == 0.0);
    }
    {
        // negative dimension from 1: essentially every path absorbed by t = 10
        int absorbed = 0;
        for (int p = 0; p < 1000; ++p) {
            CounterRng rng(905, static_cast<std::uint64_t>(p), 0);
            const auto path = ks::dynamics::simulate_besq_path(-1.0, 1.0, 1e-3, 10.0, rng);
            absorbed += path.absorbed_at.has_value();
            if (path.absorbed_at) CHECK(path.values.back() == 0.0);
        }
        CHECK(absorbed >= 990);
    }
    {
        // dimension 2 from 1: never reaches zero
        int touched = 0;
        for (int p = 0; p < 1000; ++p) {
            CounterRng rng(901, static_cast<std::uint64_t>(p), 0);
            const auto path = ks::dynamics::simulate_besq_path(2.0, 1.0, 1e-2, 5.0, rng);
            CHECK_FALSE(path.absorbed_at.has_value());
            for (const double v : path.values) touched += v <= 0.0;
        }
        CHECK(touched == 0);
    }
    {
        // the grid marginal at t matches the exact transition law
        CounterRng rng(902, 0, 0);
        const int n = 4000;
        std::vector<double> xs(n);
        for (auto& x : xs) {
            const auto path = ks::dynamics::simulate_besq_path(1.5, 0.5, 0.25, 1.0, rng);
            x = path.values.back();
        }
        const double stat = ks_stat(xs, [&](double z) {
            return ks::besq_transition_cdf(1.5, 0.5, 1.0, z);
        });
        CHECK(ks::kolmogorov_q(std::sqrt(static_cast<double>(n)) * stat) > 0.005);
    }
}

TEST_CASE("comparison process: fixed point at zero and positivity under inward drift") {
    {
        CounterRng rng(1000, 0, 0);
        const auto out = ks::dynamics::simulate_comparison_sde(0.0, 0.0, 0.01, 0.0, 0.5, 1e-3,
                                                               0.5, rng);
        REQUIRE(out.tau_zero.has_value());
        CHECK(*out.tau_zero == 0.0);
        CHECK_FALSE(out.tau_level.has_value());
        for (const double v : out.path.values) CHECK(v == 0.0);
    }
    {
        // delta + a sqrt(b) > 0 keeps paths from going below the clamp
        int below = 0;
        for (int p = 0; p < 200; ++p) {
            CounterRng rng(1001, static_cast<std::uint64_t>(p), 0);
            const auto out = ks::dynamics::simulate_comparison_sde(0.5, 1.0, 0.01, 0.1, 2.0,
                                                                   1e-3, 1.0, rng);
            for (const double v : out.path.values) below += v < 0.0;
        }
        CHECK(below == 0);
    }
}

TEST_CASE("sphere process stays on the constraint manifold") {
    const auto model = ModelParams::from_decimal(3, "1");
    const Configuration u0{{-std::sqrt(0.5), 0.0}, {std::sqrt(0.5), 0.0}, {0.0, 0.0}};
    REQUIRE(ks::geometry::sphere_constraint_violation(u0) <= 1e-12);
    SimulationParams sim;
    sim.dt_base = 1e-4;
    sim.t_max = 0.2;
    sim.seed = 7;
    sim.save_stride = 50;
    const Trajectory tr = ks::dynamics::simulate_sphere(model, u0, sim);
    REQUIRE(tr.frames.size() > 10);
    for (const auto& f : tr.frames)
        CHECK(ks::geometry::sphere_constraint_violation(f) < 1e-9);
}

TEST_CASE("two-particle sphere dispersion is pinned at one") {
    const auto model = ModelParams::from_decimal(2, "1");
    const Configuration u0{{-std::sqrt(0.5), 0.0}, {std::sqrt(0.5), 0.0}};
    SimulationParams sim;
    sim.dt_base = 1e-4;
    sim.t_max = 0.05;
    sim.seed = 8;
    sim.save_stride = 20;
    const Trajectory tr = ks::dynamics::simulate_sphere(model, u0, sim);
    for (const auto& f : tr.frames)
        CHECK(ks::geometry::dispersion(f, {0, 1}) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("equilateral sphere configuration has vanishing pair-dispersion drift") {
    // one Euler step of size h from the equilateral direction; the conditional
    // mean of R_K moves by o(h) because the generator drift vanishes there
    const auto model = ModelParams::from_decimal(3, "1.5");
    const double r = 1.0 / std::sqrt(3.0);
    Configuration u0;
    for (int i = 0; i < 3; ++i) {
        const double ang = 2.0 * M_PI * i / 3.0;
        u0.push_back({r * std::cos(ang), r * std::sin(ang)});
    }
    REQUIRE(ks::geometry::sphere_constraint_violation(u0) <= 1e-12);
    const double rk0 = ks::geometry::dispersion(u0, {0, 1});

    const double h = 1e-4;
    const int samples = 100000;
    std::vector<double> moved(samples);
    for (int s = 0; s < samples; ++s) {
        SimulationParams sim;
        sim.dt_base = h;
        sim.t_max = h;
        sim.seed = 4242;
        sim.path_index = static_cast<std::uint64_t>(s);
        const Trajectory tr = ks::dynamics::simulate_sphere(model, u0, sim);
        moved[static_cast<std::size_t>(s)] =
            (ks::geometry::dispersion(tr.frames.back(), {0, 1}) - rk0) / h;
    }
    const double se = std::sqrt(variance(moved) / samples);
    CHECK(std::fabs(mean(moved)) < 3.0 * se);
}

TEST_CASE("time change of a constant path is exact on dyadic grids") {
    ks::dynamics::ScalarPath d;
    for (int k = 0; k <= 8; ++k) {
        d.times.push_back(0.25 * k);
        d.values.push_back(2.0);
    }
    const auto tc = ks::dynamics::time_change(d);
    for (int k = 0; k <= 8; ++k) {
        CHECK(tc.a_path.values[static_cast<std::size_t>(k)] == 0.125 * k);
        CHECK(tc.rho(0.125 * k) == 0.25 * k);
    }
}

TEST_CASE("time change integrates an exponential and inverts itself") {
    ks::dynamics::ScalarPath d;
    const int n = 10000;
    for (int k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) / n;
        d.times.push_back(t);
        d.values.push_back(std::exp(t));
    }
    const auto tc = ks::dynamics::time_change(d);
    CHECK(std::fabs(tc.a_path.values.back() - (1.0 - std::exp(-1.0))) < 1e-6);
    for (int k = 0; k <= n; k += 97)
        CHECK(std::fabs(tc.rho(tc.a_path.values[static_cast<std::size_t>(k)]) -
                        d.times[static_cast<std::size_t>(k)]) < 2.0e-4);

    d.values[5] = -1.0;
    CHECK_THROWS_AS(ks::dynamics::time_change(d), DomainError);
}

TEST_CASE("time change skips the trailing absorbed sample") {
    ks::dynamics::ScalarPath d;
    d.times = {0.0, 0.5, 1.0, 1.5};
    d.values = {1.0, 0.5, 0.25, 0.0};
    d.absorbed_at = 1.5;
    const auto tc = ks::dynamics::time_change(d);
    CHECK(tc.a_path.times.size() == 3);
    CHECK(tc.a_path.values.back() ==
          doctest::Approx(0.5 * 0.5 * (1.0 + 2.0) + 0.5 * 0.5 * (2.0 + 4.0)).epsilon(1e-12));
}

TEST_CASE("trajectory CSV and sidecar round trip") {
    const auto model = ModelParams::from_decimal(2, "0.5");
    SimulationParams sim;
    sim.dt_base = 1e-3;
    sim.t_max = 0.05;
    sim.seed = 12;
    sim.save_stride = 5;
    const Configuration x0{{0.0, 0.0}, {1.0, 1.0}};
    const Trajectory tr = ks::dynamics::simulate_particles(model, sim, x0);

    const std::string csv = ks::dynamics::trajectory_to_csv(tr);
    const Trajectory back = ks::dynamics::trajectory_from_csv(csv);
    REQUIRE(back.frames.size() == tr.frames.size());
    for (std::size_t f = 0; f < tr.frames.size(); ++f) {
        CHECK(back.times[f] == tr.times[f]);
        for (std::size_t i = 0; i < tr.frames[f].size(); ++i) {
            CHECK(back.frames[f][i].x == tr.frames[f][i].x);
            CHECK(back.frames[f][i].y == tr.frames[f][i].y);
        }
    }

    const std::string side = ks::dynamics::trajectory_sidecar_json(tr, sim);
    CHECK(side.find("\"status\": \"completed\"") != std::string::npos);
    CHECK(side.find("\"theta\": \"0.5\"") != std::string::npos);
}

TEST_CASE("scalar path CSV round trip with absorption marker") {
    ks::dynamics::ScalarPath p;
    p.times = {0.0, 0.1, 0.2};
    p.values = {1.0, 0.5, 0.0};
    p.absorbed_at = 0.2;
    const std::string csv = ks::dynamics::scalar_path_to_csv(p);
    const auto back = ks::dynamics::scalar_path_from_csv(csv);
    REQUIRE(back.absorbed_at.has_value());
    CHECK(*back.absorbed_at == 0.2);
    REQUIRE(back.times.size() == 3);
    CHECK(back.values[1] == 0.5);
}

TEST_CASE("simulation parameter validation") {
    SimulationParams sim;
    sim.dt_base = 0.0;
    CHECK_THROWS_AS(ks::dynamics::validate(sim), DomainError);
    sim = {};
    sim.adapt_floor = 1.0;
    sim.dt_base = 0.5;
    CHECK_THROWS_AS(ks::dynamics::validate(sim), DomainError);
    sim = {};
    CHECK(ks::dynamics::resolved_adapt_floor(sim) ==
          doctest::Approx(4.0 * sim.dt_base / (10000.0 * 10000.0)).epsilon(1e-12));
    CHECK(ks::dynamics::resolved_floor_patience(sim) == 80000); // ceil(8 / 1e-4)
    sim.floor_patience = 123;
    CHECK(ks::dynamics::resolved_floor_patience(sim) == 123);

    const auto model = ModelParams::from_decimal(2, "1");
    CHECK_THROWS_AS(
        ks::dynamics::simulate_particles(model, SimulationParams{},
                                         Configuration{{1.0, 0.0}, {1.0, 0.0}}),
        DomainError);
}
