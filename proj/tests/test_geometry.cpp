#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "core/geometry.hpp"
#include "core/regime.hpp"

using ks::DomainError;
using ks::IoError;
using ks::NumericError;
using ks::Vec2;
using ks::geometry::Configuration;
using ks::geometry::IndexSet;
using ks::regime::ModelParams;

namespace {

Configuration random_config(std::mt19937_64& gen, int n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Configuration x;
    for (int i = 0; i < n; ++i) x.push_back({g(gen), g(gen)});
    return x;
}

IndexSet all_indices(int n) {
    IndexSet k(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) k[static_cast<std::size_t>(i)] = i;
    return k;
}

} // namespace

TEST_CASE("center of two particles and of coincident configurations") {
    const Configuration x{{0.0, 0.0}, {2.0, 0.0}};
    const Vec2 z = ks::geometry::center(x, {0, 1});
    CHECK(z.x == 1.0);
    CHECK(z.y == 0.0);

    const Configuration same{{0.3, -0.7}, {0.3, -0.7}, {0.3, -0.7}};
    for (const IndexSet& k : {IndexSet{0}, IndexSet{1, 2}, IndexSet{0, 1, 2}}) {
        const Vec2 p = ks::geometry::center(same, k);
        CHECK(p.x == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(p.y == doctest::Approx(-0.7).epsilon(1e-15));
    }

    CHECK_THROWS_AS((void)ks::geometry::center(x, {}), DomainError);
    CHECK_THROWS_AS((void)ks::geometry::center(x, {0, 0}), DomainError);
    CHECK_THROWS_AS((void)ks::geometry::center(x, {2}), DomainError);
    CHECK_THROWS_AS((void)ks::geometry::center(x, {-1}), DomainError);
}

TEST_CASE("dispersion of the two-particle example and coincident sets") {
    const Configuration x{{0.0, 0.0}, {2.0, 0.0}};
    CHECK(ks::geometry::dispersion(x, {0, 1}) == 2.0);
    CHECK(ks::geometry::dispersion_pairwise(x, {0, 1}) == 2.0);

    const Configuration same{{1.0, 1.0}, {1.0, 1.0}, {5.0, 0.0}};
    CHECK(ks::geometry::dispersion(same, {0, 1}) == 0.0);
}

TEST_CASE("centered and pairwise dispersion agree on random configurations") {
    std::mt19937_64 gen(420001);
    std::uniform_int_distribution<int> nd(2, 12);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = nd(gen);
        const Configuration x = random_config(gen, n, trial % 3 == 0 ? 1e4 : 1.0);
        std::uniform_int_distribution<int> kd(1, n);
        IndexSet k = all_indices(n);
        std::shuffle(k.begin(), k.end(), gen);
        k.resize(static_cast<std::size_t>(kd(gen)));
        const double a = ks::geometry::dispersion(x, k);
        const double b = ks::geometry::dispersion_pairwise(x, k);
        CHECK(std::fabs(a - b) <= 1e-10 * std::max(1.0, std::fabs(a)));
    }
}

TEST_CASE("dispersion is translation invariant, center equivariant") {
    std::mt19937_64 gen(420002);
    for (int trial = 0; trial < 100; ++trial) {
        const Configuration x = random_config(gen, 6);
        const Vec2 shift{3.25, -1.5};
        Configuration y = x;
        for (auto& p : y) p += shift;
        const IndexSet k{0, 2, 5};
        CHECK(ks::geometry::dispersion(y, k) ==
              doctest::Approx(ks::geometry::dispersion(x, k)).epsilon(1e-12));
        const Vec2 cx = ks::geometry::center(x, k);
        const Vec2 cy = ks::geometry::center(y, k);
        CHECK(cy.x == doctest::Approx(cx.x + shift.x).epsilon(1e-14));
        CHECK(cy.y == doctest::Approx(cx.y + shift.y).epsilon(1e-14));
    }
}

TEST_CASE("attraction drift on the two-particle example") {
    const ModelParams m = ModelParams::from_decimal(2, "2");
    const Configuration x{{0.0, 0.0}, {1.0, 0.0}};
    const auto b = ks::geometry::drift(m, x);
    REQUIRE(b.size() == 2);
    CHECK(b[0].x == 1.0);
    CHECK(b[0].y == 0.0);
    CHECK(b[1].x == -1.0);
    CHECK(b[1].y == 0.0);
}

TEST_CASE("drift forces cancel exactly and two-body forces are opposite") {
    std::mt19937_64 gen(420003);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 7;
        const ModelParams m = ModelParams::from_decimal(n, "0.75");
        const Configuration x = random_config(gen, n);
        const auto b = ks::geometry::drift(m, x);
        Vec2 total;
        double mag = 0.0;
        for (const auto& f : b) {
            total += f;
            mag += ks::norm(f);
        }
        // each pull enters once with each sign; only final-sum rounding survives
        CHECK(std::fabs(total.x) <= 1e-13 * std::max(1.0, mag));
        CHECK(std::fabs(total.y) <= 1e-13 * std::max(1.0, mag));
        if (n == 2) {
            // a single pair cancels exactly
            CHECK(total.x == 0.0);
            CHECK(total.y == 0.0);
            CHECK(b[0].x == -b[1].x);
            CHECK(b[0].y == -b[1].y);
        }
    }
}

TEST_CASE("drift scale covariance b(lambda x) = b(x)/lambda") {
    std::mt19937_64 gen(420004);
    const ModelParams m = ModelParams::from_decimal(5, "1.3");
    for (const double lambda : {0.125, 2.0, 37.5}) {
        const Configuration x = random_config(gen, 5);
        Configuration y = x;
        for (auto& p : y) p *= lambda;
        const auto bx = ks::geometry::drift(m, x);
        const auto by = ks::geometry::drift(m, y);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(by[i].x == doctest::Approx(bx[i].x / lambda).epsilon(1e-12));
            CHECK(by[i].y == doctest::Approx(bx[i].y / lambda).epsilon(1e-12));
        }
    }
}

TEST_CASE("drift rejects coincident pairs and mismatched sizes") {
    const ModelParams m = ModelParams::from_decimal(2, "1");
    CHECK_THROWS_AS((void)ks::geometry::drift(m, Configuration{{1.0, 1.0}, {1.0, 1.0}}),
                    NumericError);
    CHECK_THROWS_AS((void)ks::geometry::drift(m, Configuration{{0, 0}, {1, 0}, {2, 0}}),
                    DomainError);
}

TEST_CASE("regularized drift matches exact drift above the cutoff") {
    const ModelParams m = ModelParams::from_decimal(2, "2");
    const Configuration x{{0.0, 0.0}, {1.0, 0.0}};
    const auto b = ks::geometry::regularized_drift(m, x, 10);
    CHECK(b[0].x == 1.0);
    CHECK(b[0].y == 0.0);

    // identical arithmetic once every pair clears the cutoff
    std::mt19937_64 gen(420005);
    const ModelParams m6 = ModelParams::from_decimal(6, "1.1");
    const Configuration y = random_config(gen, 6);
    const auto exact = ks::geometry::drift(m6, y);
    const auto reg = ks::geometry::regularized_drift(m6, y, 1000000000);
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(reg[i].x == exact[i].x);
        CHECK(reg[i].y == exact[i].y);
    }
}

TEST_CASE("regularized drift zeroes pairs below the cutoff") {
    const ModelParams m = ModelParams::from_decimal(2, "2");
    const Configuration x{{0.0, 0.0}, {0.4, 0.0}}; // squared distance 0.16 < 1/4
    const auto b = ks::geometry::regularized_drift(m, x, 4);
    CHECK(b[0].x == 0.0);
    CHECK(b[0].y == 0.0);
    CHECK(b[1].x == 0.0);
    CHECK(b[1].y == 0.0);

    // a coincident pair contributes nothing; other interactions persist
    const ModelParams m3 = ModelParams::from_decimal(3, "1");
    const Configuration y{{0.0, 0.0}, {0.0, 0.0}, {2.0, 0.0}};
    const auto b3 = ks::geometry::regularized_drift(m3, y, 100);
    CHECK(b3[0].x == b3[1].x); // both coincident particles feel only particle 3
    CHECK(b3[0].x == doctest::Approx((1.0 / 3.0) * (2.0 / 4.0)).epsilon(1e-14));
    CHECK_THROWS_AS((void)ks::geometry::regularized_drift(m3, y, 0), DomainError);
}

TEST_CASE("sphere coordinates of the two-particle example") {
    const Configuration x{{0.0, 0.0}, {2.0, 0.0}};
    const auto c = ks::geometry::sphere_coords(x);
    CHECK(c.center.x == 1.0);
    CHECK(c.center.y == 0.0);
    CHECK(c.dispersion == 2.0);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(c.direction[0].x == doctest::Approx(-inv_sqrt2).epsilon(1e-15));
    CHECK(c.direction[1].x == doctest::Approx(inv_sqrt2).epsilon(1e-15));
    CHECK(c.direction[0].y == 0.0);
    CHECK(ks::geometry::sphere_constraint_violation(c.direction) <= 1e-12);

    const auto back = ks::geometry::assemble(c);
    CHECK(back[0].x == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(back[1].x == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("sphere coordinate round trips on random configurations") {
    std::mt19937_64 gen(420006);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 9;
        const Configuration x = random_config(gen, n);
        const auto c = ks::geometry::sphere_coords(x);
        CHECK(ks::geometry::sphere_constraint_violation(c.direction) <= 1e-12);
        const auto back = ks::geometry::assemble(c);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::fabs(back[i].x - x[i].x) <= 1e-12 * std::max(1.0, std::fabs(x[i].x)));
            CHECK(std::fabs(back[i].y - x[i].y) <= 1e-12 * std::max(1.0, std::fabs(x[i].y)));
        }
        // and the reverse composition
        const auto c2 = ks::geometry::sphere_coords(ks::geometry::assemble(c));
        CHECK(std::fabs(c2.dispersion - c.dispersion) <= 1e-12 * c.dispersion);
        CHECK(std::fabs(c2.center.x - c.center.x) <= 1e-12);
        CHECK(std::fabs(c2.center.y - c.center.y) <= 1e-12);
        for (std::size_t i = 0; i < c.direction.size(); ++i) {
            CHECK(std::fabs(c2.direction[i].x - c.direction[i].x) <= 1e-12);
            CHECK(std::fabs(c2.direction[i].y - c.direction[i].y) <= 1e-12);
        }
    }
}

TEST_CASE("assemble with unit dispersion and centered origin returns the direction") {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    ks::geometry::SphereCoordinates c;
    c.center = {0.0, 0.0};
    c.dispersion = 1.0;
    c.direction = {{-inv_sqrt2, 0.0}, {inv_sqrt2, 0.0}};
    const auto x = ks::geometry::assemble(c);
    CHECK(x[0].x == -inv_sqrt2);
    CHECK(x[1].x == inv_sqrt2);

    c.dispersion = -1.0;
    CHECK_THROWS_AS((void)ks::geometry::assemble(c), DomainError);
    c.dispersion = 1.0;
    c.direction = {{1.0, 0.0}, {0.5, 0.0}}; // violates both sphere constraints
    CHECK_THROWS_AS((void)ks::geometry::assemble(c), DomainError);
}

TEST_CASE("sphere coordinates reject degenerate configurations") {
    const Configuration same{{1.0, 2.0}, {1.0, 2.0}};
    CHECK_THROWS_AS((void)ks::geometry::sphere_coords(same), DomainError);
}

TEST_CASE("direction vectors have zero mean and unit dispersion") {
    std::mt19937_64 gen(420007);
    for (int trial = 0; trial < 100; ++trial) {
        const Configuration x = random_config(gen, 4 + trial % 5);
        const auto u = ks::geometry::sphere_coords(x).direction;
        const Vec2 s = ks::geometry::center(u);
        CHECK(std::fabs(s.x) <= 1e-13);
        CHECK(std::fabs(s.y) <= 1e-13);
        CHECK(ks::geometry::dispersion(u, all_indices(static_cast<int>(u.size()))) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("separation constant recurrence") {
    const auto c = ks::geometry::campingcar_constants(3);
    REQUIRE(c.size() == 4);
    CHECK(c[0] == 1.0);
    CHECK(c[1] == 2.0);
    CHECK(c[2] == 20.0);
    CHECK(c[3] == 360.0);
    CHECK_THROWS_AS((void)ks::geometry::campingcar_constants(-1), DomainError);
}

TEST_CASE("separation constants force cross pairs apart") {
    // random search for a counterexample to: R_K <= 2 c_l eps and
    // min_j R_{K u j} >= c_{l+1} eps imply every cross pair >= c_l eps
    std::mt19937_64 gen(420008);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto c = ks::geometry::campingcar_constants(12);
    int premise_hits = 0;
    for (int trial = 0; trial < 40000; ++trial) {
        const int n = 3 + static_cast<int>(gen() % 5);   // 3..7
        const int l = 2 + static_cast<int>(gen() % 3);   // cluster size 2..4
        if (l >= n) continue;
        const double eps = std::pow(10.0, -3.0 * unif(gen));
        const std::size_t lu = static_cast<std::size_t>(l);

        Configuration x;
        // tight cluster near the origin, then outside particles at a range of
        // distances chosen to land on both sides of the premise boundary
        const double cluster_scale = std::sqrt(2.0 * c[lu] * eps) * unif(gen);
        std::normal_distribution<double> g(0.0, 1.0);
        for (int i = 0; i < l; ++i) x.push_back({cluster_scale * g(gen), cluster_scale * g(gen)});
        const double far_scale = std::sqrt(c[lu + 1] * eps);
        for (int i = l; i < n; ++i) {
            const double rad = far_scale * (0.2 + 2.5 * unif(gen));
            const double ang = 2.0 * M_PI * unif(gen);
            x.push_back({rad * std::cos(ang), rad * std::sin(ang)});
        }

        const IndexSet k = all_indices(l);
        if (ks::geometry::dispersion(x, k) > 2.0 * c[lu] * eps) continue;
        double min_aug = std::numeric_limits<double>::infinity();
        for (int j = l; j < n; ++j) {
            IndexSet kj = k;
            kj.push_back(j);
            min_aug = std::min(min_aug, ks::geometry::dispersion(x, kj));
        }
        if (min_aug < c[lu + 1] * eps) continue;

        ++premise_hits;
        for (int i = 0; i < l; ++i)
            for (int j = l; j < n; ++j)
                CHECK(ks::norm2(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]) >=
                      c[lu] * eps);
    }
    CHECK(premise_hits >= 500); // the search has to actually exercise the premise
}

TEST_CASE("separation predicate on the two-particle examples") {
    const Configuration x{{0.0, 0.0}, {2.0, 0.0}};
    CHECK(ks::geometry::is_separated(x, {0}, 0.3));
    CHECK_FALSE(ks::geometry::is_separated(x, {0}, 1.0)); // norm 2 >= 1/eps

    const Configuration y{{0.5, 0.5}, {0.5, 0.5}, {3.0, 0.0}};
    for (const double eps : {1e-6, 1e-3, 0.1})
        CHECK_FALSE(ks::geometry::is_separated(y, {0}, eps)); // coincident cross pair

    CHECK_THROWS_AS((void)ks::geometry::is_separated(x, {0, 1}, 0.3), DomainError);
    CHECK_THROWS_AS((void)ks::geometry::is_separated(x, {}, 0.3), DomainError);
    CHECK_THROWS_AS((void)ks::geometry::is_separated(x, {0}, 0.0), DomainError);
}

TEST_CASE("interaction log density at the pinned values") {
    const ModelParams m2 = ModelParams::from_decimal(2, "2");
    const double e = std::exp(1.0);
    CHECK(ks::geometry::log_density_m(m2, {{0.0, 0.0}, {e, 0.0}}, 0.0) ==
          doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(ks::geometry::log_density_m(m2, {{0.7, 0.7}, {0.7, 0.7}}, 1.0) == 0.0);
    CHECK_THROWS_AS((void)ks::geometry::log_density_m(m2, {{0.7, 0.7}, {0.7, 0.7}}, 0.0),
                    NumericError);

    // all pairwise distances 1: equilateral triangle, any theta
    const ModelParams m3 = ModelParams::from_decimal(3, "1.7");
    const Configuration tri{{0.0, 0.0}, {1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}};
    CHECK(std::fabs(ks::geometry::log_density_m(m3, tri, 0.0)) <= 1e-14);
}

TEST_CASE("configuration CSV round trip is bit exact") {
    std::mt19937_64 gen(420009);
    Configuration x = random_config(gen, 7, 1.0);
    x.push_back({0.1 + 0.2, -0.0});
    x.push_back({1e-300, 12345678901234.5});
    const std::string csv = ks::geometry::config_to_csv(x);
    const Configuration y = ks::geometry::config_from_csv(csv);
    REQUIRE(y.size() == x.size());
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(Vec2)) == 0);

    const Configuration z =
        ks::geometry::config_from_csv("# comment\nparticle_index,x,y\n0,1.5,2.5\n1,-3,0.25\n");
    CHECK(z[1].x == -3.0);
    CHECK_THROWS_AS((void)ks::geometry::config_from_csv("0,1,2\n2,3,4\n"), IoError);
    CHECK_THROWS_AS((void)ks::geometry::config_from_csv("0,1\n"), IoError);
}

TEST_CASE("configuration JSON round trip is bit exact") {
    std::mt19937_64 gen(420010);
    Configuration x = random_config(gen, 5, 3.0);
    x.push_back({1.0 / 3.0, 2.0 / 7.0});
    const std::string js = ks::geometry::config_to_json(x);
    const Configuration y = ks::geometry::config_from_json(js);
    REQUIRE(y.size() == x.size());
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(Vec2)) == 0);

    CHECK_THROWS_AS((void)ks::geometry::config_from_json("{\"a\":1}"), IoError);
    CHECK_THROWS_AS((void)ks::geometry::config_from_json("[[1,2],[3]]"), IoError);
}
