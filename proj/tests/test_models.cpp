#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hazfit/models.hpp"
#include "hazfit/rng.hpp"
#include "oracle_quadrature.hpp"
#include "sampling.hpp"

using namespace hazfit;

TEST_CASE("model names round-trip") {
    for (Model m : kAllModels) CHECK(model_from_name(name(m)) == m);
    CHECK_THROWS_WITH(model_from_name("gompert"),
                      Catch::Matchers::ContainsSubstring("valid names"));
}

TEST_CASE("parameter transforms round-trip") {
    Stream rng(1234);
    for (Model m : kAllModels) {
        for (int rep = 0; rep < 20; ++rep) {
            auto nat = sampling::random_natural(m, rng);
            auto opt = from_natural(m, nat);
            auto nat2 = to_natural(m, opt);
            REQUIRE(nat2.size() == nat.size());
            for (std::size_t i = 0; i < nat.size(); ++i)
                CHECK(nat2[i] == Catch::Approx(nat[i]).epsilon(1e-12));
        }
    }
    // positivity is enforced on the log-transformed coordinates
    CHECK_THROWS_AS(from_natural(Model::gompertz, std::vector<double>{-1.0, 0.1}),
                    std::domain_error);
    CHECK(in_domain(Model::lynchbrown,
                    std::vector<double>{-0.5, 0.1, 0.1, 5.0}));
    CHECK_FALSE(in_domain(Model::kannisto, std::vector<double>{0.0, 0.1}));
}

TEST_CASE("closed-form cumulative hazards match an independent quadrature") {
    Stream rng(20240817);
    for (Model m : kAllModels) {
        for (int rep = 0; rep < 60; ++rep) {
            const auto nat = sampling::random_natural(m, rng);
            const int z = sampling::random_age_index(rng);
            const double h = cumulative_hazard(m, nat, z);
            const double href = oracle::integrate(
                [&](double x) { return hazard(m, nat, x); },
                static_cast<double>(z), static_cast<double>(z) + 1.0);
            INFO(name(m) << " rep " << rep << " z=" << z);
            REQUIRE(std::isfinite(h));
            CHECK(h == Catch::Approx(href).epsilon(1e-9));
        }
    }
}

TEST_CASE("death probability lies in [0, 1]") {
    Stream rng(5);
    for (Model m : kAllModels) {
        for (int rep = 0; rep < 40; ++rep) {
            const auto nat = sampling::random_natural(m, rng);
            const int z = sampling::random_age_index(rng);
            const double q = death_prob(m, nat, z);
            REQUIRE(std::isfinite(q));
            CHECK(q >= 0.0);
            CHECK(q <= 1.0);
        }
    }
}

TEST_CASE("nesting limits are continuous") {
    const double a = 0.05, b = 0.11;
    for (int z = 1; z <= 25; ++z) {
        const double hg =
            cumulative_hazard(Model::gompertz, std::vector<double>{a, b}, z);

        // Makeham with gamma -> 0
        const double hm = cumulative_hazard(
            Model::makeham, std::vector<double>{a, b, 1e-14}, z);
        CHECK(hm == Catch::Approx(hg).epsilon(1e-10));

        // Beard with delta -> 0
        const double hb = cumulative_hazard(
            Model::beard, std::vector<double>{a, b, 1e-12}, z);
        CHECK(hb == Catch::Approx(hg).epsilon(1e-8));

        // log-quadratic with gamma = 0 equals Gompertz(e^alpha, beta)
        const double hq = cumulative_hazard(
            Model::logquad, std::vector<double>{std::log(a), b, 0.0}, z);
        CHECK(hq == Catch::Approx(hg).epsilon(1e-9));

        // Kannisto with small alpha behaves like Gompertz
        const double hk = cumulative_hazard(
            Model::kannisto, std::vector<double>{1e-9, b}, z);
        const double hg2 = cumulative_hazard(
            Model::gompertz, std::vector<double>{1e-9, b}, z);
        CHECK(hk == Catch::Approx(hg2).epsilon(1e-6));
    }
}

TEST_CASE("log-quadratic branches agree at the switch point") {
    // just either side of gamma = -1e-8, erf form vs direct integration
    for (int z : {1, 10, 25}) {
        const double below = cumulative_hazard(
            Model::logquad, std::vector<double>{-4.0, 0.1, -1.001e-8}, z);
        const double above = cumulative_hazard(
            Model::logquad, std::vector<double>{-4.0, 0.1, -0.999e-8}, z);
        CHECK(below == Catch::Approx(above).epsilon(1e-7));
    }
}

TEST_CASE("logistic hazard plateaus at gamma + alpha / delta") {
    const std::vector<double> p = {0.04, 0.1, 0.01, 0.5};
    const double h = hazard(Model::logistic, p, 1e6);
    CHECK(h == Catch::Approx(p[2] + p[0] / p[3]).epsilon(1e-9));
    // Kannisto plateaus at 1
    CHECK(hazard(Model::kannisto, std::vector<double>{0.01, 0.1}, 1e6) ==
          Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gompertz small-slope series matches the exact form") {
    const double a = 0.05;
    for (int z : {1, 10, 25}) {
        const double series = cumulative_hazard(
            Model::gompertz, std::vector<double>{a, 1e-9}, z);
        const double href = oracle::integrate(
            [&](double x) { return a * std::exp(1e-9 * x); },
            static_cast<double>(z), z + 1.0);
        CHECK(series == Catch::Approx(href).epsilon(1e-12));
    }
}

TEST_CASE("survival curve is decreasing from 1") {
    const std::vector<double> p = {0.05, 0.11};
    auto s = survival_curve(Model::gompertz, p, 1, 25);
    REQUIRE(s.size() == 26);
    CHECK(s[0] == 1.0);
    for (std::size_t i = 1; i < s.size(); ++i) {
        CHECK(s[i] < s[i - 1]);
        CHECK(s[i] > 0.0);
    }
}

TEST_CASE("heuristic starts are finite and in-domain") {
    // simulated-looking data via the hazard itself
    CohortDataset d;
    d.rows.reserve(25);
    long long n = 100000;
    for (int age = 80; age <= 104; ++age) {
        const double q =
            death_prob(Model::gompertz, std::vector<double>{0.05, 0.11},
                       age - 79);
        CohortRow r;
        r.age = age;
        r.survivors = n;
        r.deaths = static_cast<long long>(q * static_cast<double>(n));
        d.rows.push_back(r);
        n -= r.deaths;
    }
    for (Model m : kAllModels) {
        auto theta = heuristic_start(m, d);
        REQUIRE(static_cast<int>(theta.size()) == param_count(m));
        for (double t : theta) CHECK(std::isfinite(t));
        auto nat = to_natural(m, theta);
        CHECK(in_domain(m, nat));
    }
    // degenerate data falls back to the documented defaults
    CohortDataset flat;
    flat.rows = {{80, 10, 0}, {81, 10, 0}, {82, 10, 0}, {83, 10, 0}};
    for (Model m : kAllModels) {
        auto theta = heuristic_start(m, flat);
        CHECK(theta == default_start(m));
    }
}

TEST_CASE("random starts are deterministic and bounded") {
    const auto center = default_start(Model::beard);
    auto s1 = random_starts(Model::beard, center, 10, 42);
    auto s2 = random_starts(Model::beard, center, 10, 42);
    REQUIRE(s1.size() == 10);
    CHECK(s1 == s2);
    for (const auto& s : s1)
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double w = std::max(1.0, std::abs(center[i]));
            CHECK(std::abs(s[i] - center[i]) <= w);
        }
    auto s3 = random_starts(Model::beard, center, 10, 43);
    CHECK(s1 != s3);
}
