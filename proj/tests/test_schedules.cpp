#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "adamlab/schedules.hpp"
#include "adamlab/stability.hpp"

using namespace adamlab;

TEST_CASE("constant") {
    const Schedule s = constant_schedule(3e-4);
    CHECK(eta_at(s, 0) == 3e-4);
    CHECK(eta_at(s, 100000) == 3e-4);
    CHECK_THROWS_AS(constant_schedule(0.0), std::invalid_argument);
}

TEST_CASE("anneal_c") {
    const Schedule s = anneal_c_schedule(1e-3, -0.02);
    CHECK(eta_at(s, 0) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(eta_at(s, 100) == doctest::Approx(1e-3 * std::exp(-1.0)).epsilon(1e-13));
}

TEST_CASE("warmup_cosine") {
    const Schedule s = warmup_cosine_schedule(1e-3, 100, 3000, 1e-4);
    CHECK(eta_at(s, 100) == doctest::Approx(1e-3).epsilon(1e-15)); // end of warmup
    CHECK(eta_at(s, 3000) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(eta_at(s, 5000) == doctest::Approx(1e-4).epsilon(1e-15));
    // positive over the whole horizon
    for (long n = 0; n <= 3000; ++n) CHECK(eta_at(s, n) > 0.0);
    // monotone through the warmup, monotone down through the decay
    for (long n = 1; n <= 100; ++n) CHECK(eta_at(s, n) >= eta_at(s, n - 1));
    for (long n = 101; n <= 3000; ++n) CHECK(eta_at(s, n) <= eta_at(s, n - 1));

    // floor defaults to eta0/10
    const Schedule d = warmup_cosine_schedule(2e-3, 10, 100);
    CHECK(eta_at(d, 100) == doctest::Approx(2e-4).epsilon(1e-15));

    CHECK_THROWS_AS(warmup_cosine_schedule(1e-3, 100, 100), std::invalid_argument);
}

TEST_CASE("anneal_c compensates the BMinus growth in the displacement bound") {
    // eta_n * bound(n) should stay pinned near its n = 0 value: the
    // exponential factors cancel by construction.
    const AdaptiveHyper h{0.9555, level_curve_gamma(0.9555, -0.03)};
    REQUIRE(stability_coefficient(h) == doctest::Approx(-0.03).epsilon(1e-10));
    const Schedule s = anneal_c_schedule(1e-3, stability_coefficient(h));
    const double at0 = eta_at(s, 0) * max_update_bound(h, 0);
    for (long n = 0; n <= 2000; ++n) {
        const double displacement = eta_at(s, n) * max_update_bound(h, n);
        CHECK(displacement <= at0 * 1.01);
        CHECK(displacement > 0.0);
    }
}
