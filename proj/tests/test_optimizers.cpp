#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "adamlab/optimizers.hpp"
#include "adamlab/problems.hpp"
#include "adamlab/rng.hpp"

using namespace adamlab;

namespace {

// Independent oracle: the bias-corrected moving average as a direct weighted
// sum, (1-a)/(1-a^(n+1)) * sum_j a^j x_{n-j}.
double corrected_ema_direct(const std::vector<double>& xs, double alpha) {
    const std::size_t n = xs.size() - 1;
    double sum = 0.0, w = 1.0;
    for (std::size_t j = 0; j <= n; ++j) {
        sum += w * xs[n - j];
        w *= alpha;
    }
    return (1.0 - alpha) / (1.0 - std::pow(alpha, static_cast<double>(n + 1))) * sum;
}

// Textbook Adam, straight from its defining recurrences; serves as the
// independent route for the 1-Adam equivalence check.
struct TextbookAdam {
    double beta, gamma, eta;
    Vec m, v;
    long n = 0;

    explicit TextbookAdam(int dim, double beta_, double gamma_, double eta_)
        : beta(beta_), gamma(gamma_), eta(eta_), m(dim, 0.0), v(dim, 0.0) {}

    Vec step(const Vec& theta, const Vec& g) {
        Vec out = theta;
        const double bc1 = 1.0 - std::pow(gamma, static_cast<double>(n + 1));
        const double bc2 = 1.0 - std::pow(beta, static_cast<double>(n + 1));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = gamma * m[i] + (1.0 - gamma) * g[i];
            v[i] = beta * v[i] + (1.0 - beta) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            out[i] -= eta * mhat / (std::sqrt(vhat) + 0.0);
        }
        ++n;
        return out;
    }
};

} // namespace

TEST_CASE("ema_update basics") {
    CHECK(ema_update({0.0}, {2.0}, 0.9)[0] == doctest::Approx(0.2).epsilon(1e-15));
    const Vec fixed = ema_update({1.0, 1.0}, {1.0, 1.0}, 0.5);
    CHECK(fixed[0] == 1.0);
    CHECK(fixed[1] == 1.0);
    CHECK(ema_update({4.0}, {0.0}, 0.999)[0] == doctest::Approx(3.996).epsilon(1e-15));
    CHECK_THROWS_AS(ema_update({1.0}, {1.0, 2.0}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ema_update({1.0}, {1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("bias_correction") {
    CHECK(bias_correction(0, 0.9) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(bias_correction(10000, 0.9) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(bias_correction(0, 1.0), std::invalid_argument);

    // corrected EMA of a constant stream reproduces the constant at every step
    for (double alpha : {0.999, 0.9, 0.5}) {
        double y = 0.0;
        const double c = 3.25;
        for (long n = 0; n < 1000; ++n) {
            y = alpha * y + (1.0 - alpha) * c;
            CHECK(y * bias_correction(n, alpha) == doctest::Approx(c).epsilon(1e-12));
        }
    }
}

TEST_CASE("adaptive_normalize_step") {
    SUBCASE("first step gives the sign") {
        const Vec g = {3.0, -0.2, 7.5};
        const AdaptiveHyper h{0.999, 0.9};
        const Vec m = ema_update(Vec(3, 0.0), g, h.gamma);
        Vec g2(3);
        for (int i = 0; i < 3; ++i) g2[i] = g[i] * g[i];
        const Vec v = ema_update(Vec(3, 0.0), g2, h.beta);
        const Vec u = adaptive_normalize_step(m, v, 0, h, 1e-30);
        for (int i = 0; i < 3; ++i) {
            CHECK(u[i] == doctest::Approx(g[i] > 0 ? 1.0 : -1.0).epsilon(1e-12));
        }
    }
    SUBCASE("zero numerator") {
        const Vec u = adaptive_normalize_step({0.0}, {5.0}, 3, {0.9, 0.5}, 1e-30);
        CHECK(u[0] == 0.0);
    }
    SUBCASE("constant stream stays at one, against the direct-sum oracle") {
        const AdaptiveHyper h{0.99, 0.8};
        Vec m(1, 0.0), v(1, 0.0);
        std::vector<double> xs;
        for (long n = 0; n < 50; ++n) {
            xs.push_back(1.0);
            m = ema_update(m, {1.0}, h.gamma);
            v = ema_update(v, {1.0}, h.beta);
            const Vec u = adaptive_normalize_step(m, v, n, h, 1e-30);
            CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-12));
            // cross-check the underlying corrected averages against direct summation
            const double direct_m = corrected_ema_direct(xs, h.gamma);
            CHECK(m[0] * bias_correction(n, h.gamma) ==
                  doctest::Approx(direct_m).epsilon(1e-12));
        }
    }
}

TEST_CASE("kadam_step matches textbook Adam for k = 1") {
    Problem prob = quadratic(10, 50.0);
    Rng rng(42);
    Vec theta_k = prob.initial_theta(rng);
    Vec theta_ref = theta_k;

    KAdamConfig cfg;
    cfg.k = 1;
    cfg.stages = {{0.999, 0.9}};
    cfg.eta = 1e-3;
    OptState state = make_opt_state(prob.dim, 1);
    TextbookAdam ref(prob.dim, 0.999, 0.9, 1e-3);

    for (int n = 0; n < 1000; ++n) {
        theta_k = kadam_step(theta_k, prob.grad(theta_k), state, cfg).theta;
        theta_ref = ref.step(theta_ref, prob.grad(theta_ref));
    }
    for (int i = 0; i < prob.dim; ++i) {
        const double denom = std::max(1e-300, std::abs(theta_ref[i]));
        CHECK(std::abs(theta_k[i] - theta_ref[i]) / denom <= 1e-12);
    }
}

TEST_CASE("kadam first-step sign property") {
    const Vec g0 = {0.3, -2.0, 11.0, -0.004};
    SUBCASE("k = 1") {
        double min_sq = 1e300;
        for (double g : g0) min_sq = std::min(min_sq, g * g);
        // At the default epsilon = 1e-30 the formula tolerance sits far below
        // one ulp, so double rounding needs an explicit allowance; at larger
        // epsilon the guard term dominates and the pure formula bound holds.
        const double rounding = 8.0 * std::numeric_limits<double>::epsilon();
        for (double eps : {1e-30, 1e-12, 1e-8}) {
            KAdamConfig cfg;
            cfg.stages = {{0.999, 0.9}};
            cfg.epsilon = eps;
            OptState state = make_opt_state(4, 1);
            const KAdamStep s = kadam_step(Vec(4, 1.0), g0, state, cfg);
            const double formula = 10.0 * eps / std::sqrt((1.0 - 0.999) * min_sq);
            const double tol = eps <= 1e-15 ? formula + rounding : formula;
            for (int i = 0; i < 4; ++i) {
                CHECK(std::abs(s.update[i] - (g0[i] > 0 ? 1.0 : -1.0)) <= tol);
            }
        }
    }
    SUBCASE("k = 2 applies the sign twice") {
        KAdamConfig cfg;
        cfg.k = 2;
        cfg.stages = {{0.999, 0.9}, {0.999, 0.9}};
        OptState state = make_opt_state(4, 2);
        const KAdamStep s = kadam_step(Vec(4, 1.0), g0, state, cfg);
        for (int i = 0; i < 4; ++i) {
            CHECK(s.update[i] == doctest::Approx(g0[i] > 0 ? 1.0 : -1.0).epsilon(1e-9));
        }
        CHECK(s.stage_updates.size() == 2);
    }
}

TEST_CASE("constant gradient stream is a sign fixed point") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        KAdamConfig cfg;
        cfg.stages = {{0.02 + 0.96 * rng.uniform(), 0.02 + 0.96 * rng.uniform()}};
        OptState state = make_opt_state(2, 1);
        Vec theta(2, 0.0);
        const Vec g = {0.7, -4.0}; // fed as a constant stream
        for (int n = 0; n < 200; ++n) {
            const KAdamStep s = kadam_step(theta, g, state, cfg);
            CHECK(s.update[0] == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(s.update[1] == doctest::Approx(-1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("coupled and decoupled weight decay diverge on a quadratic") {
    Problem prob = quadratic(5, 10.0);
    Rng rng(3);
    const Vec theta0 = prob.initial_theta(rng);

    KAdamConfig coupled;
    coupled.stages = {{0.999, 0.9}};
    coupled.lambda = 0.1;
    coupled.coupled = true;
    KAdamConfig decoupled = coupled;
    decoupled.coupled = false;

    OptState sc = make_opt_state(5, 1), sd = make_opt_state(5, 1);
    Vec tc = theta0, td = theta0;
    for (int n = 0; n < 50; ++n) {
        tc = kadam_step(tc, prob.grad(tc), sc, coupled).theta;
        td = kadam_step(td, prob.grad(td), sd, decoupled).theta;
    }
    double dev = 0.0;
    for (int i = 0; i < 5; ++i) dev = std::max(dev, std::abs(tc[i] - td[i]));
    CHECK(dev > 1e-6);
}

TEST_CASE("v stays nonnegative across stages") {
    Problem prob = rosenbrock(6);
    Rng rng(11);
    Vec theta = prob.initial_theta(rng);
    KAdamConfig cfg;
    cfg.k = 3;
    cfg.stages = strategy_hyperparams(Strategy::InverseExp, 3, {0.999, 0.9});
    OptState state = make_opt_state(6, 3);
    for (int n = 0; n < 200; ++n) {
        theta = kadam_step(theta, prob.grad(theta), state, cfg).theta;
        for (const auto& st : state.stages) {
            for (double v : st.v) CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("kadam rejects bad configs") {
    KAdamConfig cfg;
    cfg.k = 0;
    cfg.stages = {};
    OptState state = make_opt_state(2, 1);
    CHECK_THROWS_AS(kadam_step(Vec(2, 0.0), Vec(2, 1.0), state, cfg), std::invalid_argument);

    cfg.k = 1;
    cfg.stages = {{1.0, 0.9}};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("strategy_hyperparams") {
    const AdaptiveHyper base{0.999, 0.9};
    SUBCASE("k = 1 reduces to the base pair for every strategy") {
        for (auto s : {Strategy::InverseExp, Strategy::Exp, Strategy::Scaled, Strategy::Naive}) {
            const auto out = strategy_hyperparams(s, 1, base);
            REQUIRE(out.size() == 1);
            CHECK(out[0].beta == doctest::Approx(base.beta).epsilon(1e-15));
            CHECK(out[0].gamma == doctest::Approx(base.gamma).epsilon(1e-15));
        }
    }
    SUBCASE("inverse exp at k = 2") {
        const auto out = strategy_hyperparams(Strategy::InverseExp, 2, base);
        REQUIRE(out.size() == 2);
        CHECK(out[0].beta == doctest::Approx(0.96837722339831621).epsilon(1e-12));
        CHECK(out[0].gamma == doctest::Approx(0.68377223398316206).epsilon(1e-12));
        CHECK(out[1].beta == out[0].beta);
    }
    SUBCASE("scaled at k = 2") {
        const auto out = strategy_hyperparams(Strategy::Scaled, 2, base);
        CHECK(out[0].beta == doctest::Approx(0.4995).epsilon(1e-15));
        CHECK(out[0].gamma == doctest::Approx(0.45).epsilon(1e-15));
    }
    SUBCASE("exp at k = 2") {
        const auto out = strategy_hyperparams(Strategy::Exp, 2, base);
        CHECK(out[0].beta == doctest::Approx(0.999 * 0.999).epsilon(1e-15));
        CHECK(out[0].gamma == doctest::Approx(0.81).epsilon(1e-15));
    }
}

TEST_CASE("two_adam_norm_preset") {
    const KAdamConfig cfg = two_adam_norm_preset({0.999, 0.9}, 0.99, 1e-3, 1e-2, false);
    CHECK(cfg.k == 2);
    CHECK(cfg.stages[1].gamma == 0.0);
    CHECK(cfg.stages[1].beta == doctest::Approx(0.99));
}

TEST_CASE("legacy variants") {
    SUBCASE("signsgd") {
        OptState state = make_opt_state(3, 1);
        const LegacyStep s = legacy_step(LegacyVariant::Signsgd, Vec(3, 0.0), {3.0, -2.0, 0.0},
                                         state, 0.1, 0.0, {});
        CHECK(s.theta[0] == doctest::Approx(-0.1).epsilon(1e-12));
        CHECK(s.theta[1] == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(s.theta[2] == 0.0);
    }
    SUBCASE("momentum with gamma = 0 equals sgd exactly") {
        Problem prob = quadratic(4, 10.0);
        Rng rng(5);
        Vec tm = prob.initial_theta(rng);
        Vec ts = tm;
        OptState sm = make_opt_state(4, 1), ss = make_opt_state(4, 1);
        for (int n = 0; n < 100; ++n) {
            tm = legacy_step(LegacyVariant::Momentum, tm, prob.grad(tm), sm, 1e-2, 0.0,
                             {0.999, 0.0})
                     .theta;
            ts = legacy_step(LegacyVariant::Sgd, ts, prob.grad(ts), ss, 1e-2, 0.0, {}).theta;
        }
        for (int i = 0; i < 4; ++i) CHECK(tm[i] == ts[i]);
    }
    SUBCASE("rmsprop approaches 1-Adam with gamma = 0 as bias correction fades") {
        // On a shared gradient stream the two updates differ by exactly
        // sqrt(1 - beta^(n+1)), which tends to 1.
        const AdaptiveHyper h{0.9, 0.0};
        OptState sr = make_opt_state(4, 1);
        OptState sk = make_opt_state(4, 1);
        KAdamConfig cfg;
        cfg.stages = {h};
        cfg.eta = 1e-3;

        const Vec theta(4, 0.0);
        Rng rng(9);
        double early_gap = 0.0, late_gap = 0.0;
        for (int n = 0; n < 1500; ++n) {
            Vec g(4);
            for (double& x : g) x = rng.normal() + 2.0; // nonzero stream
            const Vec ur =
                legacy_step(LegacyVariant::Rmsprop, theta, g, sr, 1e-3, 0.0, h).update;
            const Vec uk = kadam_step(theta, g, sk, cfg).update;
            double gap = 0.0;
            for (int i = 0; i < 4; ++i) gap = std::max(gap, std::abs(ur[i] - uk[i]));
            if (n == 0) early_gap = gap;
            if (n == 1499) late_gap = gap;
        }
        CHECK(early_gap > 1e-2); // the first-step factor sqrt(1-beta) = 0.316 bites
        CHECK(late_gap < 1e-10); // and vanishes as n grows
    }
}
