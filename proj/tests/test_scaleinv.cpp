#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "adamlab/problems.hpp"
#include "adamlab/rng.hpp"
#include "adamlab/scaleinv.hpp"

using namespace adamlab;

namespace {

// direction loss f(w) = <c, w> with a fixed c
ScaleInvariantLoss linear_direction_loss(Vec c) {
    const int dim = static_cast<int>(c.size());
    auto cc = std::make_shared<Vec>(std::move(c));
    return make_scale_invariant(
        dim, [cc](const Vec& w) { return dot(*cc, w); },
        [cc](const Vec&) { return *cc; });
}

// even direction loss f(w) = <c, w>^2, invariant under w -> -w as well
ScaleInvariantLoss even_direction_loss(Vec c) {
    const int dim = static_cast<int>(c.size());
    auto cc = std::make_shared<Vec>(std::move(c));
    return make_scale_invariant(
        dim, [cc](const Vec& w) { return dot(*cc, w) * dot(*cc, w); },
        [cc](const Vec& w) { return scaled(*cc, 2.0 * dot(*cc, w)); });
}

} // namespace

TEST_CASE("make_scale_invariant") {
    Rng rng(31);
    const Vec c = random_normal_vec(6, rng);
    const ScaleInvariantLoss L = linear_direction_loss(c);

    SUBCASE("invariance under positive scaling") {
        const Vec w = random_normal_vec(6, rng);
        const double base = L.loss(w);
        for (double alpha : {0.5, 2.0, 10.0, 1e-4}) {
            const double scaled_loss = L.loss(scaled(w, alpha));
            CHECK(std::abs(scaled_loss - base) <= 1e-12 * std::max(1.0, std::abs(base)));
        }
    }
    SUBCASE("even losses are invariant for negative alpha too") {
        const ScaleInvariantLoss E = even_direction_loss(c);
        const Vec w = random_normal_vec(6, rng);
        const double base = E.loss(w);
        for (double alpha : {-3.0, -0.25, 0.5, 4.0}) {
            CHECK(std::abs(E.loss(scaled(w, alpha)) - base) <=
                  1e-12 * std::max(1.0, std::abs(base)));
        }
    }
    SUBCASE("gradient is orthogonal to W") {
        for (int trial = 0; trial < 50; ++trial) {
            const Vec w = random_normal_vec(6, rng);
            const Vec g = L.grad(w);
            CHECK(std::abs(dot(w, g)) <= 1e-10 * norm(w) * std::max(norm(g), 1e-30));
        }
    }
    SUBCASE("gradient matches finite differences") {
        const Vec w = random_normal_vec(6, rng);
        const Vec g = L.grad(w);
        const Vec fd = finite_difference_gradient([&](const Vec& x) { return L.loss(x); }, w);
        const double scale = std::max(1.0, norm_inf(g));
        for (int i = 0; i < 6; ++i) {
            CHECK(std::abs(g[i] - fd[i]) / scale <= 1e-6);
        }
    }
    SUBCASE("zero weight is singular") {
        CHECK_THROWS_AS(L.loss(Vec(6, 0.0)), std::domain_error);
        CHECK_THROWS_AS(L.grad(Vec(6, 0.0)), std::domain_error);
    }
}

TEST_CASE("orthogonality traces") {
    Rng rng(33);
    SUBCASE("scale-invariant trajectory stays orthogonal at equal times") {
        const Vec c = random_normal_vec(8, rng);
        const ScaleInvariantLoss L = linear_direction_loss(c);
        std::vector<Vec> ws, gs;
        Vec w = random_normal_vec(8, rng);
        for (int n = 0; n < 40; ++n) {
            ws.push_back(w);
            gs.push_back(L.grad(w));
            axpy(w, -0.05, gs.back());
        }
        const auto eq = equal_time_orthogonality(ws, gs);
        for (double v : eq) CHECK(v <= 1e-8);
        const auto trace = orthogonality_trace(ws, gs);
        CHECK(trace.back() <= 1e-8); // equal times at the final entry
    }
    SUBCASE("a non-invariant quadratic is visibly non-orthogonal") {
        Problem prob = quadratic(8, 50.0);
        std::vector<Vec> ws, gs;
        Vec w = prob.initial_theta(rng);
        for (int n = 0; n < 40; ++n) {
            ws.push_back(w);
            gs.push_back(prob.grad(w));
            axpy(w, -1e-3, gs.back());
        }
        const auto eq = equal_time_orthogonality(ws, gs);
        for (double v : eq) CHECK(v > 1e-3);
    }
    SUBCASE("g perpendicular to a fixed W by construction gives exactly zero") {
        const Vec w = {1.0, 0.0, 0.0};
        std::vector<Vec> ws(5, w), gs(5, Vec{0.0, 2.0, -1.0});
        for (double v : orthogonality_trace(ws, gs)) CHECK(v == 0.0);
    }
    SUBCASE("zero-norm entries are flagged as NaN") {
        const std::vector<Vec> ws = {{1.0}, {1.0}};
        const std::vector<Vec> gs = {{0.0}, {1.0}};
        const auto eq = equal_time_orthogonality(ws, gs);
        CHECK(std::isnan(eq[0]));
        CHECK(eq[1] == doctest::Approx(1.0));
    }
}

TEST_CASE("coarse_grain_v") {
    SUBCASE("one step from zero") {
        const Vec v = coarse_grain_v_update(Vec(2, 0.0), {3.0, 4.0}, 0.9);
        CHECK(v[0] == doctest::Approx(0.1 * 12.5).epsilon(1e-14));
        CHECK(v[1] == v[0]);
    }
    SUBCASE("all-equal gradients make coarse graining exact") {
        Vec v_exact(3, 0.0), v_cg(3, 0.0);
        for (int n = 0; n < 20; ++n) {
            const Vec g(3, 1.5 + n * 0.1);
            for (int i = 0; i < 3; ++i) {
                v_exact[static_cast<std::size_t>(i)] =
                    0.9 * v_exact[static_cast<std::size_t>(i)] +
                    0.1 * g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
            }
            v_cg = coarse_grain_v_update(v_cg, g, 0.9);
        }
        for (int i = 0; i < 3; ++i) {
            CHECK(v_cg[static_cast<std::size_t>(i)] ==
                  doctest::Approx(v_exact[static_cast<std::size_t>(i)]).epsilon(1e-13));
        }
    }
    SUBCASE("history fold agrees with stepwise updates") {
        Rng rng(2);
        std::vector<Vec> grads;
        for (int n = 0; n < 10; ++n) grads.push_back(random_normal_vec(4, rng));
        Vec v(4, 0.0);
        for (const auto& g : grads) v = coarse_grain_v_update(v, g, 0.95);
        const Vec folded = coarse_grain_v(grads, 0.95);
        for (int i = 0; i < 4; ++i) CHECK(folded[static_cast<std::size_t>(i)] == v[static_cast<std::size_t>(i)]);
    }
    SUBCASE("coarse-grained Adam stays close to exact Adam on a scale-invariant toy") {
        // The approximation targets large tensors with near-homogeneous
        // squared-gradient entries; a stochastic sign-pattern direction loss
        // at dim 100 sits in that regime (cross-coordinate spread of v a few
        // percent). Small deterministic toys violate it and drift 10-20%.
        const int dim = 100;
        Rng rng(5);
        const Vec w0 = random_normal_vec(dim, rng, 0.5);
        KAdamConfig cfg;
        cfg.stages = {{0.999, 0.9}};
        cfg.eta = 1e-3;
        cfg.lambda = 1e-2;
        OptState se = make_opt_state(dim, 1), sc = make_opt_state(dim, 1);
        Vec te = w0, tc = w0;
        std::vector<Vec> exact_traj{te};
        Rng signs(99);
        double dev = 0.0;
        for (int n = 0; n < 100; ++n) {
            Vec cn(dim);
            for (double& x : cn) x = signs.uniform() < 0.5 ? -1.0 : 1.0;
            const Vec ge = project_direction_gradient(te, cn);
            const Vec gc = project_direction_gradient(tc, cn);
            te = kadam_step(te, ge, se, cfg).theta;
            tc = adam_coarse_grained_step(tc, gc, sc, cfg).theta;
            exact_traj.push_back(te);
            for (int i = 0; i < dim; ++i) {
                dev = std::max(dev, std::abs(te[static_cast<std::size_t>(i)] -
                                             tc[static_cast<std::size_t>(i)]));
            }
        }
        // deviation within 5% of the widest per-coordinate range
        double range = 0.0;
        for (int i = 0; i < dim; ++i) {
            double lo = 1e300, hi = -1e300;
            for (const auto& t : exact_traj) {
                lo = std::min(lo, t[static_cast<std::size_t>(i)]);
                hi = std::max(hi, t[static_cast<std::size_t>(i)]);
            }
            range = std::max(range, hi - lo);
        }
        CHECK(dev <= 0.05 * range);
    }
}

TEST_CASE("predict_norm") {
    SUBCASE("zero updates reduce to pure exponential decay") {
        const std::vector<double> u_sq(50, 0.0);
        std::vector<double> actual(51, 0.0);
        const double phi0 = 4.0, lambda = 0.05, dt = 0.01;
        for (int n = 0; n <= 50; ++n) {
            actual[static_cast<std::size_t>(n)] = phi0 * std::exp(-2.0 * lambda * n * dt);
        }
        const NormPrediction np = predict_norm(u_sq, actual, phi0, 1e-3, lambda, dt);
        for (const auto& s : np.samples) {
            CHECK(s.predicted == doctest::Approx(s.actual).epsilon(1e-12));
        }
    }
    SUBCASE("lambda = 0 accumulates the plain sum") {
        const std::vector<double> u_sq = {1.0, 2.0, 3.0};
        const std::vector<double> actual = {1.0, 0.0, 0.0, 0.0}; // unused beyond shape
        const double eta = 0.1, dt = 0.5;
        const NormPrediction np = predict_norm(u_sq, actual, 1.0, eta, 0.0, dt);
        CHECK(np.samples[1].predicted == doctest::Approx(1.0 + dt * eta * 1.0));
        CHECK(np.samples[3].predicted == doctest::Approx(1.0 + dt * eta * 6.0));
    }
    SUBCASE("shape validation") {
        CHECK_THROWS_AS(predict_norm({1.0}, {1.0}, 1.0, 1e-3, 0.0, 0.1),
                        std::invalid_argument);
    }
}

TEST_CASE("direction_residual") {
    SUBCASE("stationary direction has zero residual when u vanishes") {
        const Vec w = {3.0, 0.0};
        const std::vector<Vec> ws(5, w);
        const std::vector<Vec> us(5, Vec{0.0, 0.0});
        const auto res = direction_residual(ws, us, 1e-3, 1e-3);
        REQUIRE(res.size() == 3);
        for (const auto& r : res) {
            CHECK(r.capital_lambda == 0.0);
            CHECK(r.residual_norm <= 1e-14);
        }
    }
    SUBCASE("What stays orthogonal to its derivative along a real trajectory") {
        Problem prob = scale_invariant_problem(24, 3);
        Rng rng(4);
        Vec theta = prob.initial_theta(rng);
        KAdamConfig cfg;
        cfg.stages = {{0.999, 0.9}};
        cfg.eta = 1e-3;
        cfg.lambda = 1e-2;
        OptState st = make_opt_state(prob.dim, 1);
        const int half = prob.dim / 2;
        std::vector<Vec> ws;
        for (int n = 0; n < 30; ++n) {
            ws.push_back(Vec(theta.begin(), theta.begin() + half));
            theta = kadam_step(theta, prob.grad(theta), st, cfg).theta;
        }
        const double dt = 1e-3;
        for (std::size_t n = 1; n + 1 < ws.size(); ++n) {
            Vec hat_prev = scaled(ws[n - 1], 1.0 / norm(ws[n - 1]));
            Vec hat_next = scaled(ws[n + 1], 1.0 / norm(ws[n + 1]));
            Vec hat = scaled(ws[n], 1.0 / norm(ws[n]));
            CHECK(norm(hat) == doctest::Approx(1.0).epsilon(1e-12)); // unit-norm preservation
            Vec hat_dot(hat.size());
            for (std::size_t i = 0; i < hat.size(); ++i) {
                hat_dot[i] = (hat_next[i] - hat_prev[i]) / (2.0 * dt);
            }
            // orthogonality up to discretization error
            CHECK(std::abs(dot(hat, hat_dot)) <= 0.05 * std::max(1.0, norm(hat_dot)));
        }
    }
    SUBCASE("input validation") {
        const std::vector<Vec> two(2, Vec{1.0});
        CHECK_THROWS_AS(direction_residual(two, two, 1e-3, 1e-3), std::invalid_argument);
        const std::vector<Vec> three(3, Vec{1.0});
        CHECK_THROWS_AS(direction_residual(three, two, 1e-3, 1e-3), std::invalid_argument);
        CHECK_THROWS_AS(direction_residual(three, three, 1e-3, 0.0), std::invalid_argument);
    }
}
