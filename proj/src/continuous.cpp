#include "adamlab/continuous.hpp"

#include <cmath>

namespace adamlab {

void ContinuousConfig::validate() const {
    if (!(eta > 0.0)) throw std::invalid_argument("ContinuousConfig: eta must be positive");
    if (!(p > 0.0)) throw std::invalid_argument("ContinuousConfig: p must be positive");
    if (substeps < 1) throw std::invalid_argument("ContinuousConfig: substeps must be >= 1");
    if (lambda < 0.0) throw std::invalid_argument("ContinuousConfig: lambda must be nonnegative");
    if (!(hyper.beta > 0.0 && hyper.beta < 1.0 && hyper.gamma > 0.0 && hyper.gamma < 1.0)) {
        throw std::invalid_argument("ContinuousConfig: (beta, gamma) must lie in (0, 1)^2");
    }
    if (!std::isfinite(dt()) || !(dt() > 0.0)) {
        throw std::invalid_argument("ContinuousConfig: dt = eta^p/K must be positive and finite");
    }
}

ContinuousState make_continuous_state(const Vec& theta0) {
    return make_continuous_state(theta0, Vec(theta0.size(), 0.0));
}

ContinuousState make_continuous_state(const Vec& theta0, const Vec& psi0) {
    check_same_size(theta0, psi0, "make_continuous_state");
    ContinuousState s;
    s.t = 0.0;
    s.theta = theta0;
    s.psi = psi0;
    s.m_acc.assign(theta0.size(), 0.0);
    s.v_acc.assign(theta0.size(), 0.0);
    return s;
}

double kernel(double alpha, double tau, double t, double eta_p) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::domain_error("kernel: alpha must lie in (0, 1)");
    }
    const double rate = (1.0 - alpha) / (eta_p * alpha);
    return rate * std::exp(-rate * (t - tau));
}

void advance_kernel_integrals(ContinuousState& state, const Vec& g,
                              const ContinuousConfig& config) {
    check_same_size(state.m_acc, g, "advance_kernel_integrals");
    const double etap = config.eta_p();
    const double dt = config.dt();
    const double rate_m = (1.0 - config.hyper.gamma) / (etap * config.hyper.gamma);
    const double rate_v = (1.0 - config.hyper.beta) / (etap * config.hyper.beta);
    const double decay_m = std::exp(-rate_m * dt);
    const double decay_v = std::exp(-rate_v * dt);
    for (std::size_t i = 0; i < g.size(); ++i) {
        state.m_acc[i] = decay_m * (state.m_acc[i] + dt * rate_m * g[i]);
        state.v_acc[i] = decay_v * (state.v_acc[i] + dt * rate_v * g[i] * g[i]);
    }
}

Vec continuous_update(const ContinuousState& state, const ContinuousConfig& config) {
    const double steps = 1.0 + state.t / config.eta_p();
    const double corr = std::sqrt(1.0 - std::pow(config.hyper.beta, steps)) /
                        (1.0 - std::pow(config.hyper.gamma, steps));
    Vec u(state.m_acc.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = corr * state.m_acc[i] / (std::sqrt(state.v_acc[i]) + config.epsilon);
    }
    return u;
}

void euler_step(ContinuousState& state, const GradFn& grad_fn,
                const ContinuousConfig& config) {
    const double etap = config.eta_p();
    const double dt = config.dt();
    const Vec g = grad_fn(state.theta);
    const Vec u = continuous_update(state, config);

    // dpsi/dt = -(2/eta^2p) (lambda*eta*theta + eta^p*psi + eta*u)
    const double scale = 2.0 / (etap * etap);
    for (std::size_t i = 0; i < state.theta.size(); ++i) {
        const double psi_dot =
            -scale * (config.lambda * config.eta * state.theta[i] + etap * state.psi[i] +
                      config.eta * u[i]);
        state.theta[i] += dt * state.psi[i];
        state.psi[i] += dt * psi_dot;
    }
    advance_kernel_integrals(state, g, config);
    state.t += dt;

    if (!all_finite(state.theta) || !all_finite(state.psi)) {
        throw IntegrationBlowupError(std::lround(state.t / dt));
    }
}

void integrate_steps(ContinuousState& state, const GradFn& grad_fn,
                     const ContinuousConfig& config, int optimizer_steps,
                     const std::function<void(int, const ContinuousState&)>& on_step) {
    config.validate();
    for (int n = 1; n <= optimizer_steps; ++n) {
        for (int s = 0; s < config.substeps; ++s) {
            euler_step(state, grad_fn, config);
        }
        if (on_step) on_step(n, state);
    }
}

Vec ClosedFormSolution::eval(double t) const {
    Vec out(a.size());
    const double ep = std::exp(-k_plus * t);
    const double em = std::exp(-k_minus * t);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * ep + b[i] * em;
    }
    return out;
}

ClosedFormSolution closed_form_zero_update(const Vec& theta0, const Vec& psi0,
                                           const ContinuousConfig& config) {
    check_same_size(theta0, psi0, "closed_form_zero_update");
    const double le2 = 2.0 * config.lambda * config.eta;
    if (!(le2 >= 0.0 && le2 < 1.0)) {
        throw std::domain_error("closed_form_zero_update: requires 0 <= 2*lambda*eta < 1");
    }
    ClosedFormSolution sol;
    const double root = std::sqrt(1.0 - le2);
    sol.k_plus = (1.0 + root) / config.eta;
    // (1 - root)/eta rewritten to dodge the cancellation at small lambda*eta
    sol.k_minus = 2.0 * config.lambda / (1.0 + root);
    sol.a.resize(theta0.size());
    sol.b.resize(theta0.size());
    const double denom = sol.k_minus - sol.k_plus; // -2*root/eta, nonzero since le2 < 1
    for (std::size_t i = 0; i < theta0.size(); ++i) {
        sol.a[i] = (psi0[i] + sol.k_minus * theta0[i]) / denom;
        sol.b[i] = theta0[i] - sol.a[i];
    }
    return sol;
}

} // namespace adamlab
