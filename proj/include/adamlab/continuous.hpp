#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "adamlab/optimizers.hpp"
#include "adamlab/vec.hpp"

namespace adamlab {

// Settings for the continuous-time model. Time runs at scale eta^p with
// discrete optimizer steps at t_n = n * eta^p, integrated with K explicit
// Euler substeps per optimizer step (dt = eta^p / K).
struct ContinuousConfig {
    double eta = 1e-3;
    double p = 1.0;
    int substeps = 100; // K
    double lambda = 0.0;
    AdaptiveHyper hyper;
    double epsilon = 1e-30;

    double eta_p() const { return std::pow(eta, p); }
    double dt() const { return eta_p() / substeps; }
    void validate() const;
};

struct ContinuousState {
    double t = 0.0;
    Vec theta; // theta(t)
    Vec psi;   // psi(t) = dtheta/dt
    Vec m_acc; // kernel integral for m(t)
    Vec v_acc; // kernel integral for v(t)
};

ContinuousState make_continuous_state(const Vec& theta0);
ContinuousState make_continuous_state(const Vec& theta0, const Vec& psi0);

struct IntegrationBlowupError : std::runtime_error {
    explicit IntegrationBlowupError(long substep_index)
        : std::runtime_error("non-finite state at substep " + std::to_string(substep_index)),
          substep(substep_index) {}
    long substep;
};

// Exponential moving-average kernel
// K_alpha(tau, t) = (1-alpha)/(eta^p alpha) * exp(-(1-alpha)/(eta^p alpha) (t - tau)).
// Throws std::domain_error unless alpha lies in (0, 1).
double kernel(double alpha, double tau, double t, double eta_p);

// One incremental update of the kernel integrals (left-endpoint rectangle
// rule over the trailing dt window):
//   acc <- exp(-rate*dt) * (acc + dt * rate * x)
// with rate = (1-alpha)/(eta^p alpha), x = g for m and g^2 for v.
void advance_kernel_integrals(ContinuousState& state, const Vec& g,
                              const ContinuousConfig& config);

// u(t): bias-corrected ratio m(t)/sqrt(v(t)) with correction factors
// evaluated at continuous t (they reduce to the discrete factors at t = n*eta^p).
Vec continuous_update(const ContinuousState& state, const ContinuousConfig& config);

using GradFn = std::function<Vec(const Vec&)>;

// One explicit Euler substep of the coupled first-order system
//   dtheta/dt = psi
//   dpsi/dt   = -(2/eta^2p) (lambda*eta*theta + eta^p*psi + eta*u(t))
// advancing the kernel integrals with g evaluated at the current theta.
// Throws IntegrationBlowupError when the state stops being finite.
void euler_step(ContinuousState& state, const GradFn& grad_fn,
                const ContinuousConfig& config);

// Runs optimizer_steps * K substeps; on_step fires after each optimizer step
// (i.e. every K substeps) with the 1-based step index.
void integrate_steps(ContinuousState& state, const GradFn& grad_fn,
                     const ContinuousConfig& config, int optimizer_steps,
                     const std::function<void(int, const ContinuousState&)>& on_step = {});

// theta(t) = a*exp(-k_plus t) + b*exp(-k_minus t), the exact solution when
// the update term vanishes; k_pm = (1 +- sqrt(1 - 2*lambda*eta)) / eta.
struct ClosedFormSolution {
    double k_plus = 0.0;
    double k_minus = 0.0;
    Vec a;
    Vec b;

    Vec eval(double t) const;
};

// Solves for (a, b) from theta(0) = a + b and psi(0) = -k_plus*a - k_minus*b.
// Throws std::domain_error unless 0 <= 2*lambda*eta < 1.
ClosedFormSolution closed_form_zero_update(const Vec& theta0, const Vec& psi0,
                                           const ContinuousConfig& config);

} // namespace adamlab
