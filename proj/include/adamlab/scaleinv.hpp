#pragma once

#include <functional>
#include <vector>

#include "adamlab/optimizers.hpp"
#include "adamlab/vec.hpp"

namespace adamlab {

// Loss of the form L(W) = f(W / ||W||) for a direction-only loss f;
// invariant under W -> alpha*W for alpha > 0 by construction.
struct ScaleInvariantLoss {
    int dim = 0;
    std::function<double(const Vec&)> inner;      // f on the unit sphere
    std::function<Vec(const Vec&)> inner_grad;    // ambient gradient of f at a unit vector

    double loss(const Vec& w) const;              // throws std::domain_error at W = 0
    Vec grad(const Vec& w) const;                 // (I - What What^T) grad_f(What) / ||W||
};

ScaleInvariantLoss make_scale_invariant(int dim,
                                        std::function<double(const Vec&)> inner,
                                        std::function<Vec(const Vec&)> inner_grad);

// The projection identity behind ScaleInvariantLoss::grad, shared with the
// built-in scale-invariant problem.
Vec project_direction_gradient(const Vec& w, const Vec& grad_at_unit);

// |<W_final, g_n>| / (||W_final|| * ||g_n||) over n. Entries with a zero norm
// are flagged as NaN and skipped from any aggregate.
std::vector<double> orthogonality_trace(const std::vector<Vec>& ws,
                                        const std::vector<Vec>& gs);

// Same statistic at equal times: |<W_n, g_n>| / (||W_n|| * ||g_n||).
std::vector<double> equal_time_orthogonality(const std::vector<Vec>& ws,
                                             const std::vector<Vec>& gs);

// One coarse-grained EMA step: every squared-gradient entry is replaced by
// the tensor mean ||g||^2 / N before the moving average.
Vec coarse_grain_v_update(const Vec& v_prev, const Vec& g, double beta);

// Folds the gradient history from a zero initial state.
Vec coarse_grain_v(const std::vector<Vec>& grads, double beta);

// Adam (k = 1) with the coarse-grained second moment, for trajectory
// comparisons against the exact optimizer.
KAdamStep adam_coarse_grained_step(const Vec& theta, const Vec& grad, OptState& state,
                                   const KAdamConfig& config);

struct NormPrediction {
    double phi0 = 0.0; // ||W(0)||^2
    struct Sample {
        double t;
        double predicted;
        double actual;
    };
    std::vector<Sample> samples;
};

// Discrete evaluation of the norm-dynamics integral
//   phi(n dt) ~= phi0 e^(-2 lambda n dt) + dt * sum_{m<n} e^(-2 lambda (n-m) dt) * eta ||u_W(m dt)||^2
// paired with the measured ||W||^2 at the same times. u_norm_sq holds
// ||u_W||^2 for steps 0..N-1, actual_norm_sq holds ||W||^2 for steps 0..N.
NormPrediction predict_norm(const std::vector<double>& u_norm_sq,
                            const std::vector<double>& actual_norm_sq,
                            double phi0, double eta, double lambda, double dt);

struct DirectionResidual {
    double t = 0.0;
    double residual_norm = 0.0;  // || eta/2 What'' + What' + Lambda What + u_W/||W|| ||
    double capital_lambda = 0.0; // Lambda = eta/2 * ||W|| * ||What'||^2
};

// Central-difference residuals of the direction dynamics, evaluated on a
// trajectory logged at optimizer-step resolution (dt apart). Requires at
// least 3 samples; returns one entry per interior sample.
std::vector<DirectionResidual> direction_residual(const std::vector<Vec>& ws,
                                                  const std::vector<Vec>& u_ws,
                                                  double eta, double dt);

} // namespace adamlab
