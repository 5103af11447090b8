#include "adamlab/scaleinv.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace adamlab {

namespace {

Vec unit_direction(const Vec& w) {
    const double r = norm(w);
    if (r == 0.0) throw std::domain_error("scale-invariant loss undefined at W = 0");
    return scaled(w, 1.0 / r);
}

} // namespace

double ScaleInvariantLoss::loss(const Vec& w) const {
    return inner(unit_direction(w));
}

Vec ScaleInvariantLoss::grad(const Vec& w) const {
    const Vec what = unit_direction(w);
    return project_direction_gradient(w, inner_grad(what));
}

ScaleInvariantLoss make_scale_invariant(int dim,
                                        std::function<double(const Vec&)> inner,
                                        std::function<Vec(const Vec&)> inner_grad) {
    ScaleInvariantLoss l;
    l.dim = dim;
    l.inner = std::move(inner);
    l.inner_grad = std::move(inner_grad);
    return l;
}

Vec project_direction_gradient(const Vec& w, const Vec& grad_at_unit) {
    check_same_size(w, grad_at_unit, "project_direction_gradient");
    const double r = norm(w);
    if (r == 0.0) throw std::domain_error("project_direction_gradient: W = 0");
    const Vec what = scaled(w, 1.0 / r);
    const double radial = dot(what, grad_at_unit);
    Vec g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        g[i] = (grad_at_unit[i] - radial * what[i]) / r;
    }
    return g;
}

namespace {

std::vector<double> normalized_inner_products(const std::vector<Vec>& ws,
                                              const std::vector<Vec>& gs,
                                              bool against_final) {
    if (ws.empty() || ws.size() != gs.size()) {
        throw std::invalid_argument("orthogonality trace: trajectory empty or mismatched");
    }
    const Vec& w_final = ws.back();
    const double wf_norm = norm(w_final);
    std::vector<double> out(ws.size());
    for (std::size_t n = 0; n < ws.size(); ++n) {
        const Vec& w = against_final ? w_final : ws[n];
        const double wn = against_final ? wf_norm : norm(ws[n]);
        const double gn = norm(gs[n]);
        if (wn == 0.0 || gn == 0.0) {
            out[n] = std::numeric_limits<double>::quiet_NaN(); // flagged, skipped
            continue;
        }
        out[n] = std::abs(dot(w, gs[n])) / (wn * gn);
    }
    return out;
}

} // namespace

std::vector<double> orthogonality_trace(const std::vector<Vec>& ws,
                                        const std::vector<Vec>& gs) {
    return normalized_inner_products(ws, gs, /*against_final=*/true);
}

std::vector<double> equal_time_orthogonality(const std::vector<Vec>& ws,
                                             const std::vector<Vec>& gs) {
    return normalized_inner_products(ws, gs, /*against_final=*/false);
}

Vec coarse_grain_v_update(const Vec& v_prev, const Vec& g, double beta) {
    check_same_size(v_prev, g, "coarse_grain_v_update");
    if (g.empty()) throw std::invalid_argument("coarse_grain_v_update: empty gradient");
    const double mean_sq = norm_sq(g) / static_cast<double>(g.size());
    Vec v(v_prev.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = beta * v_prev[i] + (1.0 - beta) * mean_sq;
    }
    return v;
}

Vec coarse_grain_v(const std::vector<Vec>& grads, double beta) {
    if (grads.empty()) throw std::invalid_argument("coarse_grain_v: empty history");
    Vec v(grads.front().size(), 0.0);
    for (const Vec& g : grads) v = coarse_grain_v_update(v, g, beta);
    return v;
}

KAdamStep adam_coarse_grained_step(const Vec& theta, const Vec& grad, OptState& state,
                                   const KAdamConfig& config) {
    config.validate();
    if (config.k != 1) {
        throw std::invalid_argument("adam_coarse_grained_step: defined for k = 1");
    }
    check_same_size(theta, grad, "adam_coarse_grained_step");
    const long n = state.step;
    auto& st = state.stages.front();
    const AdaptiveHyper& h = config.stages.front();

    Vec g = grad;
    if (config.coupled && config.lambda != 0.0) axpy(g, config.lambda, theta);

    st.m = ema_update(st.m, g, h.gamma);
    st.v = coarse_grain_v_update(st.v, g, h.beta);

    KAdamStep out;
    out.stage_updates.push_back(adaptive_normalize_step(st.m, st.v, n, h, config.epsilon));
    out.update = out.stage_updates.back();
    if (!config.coupled && config.lambda != 0.0) axpy(out.update, config.lambda, theta);
    out.theta = theta;
    axpy(out.theta, -config.eta, out.update);
    state.step = n + 1;
    return out;
}

NormPrediction predict_norm(const std::vector<double>& u_norm_sq,
                            const std::vector<double>& actual_norm_sq,
                            double phi0, double eta, double lambda, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("predict_norm: dt must be positive");
    if (actual_norm_sq.size() != u_norm_sq.size() + 1) {
        throw std::invalid_argument("predict_norm: need ||W||^2 at steps 0..N and ||u||^2 at 0..N-1");
    }
    NormPrediction out;
    out.phi0 = phi0;
    out.samples.reserve(actual_norm_sq.size());

    const double decay = std::exp(-2.0 * lambda * dt);
    double integral = 0.0; // dt * sum_m e^(-2 lambda (n-m) dt) * eta ||u(m dt)||^2
    double hom = phi0;
    out.samples.push_back({0.0, phi0, actual_norm_sq[0]});
    for (std::size_t n = 1; n < actual_norm_sq.size(); ++n) {
        integral = decay * (integral + dt * eta * u_norm_sq[n - 1]);
        hom *= decay;
        out.samples.push_back({static_cast<double>(n) * dt, hom + integral, actual_norm_sq[n]});
    }
    return out;
}

std::vector<DirectionResidual> direction_residual(const std::vector<Vec>& ws,
                                                  const std::vector<Vec>& u_ws,
                                                  double eta, double dt) {
    if (ws.size() < 3) {
        throw std::invalid_argument("direction_residual: need at least 3 samples");
    }
    if (ws.size() != u_ws.size()) {
        throw std::invalid_argument("direction_residual: W and u_W lengths differ");
    }
    if (!(dt > 0.0)) throw std::invalid_argument("direction_residual: dt must be positive");

    std::vector<Vec> hats(ws.size());
    std::vector<double> radii(ws.size());
    for (std::size_t n = 0; n < ws.size(); ++n) {
        radii[n] = norm(ws[n]);
        if (radii[n] == 0.0) throw std::domain_error("direction_residual: zero-norm sample");
        hats[n] = scaled(ws[n], 1.0 / radii[n]);
    }

    std::vector<DirectionResidual> out;
    out.reserve(ws.size() - 2);
    const std::size_t dim = ws.front().size();
    for (std::size_t n = 1; n + 1 < ws.size(); ++n) {
        Vec hat_dot(dim), hat_ddot(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            hat_dot[i] = (hats[n + 1][i] - hats[n - 1][i]) / (2.0 * dt);
            hat_ddot[i] = (hats[n + 1][i] - 2.0 * hats[n][i] + hats[n - 1][i]) / (dt * dt);
        }
        DirectionResidual r;
        r.t = static_cast<double>(n) * dt;
        r.capital_lambda = 0.5 * eta * radii[n] * norm_sq(hat_dot);
        double acc = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double res = 0.5 * eta * hat_ddot[i] + hat_dot[i] +
                               r.capital_lambda * hats[n][i] + u_ws[n][i] / radii[n];
            acc += res * res;
        }
        r.residual_norm = std::sqrt(acc);
        out.push_back(r);
    }
    return out;
}

} // namespace adamlab
