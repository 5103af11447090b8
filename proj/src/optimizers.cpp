#include "adamlab/optimizers.hpp"

#include <cmath>
#include <stdexcept>

namespace adamlab {

void validate_hyper(const AdaptiveHyper& h, const char* where) {
    if (!(h.beta >= 0.0 && h.beta <= 1.0) || !(h.gamma >= 0.0 && h.gamma <= 1.0)) {
        throw std::invalid_argument(std::string(where) + ": (beta, gamma) = (" +
                                    std::to_string(h.beta) + ", " + std::to_string(h.gamma) +
                                    ") outside [0, 1]^2");
    }
}

void KAdamConfig::validate() const {
    if (k < 1) throw std::invalid_argument("KAdamConfig: k must be >= 1");
    if (stages.size() != static_cast<std::size_t>(k)) {
        throw std::invalid_argument("KAdamConfig: expected " + std::to_string(k) +
                                    " stages, got " + std::to_string(stages.size()));
    }
    for (const auto& s : stages) {
        validate_hyper(s, "KAdamConfig");
        // bias correction needs the geometric factor to stay away from zero
        if (s.beta >= 1.0 || s.gamma >= 1.0) {
            throw std::invalid_argument("KAdamConfig: stage decay rates must be < 1");
        }
    }
    if (!(eta > 0.0)) throw std::invalid_argument("KAdamConfig: eta must be positive");
    if (lambda < 0.0) throw std::invalid_argument("KAdamConfig: lambda must be nonnegative");
    if (!(epsilon > 0.0)) throw std::invalid_argument("KAdamConfig: epsilon must be positive");
}

OptState make_opt_state(int dim, int k) {
    OptState s;
    s.step = 0;
    s.stages.resize(static_cast<std::size_t>(k));
    for (auto& st : s.stages) {
        st.m.assign(static_cast<std::size_t>(dim), 0.0);
        st.v.assign(static_cast<std::size_t>(dim), 0.0);
    }
    return s;
}

Vec ema_update(const Vec& prev, const Vec& x, double alpha) {
    check_same_size(prev, x, "ema_update");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("ema_update: alpha outside [0, 1]");
    }
    Vec out(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
        out[i] = alpha * prev[i] + (1.0 - alpha) * x[i];
    }
    return out;
}

double bias_correction(long n, double alpha) {
    if (n < 0) throw std::invalid_argument("bias_correction: n must be >= 0");
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("bias_correction: alpha must lie in [0, 1)");
    }
    return 1.0 / (1.0 - std::pow(alpha, static_cast<double>(n + 1)));
}

Vec adaptive_normalize_step(const Vec& m, const Vec& v, long n,
                            const AdaptiveHyper& hyper, double epsilon) {
    check_same_size(m, v, "adaptive_normalize_step");
    const double corr = std::sqrt(1.0 - std::pow(hyper.beta, static_cast<double>(n + 1))) *
                        bias_correction(n, hyper.gamma);
    Vec out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        out[i] = corr * m[i] / (std::sqrt(v[i]) + epsilon);
    }
    return out;
}

KAdamStep kadam_step(const Vec& theta, const Vec& grad, OptState& state,
                     const KAdamConfig& config) {
    config.validate();
    check_same_size(theta, grad, "kadam_step");
    if (state.stages.size() != static_cast<std::size_t>(config.k)) {
        throw std::invalid_argument("kadam_step: state has wrong stage count");
    }

    const long n = state.step;
    Vec ghat = grad;
    if (config.coupled && config.lambda != 0.0) {
        axpy(ghat, config.lambda, theta);
    }

    KAdamStep out;
    out.stage_updates.reserve(static_cast<std::size_t>(config.k));
    for (int i = 0; i < config.k; ++i) {
        auto& st = state.stages[static_cast<std::size_t>(i)];
        const AdaptiveHyper& h = config.stages[static_cast<std::size_t>(i)];
        check_same_size(st.m, ghat, "kadam_step");
        for (std::size_t j = 0; j < ghat.size(); ++j) {
            st.m[j] = h.gamma * st.m[j] + (1.0 - h.gamma) * ghat[j];
            st.v[j] = h.beta * st.v[j] + (1.0 - h.beta) * ghat[j] * ghat[j];
        }
        ghat = adaptive_normalize_step(st.m, st.v, n, h, config.epsilon);
        out.stage_updates.push_back(ghat);
    }

    out.update = ghat;
    if (!config.coupled && config.lambda != 0.0) {
        axpy(out.update, config.lambda, theta);
    }

    out.theta = theta;
    axpy(out.theta, -config.eta, out.update);
    state.step = n + 1;
    return out;
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "inverse_exp") return Strategy::InverseExp;
    if (name == "exp") return Strategy::Exp;
    if (name == "scaled") return Strategy::Scaled;
    if (name == "naive") return Strategy::Naive;
    throw std::invalid_argument("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
    switch (s) {
    case Strategy::InverseExp: return "inverse_exp";
    case Strategy::Exp: return "exp";
    case Strategy::Scaled: return "scaled";
    case Strategy::Naive: return "naive";
    }
    return "?";
}

std::vector<AdaptiveHyper> strategy_hyperparams(Strategy strategy, int k,
                                                const AdaptiveHyper& base) {
    if (k < 1) throw std::invalid_argument("strategy_hyperparams: k must be >= 1");
    if (!(base.beta > 0.0 && base.beta < 1.0 && base.gamma > 0.0 && base.gamma < 1.0)) {
        throw std::invalid_argument("strategy_hyperparams: base pair must lie in (0, 1)^2");
    }
    AdaptiveHyper h;
    const double kd = static_cast<double>(k);
    switch (strategy) {
    case Strategy::InverseExp:
        h.beta = 1.0 - std::pow(1.0 - base.beta, 1.0 / kd);
        h.gamma = 1.0 - std::pow(1.0 - base.gamma, 1.0 / kd);
        break;
    case Strategy::Exp:
        h.beta = std::pow(base.beta, kd);
        h.gamma = std::pow(base.gamma, kd);
        break;
    case Strategy::Scaled:
        h.beta = base.beta / kd;
        h.gamma = base.gamma / kd;
        break;
    case Strategy::Naive:
        h = base;
        break;
    }
    return std::vector<AdaptiveHyper>(static_cast<std::size_t>(k), h);
}

KAdamConfig two_adam_norm_preset(const AdaptiveHyper& stage1, double beta2,
                                 double eta, double lambda, bool coupled) {
    KAdamConfig c;
    c.k = 2;
    c.stages = {stage1, AdaptiveHyper{beta2, 0.0}};
    c.eta = eta;
    c.lambda = lambda;
    c.coupled = coupled;
    c.validate();
    return c;
}

LegacyVariant legacy_from_string(const std::string& name) {
    if (name == "momentum") return LegacyVariant::Momentum;
    if (name == "rmsprop") return LegacyVariant::Rmsprop;
    if (name == "signsgd") return LegacyVariant::Signsgd;
    if (name == "sgd") return LegacyVariant::Sgd;
    throw std::invalid_argument("unknown optimizer variant: " + name);
}

LegacyStep legacy_step(LegacyVariant variant, const Vec& theta, const Vec& grad,
                       OptState& state, double eta, double lambda,
                       const AdaptiveHyper& hyper, double epsilon) {
    check_same_size(theta, grad, "legacy_step");
    if (state.stages.empty()) {
        throw std::invalid_argument("legacy_step: state has no moment storage");
    }
    auto& st = state.stages.front();
    check_same_size(st.m, grad, "legacy_step");

    Vec g = grad;
    if (lambda != 0.0) axpy(g, lambda, theta); // PyTorch-style coupled decay

    LegacyStep out;
    out.update.resize(g.size());
    switch (variant) {
    case LegacyVariant::Momentum:
        for (std::size_t i = 0; i < g.size(); ++i) {
            st.m[i] = hyper.gamma * st.m[i] + (1.0 - hyper.gamma) * g[i];
            out.update[i] = st.m[i];
        }
        break;
    case LegacyVariant::Rmsprop:
        for (std::size_t i = 0; i < g.size(); ++i) {
            st.v[i] = hyper.beta * st.v[i] + (1.0 - hyper.beta) * g[i] * g[i];
            out.update[i] = g[i] / (std::sqrt(st.v[i]) + epsilon);
        }
        break;
    case LegacyVariant::Signsgd:
        for (std::size_t i = 0; i < g.size(); ++i) {
            out.update[i] = g[i] / (std::abs(g[i]) + epsilon); // sign with 0 -> 0
        }
        break;
    case LegacyVariant::Sgd:
        out.update = g;
        break;
    }

    out.theta = theta;
    axpy(out.theta, -eta, out.update);
    state.step += 1;
    return out;
}

} // namespace adamlab
