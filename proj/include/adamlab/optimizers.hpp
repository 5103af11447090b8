#pragma once

#include <string>
#include <vector>

#include "adamlab/vec.hpp"

namespace adamlab {

// EMA decay pair: beta drives the second moment (v), gamma the first (m).
struct AdaptiveHyper {
    double beta = 0.999;
    double gamma = 0.9;
};

// Throws std::invalid_argument unless both rates lie in [0, 1].
void validate_hyper(const AdaptiveHyper& h, const char* where);

struct KAdamConfig {
    int k = 1;
    std::vector<AdaptiveHyper> stages; // exactly k entries
    double eta = 1e-3;
    double lambda = 0.0;
    bool coupled = false;   // coupled decay folds lambda into the gradient
    double epsilon = 1e-30; // denominator guard, added to sqrt(v)

    void validate() const; // throws std::invalid_argument
};

struct OptState {
    long step = 0; // n
    struct Moments {
        Vec m;
        Vec v;
    };
    std::vector<Moments> stages;
};

OptState make_opt_state(int dim, int k);

// alpha * prev + (1 - alpha) * x, elementwise.
Vec ema_update(const Vec& prev, const Vec& x, double alpha);

// 1 / (1 - alpha^(n+1)); throws std::invalid_argument when alpha is 1.
double bias_correction(long n, double alpha);

// sqrt(1-beta^(n+1))/(1-gamma^(n+1)) * m / (sqrt(v) + epsilon), elementwise.
Vec adaptive_normalize_step(const Vec& m, const Vec& v, long n,
                            const AdaptiveHyper& hyper, double epsilon);

struct KAdamStep {
    Vec theta;                      // theta_{n+1}
    Vec update;                     // applied update before eta (includes decoupled decay)
    std::vector<Vec> stage_updates; // u^(1)..u^(k); back() is the adaptive output
};

// One k-Adam step. Advances state.step; moments are updated in place.
KAdamStep kadam_step(const Vec& theta, const Vec& grad, OptState& state,
                     const KAdamConfig& config);

enum class Strategy { InverseExp, Exp, Scaled, Naive };

Strategy strategy_from_string(const std::string& name);
std::string strategy_name(Strategy s);

// k identical (beta_i, gamma_i) pairs derived from the base pair.
std::vector<AdaptiveHyper> strategy_hyperparams(Strategy strategy, int k,
                                                const AdaptiveHyper& base);

// 2-Adam with gamma_2 = 0: the explicit form of the normalization-layer effect.
KAdamConfig two_adam_norm_preset(const AdaptiveHyper& stage1, double beta2,
                                 double eta, double lambda, bool coupled);

enum class LegacyVariant { Momentum, Rmsprop, Signsgd, Sgd };

LegacyVariant legacy_from_string(const std::string& name);

struct LegacyStep {
    Vec theta;
    Vec update; // pre-eta
};

// Plain momentum / RMSprop / signSGD / SGD, no bias correction.
// lambda is applied as coupled decay (folded into the gradient).
LegacyStep legacy_step(LegacyVariant variant, const Vec& theta, const Vec& grad,
                       OptState& state, double eta, double lambda,
                       const AdaptiveHyper& hyper, double epsilon = 1e-30);

} // namespace adamlab
