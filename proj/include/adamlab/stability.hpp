#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "adamlab/optimizers.hpp"

namespace adamlab {

enum class Region { BPlus, BZero, BMinus };

// |C| at or below this counts as the boundary B0. The exact-zero condition is
// numerically delicate, so classification is tri-state with this threshold.
inline constexpr double kRegionZeroTol = 1e-14;

struct StabilityPoint {
    AdaptiveHyper hyper;
    double c_value = 0.0;
    Region region = Region::BPlus;
    double growth_exponent = 0.0; // |C|/2 in BMinus, else 0
};

// C(beta, gamma) = (2*beta*(1-gamma) - gamma*(1-beta)) / (beta*gamma).
// Throws std::domain_error unless both rates lie in the open interval (0, 1);
// gamma = 0 (RMSprop) and beta = gamma = 0 (signSGD) are outside the bound's
// hypotheses.
double stability_coefficient(const AdaptiveHyper& hyper);

Region classify_region(double c);
StabilityPoint classify(const AdaptiveHyper& hyper);

// The n-dependent factor B_n of the max-update bound:
//   1/sqrt(C)              when C > 0
//   sqrt(n)                when C = 0 (|C| <= kRegionZeroTol)
//   exp(n|C|/2)/sqrt(|C|)  when C < 0 (overflows to +inf for large n|C|)
double bound_bn(const AdaptiveHyper& hyper, long n);

// Full right-hand side of the max-update bound:
// sqrt(1-beta^(n+1))/(1-gamma^(n+1)) * (1-gamma)/gamma * sqrt(beta/(1-beta)) * B_n.
double max_update_bound(const AdaptiveHyper& hyper, long n);

// Predicted per-step slope of log||u_n||_inf in BMinus: |C|/2.
// Throws std::domain_error outside BMinus.
double predicted_exponent(const AdaptiveHyper& hyper);

enum class CurveKind { Level, Normal };

struct CurveSample {
    std::vector<AdaptiveHyper> points;
    CurveKind kind = CurveKind::Level;
    double constant = 0.0; // c for level curves, integration constant k for normal curves
};

// Closed form for the level set C(beta, gamma) = c.
double level_curve_gamma(double beta, double c); // 2*beta / (1 + beta + c*beta)

// Normal-curve family gamma(beta) = (k - 2*beta^3)^(1/3).
double normal_curve_constant(const AdaptiveHyper& through); // k = 2*beta0^3 + gamma0^3
double normal_curve_gamma(double beta, double curve_k);

// Samples beta uniformly over beta_range and solves for gamma in closed form;
// points with gamma outside (0, 1) are discarded. Throws std::runtime_error
// when no admissible point exists.
CurveSample level_curve(double c, int num, std::pair<double, double> beta_range);
CurveSample normal_curve(const AdaptiveHyper& through, int num,
                         std::pair<double, double> beta_range);

// Columns: beta,gamma,c_value
void write_curve_csv(const CurveSample& curve, std::ostream& os);

} // namespace adamlab
