#include "adamlab/stability.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "adamlab/io.hpp"

namespace adamlab {

double stability_coefficient(const AdaptiveHyper& hyper) {
    const double b = hyper.beta;
    const double g = hyper.gamma;
    if (!(b > 0.0 && b < 1.0 && g > 0.0 && g < 1.0)) {
        throw std::domain_error("stability_coefficient: requires (beta, gamma) in (0, 1)^2");
    }
    return (2.0 * b * (1.0 - g) - g * (1.0 - b)) / (b * g);
}

Region classify_region(double c) {
    if (std::abs(c) <= kRegionZeroTol) return Region::BZero;
    return c > 0.0 ? Region::BPlus : Region::BMinus;
}

StabilityPoint classify(const AdaptiveHyper& hyper) {
    StabilityPoint p;
    p.hyper = hyper;
    p.c_value = stability_coefficient(hyper);
    p.region = classify_region(p.c_value);
    p.growth_exponent = p.region == Region::BMinus ? std::abs(p.c_value) / 2.0 : 0.0;
    return p;
}

double bound_bn(const AdaptiveHyper& hyper, long n) {
    if (n < 0) throw std::invalid_argument("bound_bn: n must be >= 0");
    const double c = stability_coefficient(hyper);
    switch (classify_region(c)) {
    case Region::BPlus:
        return 1.0 / std::sqrt(c);
    case Region::BZero:
        return std::sqrt(static_cast<double>(n));
    case Region::BMinus:
        // exp overflows to +inf for large n|C|; callers treat that as a sentinel.
        return std::exp(static_cast<double>(n) * std::abs(c) / 2.0) / std::sqrt(std::abs(c));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double max_update_bound(const AdaptiveHyper& hyper, long n) {
    const double b = hyper.beta;
    const double g = hyper.gamma;
    const double nd = static_cast<double>(n + 1);
    const double prefactor = std::sqrt(1.0 - std::pow(b, nd)) / (1.0 - std::pow(g, nd));
    return prefactor * (1.0 - g) / g * std::sqrt(b / (1.0 - b)) * bound_bn(hyper, n);
}

double predicted_exponent(const AdaptiveHyper& hyper) {
    const StabilityPoint p = classify(hyper);
    if (p.region != Region::BMinus) {
        throw std::domain_error("predicted_exponent: requires C(beta, gamma) < 0");
    }
    return p.growth_exponent;
}

double level_curve_gamma(double beta, double c) {
    return 2.0 * beta / (1.0 + beta + c * beta);
}

double normal_curve_constant(const AdaptiveHyper& through) {
    const double b = through.beta;
    const double g = through.gamma;
    if (!(b > 0.0 && b < 1.0 && g > 0.0 && g < 1.0)) {
        throw std::domain_error("normal_curve_constant: point must lie in (0, 1)^2");
    }
    return 2.0 * b * b * b + g * g * g;
}

double normal_curve_gamma(double beta, double curve_k) {
    return std::cbrt(curve_k - 2.0 * beta * beta * beta);
}

namespace {

bool in_open_unit(double x) { return x > 0.0 && x < 1.0; }

} // namespace

CurveSample level_curve(double c, int num, std::pair<double, double> beta_range) {
    if (num < 2) throw std::invalid_argument("level_curve: num must be >= 2");
    if (!(beta_range.first > 0.0 && beta_range.second < 1.0 &&
          beta_range.first < beta_range.second)) {
        throw std::invalid_argument("level_curve: beta_range must lie inside (0, 1)");
    }
    CurveSample out;
    out.kind = CurveKind::Level;
    out.constant = c;
    for (int i = 0; i < num; ++i) {
        const double beta = beta_range.first +
                            (beta_range.second - beta_range.first) * i / (num - 1);
        const double gamma = level_curve_gamma(beta, c);
        if (in_open_unit(gamma)) out.points.push_back({beta, gamma});
    }
    if (out.points.empty()) {
        throw std::runtime_error("level_curve: no admissible gamma in range");
    }
    return out;
}

CurveSample normal_curve(const AdaptiveHyper& through, int num,
                         std::pair<double, double> beta_range) {
    if (num < 2) throw std::invalid_argument("normal_curve: num must be >= 2");
    const double k = normal_curve_constant(through);
    // gamma in (0, 1) requires 0 < k - 2*beta^3 < 1
    double lo = std::max(beta_range.first, std::cbrt((k - 1.0) / 2.0));
    double hi = std::min({beta_range.second, std::cbrt(k / 2.0), 1.0});
    lo = std::max(lo, 0.0);
    if (!(lo < hi)) {
        throw std::runtime_error("normal_curve: empty admissible beta range");
    }
    // keep strictly inside so the cube root stays in (0, 1)
    const double margin = 1e-9 * (hi - lo);
    lo += margin;
    hi -= margin;

    CurveSample out;
    out.kind = CurveKind::Normal;
    out.constant = k;
    for (int i = 0; i < num; ++i) {
        const double beta = lo + (hi - lo) * i / (num - 1);
        const double gamma = normal_curve_gamma(beta, k);
        if (in_open_unit(beta) && in_open_unit(gamma)) out.points.push_back({beta, gamma});
    }
    if (out.points.empty()) {
        throw std::runtime_error("normal_curve: no admissible point in range");
    }
    return out;
}

void write_curve_csv(const CurveSample& curve, std::ostream& os) {
    os << "beta,gamma,c_value\n";
    for (const auto& p : curve.points) {
        double c = std::numeric_limits<double>::quiet_NaN();
        try {
            c = stability_coefficient(p);
        } catch (const std::domain_error&) {
        }
        os << fmt_double(p.beta) << ',' << fmt_double(p.gamma) << ',' << fmt_double(c) << '\n';
    }
}

} // namespace adamlab
