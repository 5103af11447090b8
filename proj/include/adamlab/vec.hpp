#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace adamlab {

// Flat parameter vector; parameters, gradients and all per-parameter
// accumulators share this shape.
using Vec = std::vector<double>;

inline void check_same_size(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(where) + ": size mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
}

inline double dot(const Vec& a, const Vec& b) {
    check_same_size(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const Vec& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

inline double norm_inf(const Vec& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline bool all_finite(const Vec& a) {
    for (double x : a) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline Vec scaled(const Vec& a, double s) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

inline Vec add(const Vec& a, const Vec& b) {
    check_same_size(a, b, "add");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Vec sub(const Vec& a, const Vec& b) {
    check_same_size(a, b, "sub");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

// a += s * b
inline void axpy(Vec& a, double s, const Vec& b) {
    check_same_size(a, b, "axpy");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

} // namespace adamlab
