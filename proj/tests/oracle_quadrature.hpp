#pragma once

// Independent quadrature oracle for the tests: composite 20-point
// Gauss-Legendre with interval halving until two refinement levels agree.
// Deliberately a different method from the library's adaptive Simpson.

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace oracle {

// 20-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; the
// rule is symmetric).
inline constexpr double kNodes[10] = {
    0.0765265211334973338, 0.2277858511416450780, 0.3737060887154195607,
    0.5108670019508270980, 0.6360536807265150255, 0.7463319064601507926,
    0.8391169718222188234, 0.9122344282513259059, 0.9639719272779137913,
    0.9931285991850949248};
inline constexpr double kWeights[10] = {
    0.1527533871307258507, 0.1491729864726037467, 0.1420961093183820513,
    0.1316886384491766269, 0.1181945319615184173, 0.1019301198172404351,
    0.0832767415767047487, 0.0626720483341090636, 0.0406014298003869413,
    0.0176140071391521183};

template <typename F>
double gauss20(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 10; ++i)
        s += kWeights[i] * (f(c - h * kNodes[i]) + f(c + h * kNodes[i]));
    return h * s;
}

template <typename F>
double composite(const F& f, double a, double b, int pieces) {
    double s = 0.0;
    const double w = (b - a) / pieces;
    for (int i = 0; i < pieces; ++i)
        s += gauss20(f, a + i * w, a + (i + 1) * w);
    return s;
}

template <typename F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-12) {
    double prev = composite(f, a, b, 1);
    for (int pieces = 2; pieces <= 256; pieces *= 2) {
        const double cur = composite(f, a, b, pieces);
        if (std::abs(cur - prev) <=
            rel_tol * std::max(std::abs(cur), 1e-300))
            return cur;
        prev = cur;
    }
    throw std::runtime_error("oracle quadrature did not settle");
}

}  // namespace oracle
