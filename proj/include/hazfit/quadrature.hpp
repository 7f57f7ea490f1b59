#pragma once

// Adaptive Simpson quadrature.  Used as the fallback route for hazard
// integrals that have no closed form (log-quadratic with gamma >= -1e-8)
// and available generally for verifying the closed forms.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace hazfit {

namespace detail {

inline double simpson_step(double a, double fa, double b, double fb,
                           double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b,
                            double fb, double m, double fm, double whole,
                            double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson_step(a, fa, m, fm, flm);
    const double right = simpson_step(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0)
        throw std::runtime_error("adaptive quadrature: max depth exceeded");
    if (std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol,
                                depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol,
                                depth - 1);
}

}  // namespace detail

/// Integrate f over [a, b] to relative tolerance rel_tol (with a small
/// absolute floor so that near-zero integrals terminate).
template <typename F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-10) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm))
        throw std::runtime_error("adaptive quadrature: non-finite integrand");
    const double whole = detail::simpson_step(a, fa, b, fb, fm);
    const double tol = std::max(rel_tol * std::abs(whole), 1e-300);
    return detail::adaptive_simpson_rec(f, a, fa, b, fb, 0.5 * (a + b), fm,
                                        whole, tol, 60);
}

}  // namespace hazfit
