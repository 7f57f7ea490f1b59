#pragma once

// Binomial log-likelihood, predicted deaths, SSE, numeric gradients,
// likelihood profiles, and the multi-start BFGS fitting driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hazfit/cohort.hpp"
#include "hazfit/models.hpp"
#include "hazfit/rng.hpp"

namespace hazfit {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct LogLikelihood {
    double total = kNegInf;
    bool includes_constant = true;  // K = sum log C(N_z, D_z)
    bool finite = false;
};

/// K + sum_z [ D log q + (N - D) log(1 - q) ].  Uses the cumulative hazard
/// H directly, so log(1 - q) = -H is exact.  q is floored at 1e-300 inside
/// the log to keep line searches finite; a genuinely impossible observation
/// (q = 0 with deaths, or H non-finite) yields -inf.
inline LogLikelihood log_likelihood(Model m, std::span<const double> nat,
                                    const CohortDataset& d,
                                    bool include_constant = true) {
    LogLikelihood ll;
    ll.includes_constant = include_constant;
    double total = 0.0;
    for (const auto& r : d.rows) {
        const int z = d.z_of(r.age);
        const double h = cumulative_hazard(m, nat, z);
        if (std::isnan(h) || h < -1e-12) return ll;  // evaluation failure
        const double hc = std::max(h, 0.0);
        if (r.deaths > 0) {
            const double q = -std::expm1(-hc);
            if (q <= 0.0) {
                total = kNegInf;
                break;
            }
            total += static_cast<double>(r.deaths) *
                     std::log(std::max(q, 1e-300));
        }
        if (r.survivors > r.deaths) {
            if (!std::isfinite(hc)) {
                total = kNegInf;
                break;
            }
            total -= static_cast<double>(r.survivors - r.deaths) * hc;
        }
        if (include_constant) {
            total += std::lgamma(static_cast<double>(r.survivors) + 1.0) -
                     std::lgamma(static_cast<double>(r.deaths) + 1.0) -
                     std::lgamma(
                         static_cast<double>(r.survivors - r.deaths) + 1.0);
        }
    }
    ll.total = total;
    ll.finite = std::isfinite(total);
    return ll;
}

/// D_hat_z = N_z * q_z with observed N_z held fixed.
inline std::vector<double> predicted_deaths(Model m,
                                            std::span<const double> nat,
                                            const CohortDataset& d) {
    std::vector<double> out;
    out.reserve(d.rows.size());
    for (const auto& r : d.rows)
        out.push_back(static_cast<double>(r.survivors) *
                      death_prob(m, nat, d.z_of(r.age)));
    return out;
}

inline double sse_value(std::span<const double> predicted,
                        const CohortDataset& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        const double e = predicted[i] - static_cast<double>(d.rows[i].deaths);
        s += e * e;
    }
    return s;
}

/// Gradient of the negative log-likelihood on the optimizer scale, by
/// central differences with step h_i = eps^{1/3} max(1, |theta_i|).
inline std::vector<double> neg_ll_gradient(Model m,
                                           std::span<const double> theta_opt,
                                           const CohortDataset& d,
                                           bool include_constant = true) {
    const double cbrt_eps =
        std::cbrt(std::numeric_limits<double>::epsilon());
    std::vector<double> theta(theta_opt.begin(), theta_opt.end());
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double h = cbrt_eps * std::max(1.0, std::abs(theta[i]));
        const double orig = theta[i];
        theta[i] = orig + h;
        const double fp =
            -log_likelihood(m, to_natural(m, theta), d, include_constant)
                 .total;
        theta[i] = orig - h;
        const double fm =
            -log_likelihood(m, to_natural(m, theta), d, include_constant)
                 .total;
        theta[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
        if (!std::isfinite(g[i]))
            throw std::runtime_error(
                "non-finite log-likelihood in gradient stencil");
    }
    return g;
}

// ---------------------------------------------------------------------------
// BFGS (minimization with strong-Wolfe line search)

struct FitConfig {
    int n_random_starts = 10;  // plus the heuristic start: 11 total
    int max_iterations = 500;  // per start
    double grad_tol = 1e-6;    // inf-norm of the gradient
    double ll_rel_tol = 1e-10; // relative change in ll per iteration
    std::uint64_t seed = 0;
    bool include_constant = true;
};

struct StartRecord {
    std::vector<double> start_theta;  // optimizer scale
    bool converged = false;
    double final_ll = kNegInf;
    int iterations = 0;
};

struct FitResult {
    Model model = Model::gompertz;
    bool success = false;
    std::vector<double> theta_opt;
    std::vector<double> theta_nat;
    LogLikelihood loglik;
    double aic = 0.0;
    double bic = 0.0;
    double sse = 0.0;
    long long n_for_bic = 0;  // survivors at the first modeled age
    std::vector<double> predicted;
    std::vector<StartRecord> starts;
    int best_start = -1;
};

namespace detail {

struct Objective {
    Model model;
    const CohortDataset& data;
    bool include_constant;

    double operator()(const std::vector<double>& theta) const {
        const auto ll =
            log_likelihood(model, to_natural(model, theta), data,
                           include_constant);
        return -ll.total;  // may be +inf
    }
    std::vector<double> gradient(const std::vector<double>& theta) const {
        return neg_ll_gradient(model, theta, data, include_constant);
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct LinePoint {
    double alpha, f, slope;
    std::vector<double> x, grad;
    bool grad_ok = false;
};

template <typename Obj>
LinePoint eval_line(const Obj& obj, const std::vector<double>& x0,
                    const std::vector<double>& p, double alpha) {
    LinePoint lp;
    lp.alpha = alpha;
    lp.x.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i)
        lp.x[i] = x0[i] + alpha * p[i];
    lp.f = obj(lp.x);
    lp.slope = std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(lp.f)) {
        try {
            lp.grad = obj.gradient(lp.x);
            lp.slope = dot(lp.grad, p);
            lp.grad_ok = true;
        } catch (const std::exception&) {
            lp.grad_ok = false;
        }
    }
    return lp;
}

/// Strong-Wolfe line search (bracket + bisection zoom).  Returns a point
/// with grad_ok on success; falls back to simple backtracking on any
/// descent failure.
template <typename Obj>
LinePoint line_search(const Obj& obj, const std::vector<double>& x0,
                      double f0, double slope0, const std::vector<double>& p) {
    constexpr double c1 = 1e-4, c2 = 0.9;
    double alpha_lo = 0.0, f_lo = f0, slope_lo = slope0;
    double alpha = 1.0;
    LinePoint best;
    best.alpha = 0.0;
    best.f = f0;
    best.grad_ok = false;

    LinePoint hi;  // upper bracket once found
    bool have_hi = false;
    double alpha_hi = 0.0;

    for (int iter = 0; iter < 60; ++iter) {
        LinePoint lp = eval_line(obj, x0, p, alpha);
        const bool armijo =
            std::isfinite(lp.f) && lp.f <= f0 + c1 * alpha * slope0;
        if (!armijo || !lp.grad_ok) {
            have_hi = true;
            alpha_hi = alpha;
        } else if (std::abs(lp.slope) <= -c2 * slope0) {
            return lp;  // strong Wolfe satisfied
        } else if (lp.slope >= 0.0) {
            have_hi = true;
            alpha_hi = alpha;
            // keep lp as candidate; it satisfies Armijo
            if (lp.f < best.f) best = lp;
        } else {
            alpha_lo = alpha;
            f_lo = lp.f;
            slope_lo = lp.slope;
            if (lp.f < best.f) best = lp;
            if (!have_hi) {
                alpha *= 2.0;
                continue;
            }
        }
        if (!have_hi) continue;
        const double next = 0.5 * (alpha_lo + alpha_hi);
        if (next == alpha_lo || next == alpha_hi) break;
        alpha = next;
    }
    (void)f_lo;
    (void)slope_lo;
    return best;  // best Armijo point found (may be the start, grad_ok false)
}

struct BfgsOutcome {
    std::vector<double> theta;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

template <typename Obj>
BfgsOutcome bfgs_minimize(const Obj& obj, std::vector<double> x,
                          int max_iter, double grad_tol, double f_rel_tol) {
    const std::size_t n = x.size();
    BfgsOutcome out;
    out.theta = x;
    double f = obj(x);
    out.f = f;
    if (!std::isfinite(f)) return out;  // start is infeasible

    std::vector<double> g;
    try {
        g = obj.gradient(x);
    } catch (const std::exception&) {
        return out;
    }

    // inverse-Hessian approximation, row-major identity
    std::vector<double> h(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;

    for (int iter = 0; iter < max_iter; ++iter) {
        out.iterations = iter + 1;
        if (inf_norm(g) <= grad_tol) {
            out.converged = true;
            break;
        }
        std::vector<double> p(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p[i] -= h[i * n + j] * g[j];
        double slope = dot(g, p);
        if (!(slope < 0.0)) {
            // reset to steepest descent
            std::fill(h.begin(), h.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                h[i * n + i] = 1.0;
                p[i] = -g[i];
            }
            slope = dot(g, p);
            if (!(slope < 0.0)) {
                out.converged = true;  // gradient is numerically zero
                break;
            }
        }

        LinePoint lp = line_search(obj, x, f, slope, p);
        if (!lp.grad_ok || lp.alpha <= 0.0) break;  // no usable step

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = lp.x[i] - x[i];
            y[i] = lp.grad[i] - g[i];
        }
        const double f_prev = f;
        x = lp.x;
        f = lp.f;
        g = lp.grad;
        out.theta = x;
        out.f = f;

        if (std::abs(f_prev - f) <=
            f_rel_tol * (std::abs(f_prev) + 1.0)) {
            out.converged = true;
            out.iterations = iter + 1;
            break;
        }

        const double sy = dot(s, y);
        if (sy > 1e-12 * inf_norm(s) * inf_norm(y) && sy > 0.0) {
            // BFGS inverse update: H <- (I - r s y')H(I - r y s') + r s s'
            const double rho = 1.0 / sy;
            std::vector<double> hy(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    hy[i] += h[i * n + j] * y[j];
            const double yhy = dot(y, hy);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    h[i * n + j] += rho * rho * yhy * s[i] * s[j] -
                                    rho * (hy[i] * s[j] + s[i] * hy[j]) +
                                    rho * s[i] * s[j];
                }
            }
        }
    }
    out.theta = x;
    out.f = f;
    return out;
}

}  // namespace detail

inline double aic_value(double ll, int k) { return -2.0 * ll + 2.0 * k; }

// computed relative to the AIC so that BIC = AIC + (ln n - 2) k holds
// bit-exactly
inline double bic_value(double ll, int k, long long n) {
    if (n <= 0) throw std::invalid_argument("BIC requires n > 0");
    return aic_value(ll, k) +
           (std::log(static_cast<double>(n)) - 2.0) * k;
}

/// Maximize the binomial likelihood from the heuristic start plus
/// n_random_starts random starts; keep the best finite final ll.
inline FitResult fit(Model m, const CohortDataset& d, const FitConfig& cfg) {
    if (static_cast<int>(d.rows.size()) < param_count(m))
        throw std::invalid_argument(
            std::string("dataset has fewer ages than ") + name(m) +
            " parameters");

    FitResult res;
    res.model = m;
    res.n_for_bic = d.initial_size();

    const std::vector<double> theta_h = heuristic_start(m, d);
    std::vector<std::vector<double>> starts = {theta_h};
    for (auto& s :
         random_starts(m, theta_h, cfg.n_random_starts, cfg.seed))
        starts.push_back(std::move(s));

    const detail::Objective obj{m, d, cfg.include_constant};
    double best_f = std::numeric_limits<double>::infinity();
    std::vector<double> best_theta;

    for (std::size_t i = 0; i < starts.size(); ++i) {
        auto outcome = detail::bfgs_minimize(obj, starts[i],
                                             cfg.max_iterations, cfg.grad_tol,
                                             cfg.ll_rel_tol);
        StartRecord rec;
        rec.start_theta = starts[i];
        rec.converged = outcome.converged;
        rec.final_ll = -outcome.f;
        rec.iterations = outcome.iterations;
        res.starts.push_back(std::move(rec));
        if (std::isfinite(outcome.f) && outcome.f < best_f) {
            best_f = outcome.f;
            best_theta = outcome.theta;
            res.best_start = static_cast<int>(i);
        }
    }

    if (res.best_start < 0) return res;  // all starts failed; diagnostics kept

    res.success = true;
    res.theta_opt = best_theta;
    res.theta_nat = to_natural(m, best_theta);
    res.loglik = log_likelihood(m, res.theta_nat, d, cfg.include_constant);
    res.predicted = predicted_deaths(m, res.theta_nat, d);
    res.sse = sse_value(res.predicted, d);
    res.aic = aic_value(res.loglik.total, param_count(m));
    res.bic = bic_value(res.loglik.total, param_count(m), res.n_for_bic);
    return res;
}

/// Fixed-slice likelihood profile along one optimizer coordinate.
inline std::vector<double> likelihood_profile(
    Model m, const CohortDataset& d, std::span<const double> theta_opt,
    std::size_t coordinate, std::span<const double> grid,
    bool include_constant = true) {
    if (coordinate >= theta_opt.size())
        throw std::invalid_argument("profile coordinate out of range");
    std::vector<double> theta(theta_opt.begin(), theta_opt.end());
    std::vector<double> out;
    out.reserve(grid.size());
    for (double v : grid) {
        theta[coordinate] = v;
        out.push_back(
            log_likelihood(m, to_natural(m, theta), d, include_constant)
                .total);
    }
    return out;
}

}  // namespace hazfit
