#pragma once

// The nine parametric old-age hazard families.
//
// Each model is evaluated on the shifted age index z = age - 79 (age 80 is
// z = 1) and carries two parameter scales: the natural scale (alpha, beta,
// ...) with per-parameter domains, and an unconstrained optimizer scale
// where positive parameters are log-transformed.
//
// Conditional death probabilities q_z = 1 - exp(-int_z^{z+1} mu) use exact
// closed forms for the cumulative-hazard integral; the log-quadratic model
// falls back to adaptive quadrature where its erf-based form degenerates
// (gamma >= -1e-8).

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hazfit/cohort.hpp"
#include "hazfit/quadrature.hpp"
#include "hazfit/regression.hpp"
#include "hazfit/rng.hpp"

namespace hazfit {

enum class Model {
    gompertz,
    kannisto,
    weibull,
    makeham,
    beard,
    logquad,
    logistic,
    perks,
    lynchbrown,
};

inline constexpr std::array<Model, 9> kAllModels = {
    Model::gompertz, Model::kannisto, Model::weibull,
    Model::makeham,  Model::beard,    Model::logquad,
    Model::logistic, Model::perks,    Model::lynchbrown,
};

inline const char* name(Model m) {
    switch (m) {
        case Model::gompertz: return "gompertz";
        case Model::kannisto: return "kannisto";
        case Model::weibull: return "weibull";
        case Model::makeham: return "makeham";
        case Model::beard: return "beard";
        case Model::logquad: return "logquad";
        case Model::logistic: return "logistic";
        case Model::perks: return "perks";
        case Model::lynchbrown: return "lynchbrown";
    }
    return "?";
}

inline std::string valid_model_names() {
    std::string s;
    for (Model m : kAllModels) {
        if (!s.empty()) s += ", ";
        s += name(m);
    }
    return s;
}

inline Model model_from_name(const std::string& s) {
    for (Model m : kAllModels)
        if (s == name(m)) return m;
    throw std::invalid_argument("unknown model '" + s +
                                "'; valid names: " + valid_model_names());
}

inline int param_count(Model m) {
    switch (m) {
        case Model::gompertz:
        case Model::kannisto:
        case Model::weibull: return 2;
        case Model::makeham:
        case Model::beard:
        case Model::logquad: return 3;
        default: return 4;
    }
}

inline const std::vector<std::string>& param_names(Model m) {
    static const std::vector<std::string> ab = {"alpha", "beta"};
    static const std::vector<std::string> abg = {"alpha", "beta", "gamma"};
    static const std::vector<std::string> abd = {"alpha", "beta", "delta"};
    static const std::vector<std::string> abgd = {"alpha", "beta", "gamma",
                                                  "delta"};
    switch (m) {
        case Model::gompertz:
        case Model::kannisto:
        case Model::weibull: return ab;
        case Model::makeham:
        case Model::logquad: return abg;
        case Model::beard: return abd;
        default: return abgd;
    }
}

namespace detail {

// true where the natural parameter lives on (0, inf) and the optimizer
// coordinate is its log
inline std::vector<bool> log_transformed(Model m) {
    switch (m) {
        case Model::gompertz: return {true, false};
        case Model::kannisto: return {true, true};
        case Model::weibull: return {true, true};
        case Model::makeham: return {true, false, true};
        case Model::beard: return {true, true, true};
        case Model::logquad: return {false, false, false};
        case Model::logistic: return {true, true, true, true};
        case Model::perks: return {true, true, true, true};
        case Model::lynchbrown: return {false, true, true, false};
    }
    return {};
}

/// log(1 + c * exp(x)) for c > 0, stable for large x.
inline double log1p_c_exp(double c, double x) {
    if (x < 690.0) {
        const double v = c * std::exp(x);
        if (std::isfinite(v)) return std::log1p(v);
    }
    const double t = std::log(c) + x;
    return t > 37.0 ? t : std::log1p(std::exp(t));
}

inline double sigmoid(double w) {
    if (w >= 0.0) return 1.0 / (1.0 + std::exp(-w));
    const double e = std::exp(w);
    return e / (1.0 + e);
}

/// erf(hi) - erf(lo) for hi >= lo, using erfc in the tails to limit
/// cancellation.
inline double erf_diff(double hi, double lo) {
    if (lo >= 0.5) return std::erfc(lo) - std::erfc(hi);
    if (hi <= -0.5) return std::erfc(-hi) - std::erfc(-lo);
    return std::erf(hi) - std::erf(lo);
}

// (e^{b(z+1)} - e^{bz}) * a / b, with a 3-term series when |b| < 1e-8
inline double gompertz_integral(double a, double b, double z) {
    if (std::abs(b) < 1e-8)
        return a * std::exp(b * z) * (1.0 + b / 2.0 + b * b / 6.0);
    return a * std::exp(b * z) * std::expm1(b) / b;
}

}  // namespace detail

inline std::vector<double> to_natural(Model m, std::span<const double> opt) {
    const auto lt = detail::log_transformed(m);
    if (opt.size() != lt.size())
        throw std::invalid_argument("wrong parameter count");
    std::vector<double> nat(opt.size());
    for (std::size_t i = 0; i < opt.size(); ++i)
        nat[i] = lt[i] ? std::exp(opt[i]) : opt[i];
    return nat;
}

inline std::vector<double> from_natural(Model m, std::span<const double> nat) {
    const auto lt = detail::log_transformed(m);
    if (nat.size() != lt.size())
        throw std::invalid_argument("wrong parameter count");
    std::vector<double> opt(nat.size());
    for (std::size_t i = 0; i < nat.size(); ++i) {
        if (!std::isfinite(nat[i]))
            throw std::domain_error("non-finite natural parameter");
        if (lt[i]) {
            if (nat[i] <= 0.0)
                throw std::domain_error(
                    std::string(param_names(m)[i]) + " must be positive for " +
                    name(m));
            opt[i] = std::log(nat[i]);
        } else {
            opt[i] = nat[i];
        }
    }
    return opt;
}

inline bool in_domain(Model m, std::span<const double> nat) {
    const auto lt = detail::log_transformed(m);
    if (nat.size() != lt.size()) return false;
    for (std::size_t i = 0; i < nat.size(); ++i) {
        if (!std::isfinite(nat[i])) return false;
        if (lt[i] && nat[i] <= 0.0) return false;
    }
    return true;
}

/// Population hazard mu(z) at (possibly fractional) age index z.
inline double hazard(Model m, std::span<const double> p, double z) {
    switch (m) {
        case Model::gompertz:
            return p[0] * std::exp(p[1] * z);
        case Model::kannisto:
            // alpha e^{bz} / (1 + alpha e^{bz})
            return detail::sigmoid(std::log(p[0]) + p[1] * z);
        case Model::weibull:
            return p[0] * std::pow(z, p[1] - 1.0);
        case Model::makeham:
            return p[2] + p[0] * std::exp(p[1] * z);
        case Model::beard:
            return (p[0] / p[2]) * detail::sigmoid(std::log(p[2]) + p[1] * z);
        case Model::logquad:
            return std::exp(p[0] + p[1] * z + p[2] * z * z);
        case Model::logistic:
            return p[2] +
                   (p[0] / p[3]) * detail::sigmoid(std::log(p[3]) + p[1] * z);
        case Model::perks: {
            const double bz = p[1] * z;
            if (bz < 350.0) {
                const double e = std::exp(bz);
                return (p[2] + p[0] * e) / (1.0 + p[3] * e);
            }
            const double en = std::exp(-bz);
            return (p[2] * en + p[0]) / (en + p[3]);
        }
        case Model::lynchbrown:
            return p[0] + p[1] * std::atan(p[2] * (z - p[3]));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Cumulative hazard over one year of age, H = int_z^{z+1} mu(x) dx.
/// Closed form for every family except the degenerate log-quadratic branch.
inline double cumulative_hazard(Model m, std::span<const double> p, int z) {
    const double zf = static_cast<double>(z);
    switch (m) {
        case Model::gompertz:
            return detail::gompertz_integral(p[0], p[1], zf);
        case Model::makeham:
            return p[2] + detail::gompertz_integral(p[0], p[1], zf);
        case Model::kannisto:
            return (detail::log1p_c_exp(p[0], p[1] * (zf + 1.0)) -
                    detail::log1p_c_exp(p[0], p[1] * zf)) /
                   p[1];
        case Model::beard:
            return p[0] / (p[1] * p[2]) *
                   (detail::log1p_c_exp(p[2], p[1] * (zf + 1.0)) -
                    detail::log1p_c_exp(p[2], p[1] * zf));
        case Model::logistic:
            return p[2] + p[0] / (p[1] * p[3]) *
                              (detail::log1p_c_exp(p[3], p[1] * (zf + 1.0)) -
                               detail::log1p_c_exp(p[3], p[1] * zf));
        case Model::perks: {
            const double dl = detail::log1p_c_exp(p[3], p[1] * (zf + 1.0)) -
                              detail::log1p_c_exp(p[3], p[1] * zf);
            return p[2] + (p[0] / (p[1] * p[3]) - p[2] / p[1]) * dl;
        }
        case Model::weibull:
            return p[0] / p[1] *
                   (std::pow(zf + 1.0, p[1]) - std::pow(zf, p[1]));
        case Model::logquad: {
            const double a = p[0], b = p[1], c = p[2];
            const auto direct = [&]() {
                try {
                    return integrate(
                        [&](double x) {
                            return std::exp(a + b * x + c * x * x);
                        },
                        zf, zf + 1.0, 1e-10);
                } catch (const std::exception&) {
                    return std::numeric_limits<double>::quiet_NaN();
                }
            };
            if (c >= -1e-8) {
                // erf form degenerates as c -> 0; integrate directly.
                // A non-integrable point (overflow) is an evaluation failure.
                return direct();
            }
            const double s = std::sqrt(-c);
            const double t0 = (b + 2.0 * c * zf) / (2.0 * s);
            const double t1 = (b + 2.0 * c * (zf + 1.0)) / (2.0 * s);
            // erfc underflows past ~26; in the far tails the erf form loses
            // everything to cancellation, so integrate directly instead
            if (t1 > 20.0 || t0 < -20.0) return direct();
            const double diff = detail::erf_diff(t0, t1);  // t0 > t1
            if (diff <= 0.0) return direct();
            const double log_amp = 0.5 * std::log(M_PI) -
                                   std::log(2.0 * s) + a -
                                   b * b / (4.0 * c);
            return std::exp(log_amp + std::log(diff));
        }
        case Model::lynchbrown: {
            const double g = p[2];
            const double k0 = g * (zf - p[3]);
            const double k1 = g * (zf - p[3] + 1.0);
            return p[0] + p[1] / (2.0 * g) *
                              (2.0 * k1 * std::atan(k1) -
                               2.0 * k0 * std::atan(k0) +
                               std::log1p(k0 * k0) - std::log1p(k1 * k1));
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// q_z = 1 - exp(-H).  Returns NaN on evaluation failure (non-finite
/// intermediate, or H negative beyond round-off).  Small negative H from
/// round-off (|H| < 1e-12) is clamped to zero.
inline double death_prob(Model m, std::span<const double> p, int z) {
    double h = cumulative_hazard(m, p, z);
    if (std::isnan(h)) return h;
    if (h < 0.0) {
        if (h > -1e-12) h = 0.0;
        else return std::numeric_limits<double>::quiet_NaN();
    }
    return -std::expm1(-h);
}

/// S(z_first) = 1; S(z+1) = S(z) (1 - q_z).  Returns count+1 values.
inline std::vector<double> survival_curve(Model m, std::span<const double> p,
                                          int z_first, int count) {
    std::vector<double> s(static_cast<std::size_t>(count) + 1);
    s[0] = 1.0;
    for (int i = 0; i < count; ++i)
        s[static_cast<std::size_t>(i) + 1] =
            s[static_cast<std::size_t>(i)] *
            (1.0 - death_prob(m, p, z_first + i));
    return s;
}

// ---------------------------------------------------------------------------
// Starting values

/// Documented fallback starts (optimizer scale), used when the data are too
/// degenerate for the per-model heuristic.  Chosen to put the hazard in a
/// plausible old-age range over z in [1, 25].
inline std::vector<double> default_start(Model m) {
    const double la = std::log(0.07);
    switch (m) {
        case Model::gompertz: return {la, 0.09};
        case Model::kannisto: return {la, std::log(0.09)};
        case Model::weibull: return {la, std::log(1.7)};
        case Model::makeham: return {la, 0.09, std::log(1e-5)};
        case Model::beard: return {la, std::log(0.09), std::log(0.05)};
        case Model::logquad: return {la, 0.09, 0.0};
        case Model::logistic:
            return {la, std::log(0.09), std::log(1e-4), std::log(0.05)};
        case Model::perks:
            return {la, std::log(0.09), std::log(1e-4), std::log(0.05)};
        case Model::lynchbrown:
            return {0.4, std::log(0.32), std::log(0.1), 12.0};
    }
    return {};
}

namespace detail {

struct RatePoints {
    std::vector<double> z, m, n;  // usable rows with M > 0
};

inline RatePoints usable_rates(const CohortDataset& d) {
    RatePoints pts;
    const CentralRates rates = central_death_rates(d);
    for (std::size_t i = 0; i < rates.rows.size(); ++i) {
        const auto& r = rates.rows[i];
        if (r.undefined || !(r.rate > 0.0)) continue;
        pts.z.push_back(static_cast<double>(r.age - d.age_offset));
        pts.m.push_back(r.rate);
        pts.n.push_back(static_cast<double>(d.rows[i].survivors));
    }
    return pts;
}

inline double clamp(double v, double lo, double hi) {
    return std::min(std::max(v, lo), hi);
}

inline double logit(double p) {
    const double c = clamp(p, 1e-9, 1.0 - 1e-9);
    return std::log(c / (1.0 - c));
}

struct SigmoidSummary {
    double m_min = 0.0, m_max = 0.0;
    double z_inf = 0.0;   // age index where the fitted curve crosses the
                          // midpoint of the observed rate range
    double slope = 0.0;   // slope of the fitted curve at z_inf
    bool ok = false;
};

/// Exposure-weighted logit-linear fit of the central rates, summarized by
/// the crude inflection point and slope used by the logistic-family and
/// Lynch-Brown heuristics.
inline SigmoidSummary sigmoid_summary(const RatePoints& pts) {
    SigmoidSummary out;
    if (pts.z.size() < 2) return out;
    std::vector<double> ones(pts.z.size(), 1.0), y(pts.z.size());
    for (std::size_t i = 0; i < pts.z.size(); ++i) y[i] = logit(pts.m[i]);
    std::vector<double> beta;
    try {
        beta = weighted_least_squares({ones, pts.z}, y, pts.n);
    } catch (const std::exception&) {
        return out;
    }
    const double a = beta[0], b = beta[1];
    if (!(b > 0.0) || !std::isfinite(a)) return out;
    out.m_min = *std::min_element(pts.m.begin(), pts.m.end());
    out.m_max = *std::max_element(pts.m.begin(), pts.m.end());
    const double mid = 0.5 * (out.m_min + out.m_max);
    out.z_inf = (logit(mid) - a) / b;
    const double p = sigmoid(a + b * out.z_inf);
    out.slope = b * p * (1.0 - p);
    out.ok = std::isfinite(out.z_inf) && out.slope > 0.0;
    return out;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return !v.empty();
}

}  // namespace detail

/// Per-model starting-value heuristic (optimizer scale).  Falls back to
/// default_start when the rates are too degenerate to regress on.
inline std::vector<double> heuristic_start(Model m, const CohortDataset& d) {
    const auto pts = detail::usable_rates(d);
    const std::size_t k = static_cast<std::size_t>(param_count(m));
    if (pts.z.size() < k) return default_start(m);

    std::vector<double> ones(pts.z.size(), 1.0);
    std::vector<double> theta;
    try {
        switch (m) {
            case Model::gompertz: {
                // log M = a + b z
                std::vector<double> y(pts.m.size());
                for (std::size_t i = 0; i < y.size(); ++i)
                    y[i] = std::log(pts.m[i]);
                auto b = weighted_least_squares({ones, pts.z}, y, {});
                theta = {b[0], b[1]};
                break;
            }
            case Model::makeham: {
                const double gamma0 = 1e-5;
                std::vector<double> y(pts.m.size());
                for (std::size_t i = 0; i < y.size(); ++i)
                    y[i] = std::log(std::max(pts.m[i] - gamma0, 1e-12));
                auto b = weighted_least_squares({ones, pts.z}, y, {});
                theta = {b[0], b[1], std::log(gamma0)};
                break;
            }
            case Model::logquad: {
                std::vector<double> z2(pts.z.size()), y(pts.m.size());
                for (std::size_t i = 0; i < y.size(); ++i) {
                    z2[i] = pts.z[i] * pts.z[i];
                    y[i] = std::log(pts.m[i]);
                }
                auto b = weighted_least_squares({ones, pts.z, z2}, y, {});
                theta = {b[0], b[1], b[2]};
                break;
            }
            case Model::weibull: {
                // log M = a + b log z; alpha0 = e^a, beta0 = b + 1
                std::vector<double> lz(pts.z.size()), y(pts.m.size());
                for (std::size_t i = 0; i < y.size(); ++i) {
                    lz[i] = std::log(pts.z[i]);
                    y[i] = std::log(pts.m[i]);
                }
                auto b = weighted_least_squares({ones, lz}, y, {});
                if (!(b[1] + 1.0 > 0.0)) return default_start(m);
                theta = {b[0], std::log(b[1] + 1.0)};
                break;
            }
            case Model::kannisto: {
                // logit-linear regression of M on z
                std::vector<double> y(pts.m.size());
                for (std::size_t i = 0; i < y.size(); ++i)
                    y[i] = detail::logit(pts.m[i]);
                auto b = weighted_least_squares({ones, pts.z}, y, pts.n);
                if (!(b[1] > 0.0)) return default_start(m);
                theta = {b[0], std::log(b[1])};
                break;
            }
            case Model::beard:
            case Model::logistic:
            case Model::perks: {
                const auto s = detail::sigmoid_summary(pts);
                if (!s.ok || !(s.m_max > 0.0)) return default_start(m);
                const double beta0 =
                    detail::clamp(4.0 * s.slope / s.m_max, 1e-4, 5.0);
                const double delta0 =
                    detail::clamp(std::exp(-beta0 * s.z_inf), 1e-8, 1e8);
                const double alpha0 = delta0 * s.m_max;
                if (m == Model::beard) {
                    theta = {std::log(alpha0), std::log(beta0),
                             std::log(delta0)};
                } else {
                    const double gamma0 = std::max(
                        s.m_min - alpha0 / (1.0 + delta0), 1e-6);
                    theta = {std::log(alpha0), std::log(beta0),
                             std::log(gamma0), std::log(delta0)};
                }
                break;
            }
            case Model::lynchbrown: {
                const auto s = detail::sigmoid_summary(pts);
                if (!s.ok || !(s.m_max > 0.0)) return default_start(m);
                const double beta0 = std::max(s.m_max / M_PI, 1e-8);
                const double gamma0 = std::max(s.slope, 1e-8);
                const double delta0 = s.z_inf;
                // alpha chosen so the hazard stays positive over the data
                const double z_min = pts.z.front();
                const double low = beta0 * std::atan(gamma0 * (z_min - delta0));
                const double alpha0 = std::max(
                    0.5 * (s.m_min + s.m_max), 1e-8 - low);
                theta = {alpha0, std::log(beta0), std::log(gamma0), delta0};
                break;
            }
        }
    } catch (const std::exception&) {
        return default_start(m);
    }
    if (!detail::all_finite(theta)) return default_start(m);
    return theta;
}

/// n uniform draws from the per-coordinate box theta_h +- max(1, |theta_h|),
/// one derived stream per start so results are order-independent.
inline std::vector<std::vector<double>> random_starts(
    Model m, std::span<const double> theta_h, int n, std::uint64_t seed) {
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(std::max(n, 0)));
    for (int i = 0; i < n; ++i) {
        Stream rng = derive_stream(seed, 0x57A7u, static_cast<std::uint64_t>(
                                                      static_cast<int>(m)),
                                   static_cast<std::uint64_t>(i));
        std::vector<double> t(theta_h.size());
        for (std::size_t j = 0; j < t.size(); ++j) {
            const double w = std::max(1.0, std::abs(theta_h[j]));
            t[j] = theta_h[j] + rng.next_double(-w, w);
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace hazfit
