#pragma once

// Random in-domain parameter draws for the oracle tests.  Ranges keep the
// hazard positive and of plausible old-age magnitude so the reference
// integrals are well conditioned.

#include <cmath>
#include <vector>

#include "hazfit/models.hpp"
#include "hazfit/rng.hpp"

namespace sampling {

inline double log_uniform(hazfit::Stream& rng, double lo, double hi) {
    return std::exp(rng.next_double(std::log(lo), std::log(hi)));
}

inline std::vector<double> random_natural(hazfit::Model m,
                                          hazfit::Stream& rng) {
    using hazfit::Model;
    switch (m) {
        case Model::gompertz:
            return {log_uniform(rng, 1e-4, 0.3), rng.next_double(0.01, 0.25)};
        case Model::kannisto:
            return {log_uniform(rng, 1e-4, 0.3), rng.next_double(0.01, 0.25)};
        case Model::weibull:
            return {log_uniform(rng, 1e-4, 0.2), rng.next_double(0.5, 4.0)};
        case Model::makeham:
            return {log_uniform(rng, 1e-4, 0.3), rng.next_double(0.01, 0.25),
                    log_uniform(rng, 1e-6, 0.05)};
        case Model::beard:
            return {log_uniform(rng, 1e-4, 0.3), rng.next_double(0.01, 0.25),
                    log_uniform(rng, 1e-3, 2.0)};
        case Model::logquad: {
            // covers both the erf branch (c < -1e-8) and the series-free
            // quadrature branch (c >= -1e-8)
            const double c = rng.next_double(-0.008, 0.004);
            return {rng.next_double(-7.0, -1.0), rng.next_double(0.01, 0.2),
                    c};
        }
        case Model::logistic:
            return {log_uniform(rng, 1e-4, 0.3), rng.next_double(0.01, 0.25),
                    log_uniform(rng, 1e-6, 0.05), log_uniform(rng, 1e-3, 2.0)};
        case Model::perks:
            return {log_uniform(rng, 1e-4, 0.3), rng.next_double(0.01, 0.25),
                    log_uniform(rng, 1e-6, 0.05), log_uniform(rng, 1e-3, 2.0)};
        case Model::lynchbrown: {
            // beta < 2 alpha / pi keeps the hazard positive everywhere
            const double alpha = rng.next_double(0.05, 0.5);
            const double beta =
                rng.next_double(0.1, 0.9) * (2.0 * alpha / M_PI);
            return {alpha, beta, log_uniform(rng, 0.02, 1.0),
                    rng.next_double(2.0, 22.0)};
        }
    }
    return {};
}

inline int random_age_index(hazfit::Stream& rng) {
    return 1 + static_cast<int>(rng.next_below(25));  // z in 1..25
}

}  // namespace sampling
