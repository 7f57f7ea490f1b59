#pragma once

// Tiny weighted least squares, enough for the starting-value heuristics
// (at most three regressors).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hazfit {

/// Solve min_b sum_i w_i (y_i - X_i . b)^2 via normal equations.
/// `columns` holds the regressor columns (including the intercept column).
inline std::vector<double> weighted_least_squares(
    const std::vector<std::vector<double>>& columns,
    const std::vector<double>& y, const std::vector<double>& w) {
    const std::size_t k = columns.size();
    const std::size_t n = y.size();
    if (k == 0 || n < k)
        throw std::invalid_argument("least squares: not enough rows");

    // A = X'WX, rhs = X'Wy
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c < k; ++c)
                a[r][c] += wi * columns[r][i] * columns[c][i];
            a[r][k] += wi * columns[r][i] * y[i];
        }
    }

    // Gaussian elimination with partial pivoting
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        if (std::abs(a[col][col]) < 1e-300)
            throw std::runtime_error("least squares: singular design");
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= k; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> beta(k);
    for (std::size_t r = 0; r < k; ++r) beta[r] = a[r][k] / a[r][r];
    return beta;
}

}  // namespace hazfit
