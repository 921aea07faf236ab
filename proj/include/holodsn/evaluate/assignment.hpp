#pragma once

#include <limits>
#include <vector>

#include "holodsn/core/errors.hpp"

namespace holodsn {

/// Minimum-cost rectangular assignment (Hungarian method with potentials,
/// O(n²m)). `cost` is rows × cols, row-major. Every row of the smaller side is
/// matched; the result maps row → column, or −1 for rows left unmatched when
/// rows > cols.
inline std::vector<long> solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
    if (cost.size() != rows * cols) throw ShapeError("assignment: cost matrix size mismatch");
    if (rows == 0 || cols == 0) return std::vector<long>(rows, -1);
    const bool transpose = rows > cols;
    const std::size_t n = transpose ? cols : rows, m = transpose ? rows : cols;
    auto c = [&](std::size_t i, std::size_t j) { return transpose ? cost[j * cols + i] : cost[i * cols + j]; };

    // 1-based arrays as in the classical formulation; p[j] = row matched to column j.
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<long> out(rows, -1);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] == 0) continue;
        if (transpose) {
            out[j - 1] = static_cast<long>(p[j] - 1);
        } else {
            out[p[j] - 1] = static_cast<long>(j - 1);
        }
    }
    return out;
}

}  // namespace holodsn
