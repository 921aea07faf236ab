#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "holodsn/core/errors.hpp"

namespace holodsn {

using Alpha = std::array<double, 3>;

struct WeightStats {
    std::size_t count = 0;
    Alpha mean{};
    Alpha std{};  ///< population convention
};

inline void check_alpha(const Alpha& a, double tol = 1e-6) {
    double s = 0.0;
    for (double v : a) {
        if (!(v >= -tol)) throw ShapeError("synthesis weight below zero");
        s += v;
    }
    if (!(std::abs(s - 1.0) <= tol)) throw ShapeError("synthesis weights do not sum to one");
}

/// Componentwise mean / std per group. Empty groups are omitted.
inline std::map<std::string, WeightStats> weight_statistics(const std::map<std::string, std::vector<Alpha>>& groups) {
    std::map<std::string, WeightStats> out;
    for (const auto& [name, samples] : groups) {
        if (samples.empty()) continue;
        WeightStats st;
        st.count = samples.size();
        const double n = static_cast<double>(samples.size());
        for (const auto& a : samples) {
            check_alpha(a);
            for (int c = 0; c < 3; ++c) st.mean[c] += a[c];
        }
        for (auto& m : st.mean) m /= n;
        for (const auto& a : samples) {
            for (int c = 0; c < 3; ++c) st.std[c] += (a[c] - st.mean[c]) * (a[c] - st.mean[c]);
        }
        for (auto& s : st.std) s = std::sqrt(s / n);
        out.emplace(name, st);
    }
    return out;
}

}  // namespace holodsn
