#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"

namespace holodsn {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Population mean and standard deviation (two-pass).
inline MeanStd mean_std(std::span<const double> v) {
    if (v.empty()) throw DegenerateInputError("empty input");
    double s = 0.0;
    for (double x : v) s += x;
    const double mean = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

/// (v − µ) / σ over the whole array. Throws when all values are equal.
inline void standardize_in_place(std::span<double> v, const char* what) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (v.empty() || *lo == *hi) {
        throw DegenerateInputError(std::string(what) + " has zero standard deviation");
    }
    const auto ms = mean_std(v);
    if (!(ms.std > 0.0)) throw DegenerateInputError(std::string(what) + " has zero standard deviation");
    for (double& x : v) x = (x - ms.mean) / ms.std;
}

/// Amplitude of a complex volume, standardized over the full volume.
inline RealVolume normalize_volume(const ComplexVolume& v) {
    RealVolume out(v.grid);
    for (std::size_t n = 0; n < v.size(); ++n) out.data[n] = std::abs(v.data[n]);
    standardize_in_place(out.data, "volume");
    return out;
}

/// Standardizes an already-real volume (e.g. to re-normalize a normalized one).
inline RealVolume normalize_volume(const RealVolume& v) {
    RealVolume out = v;
    standardize_in_place(out.data, "volume");
    return out;
}

/// Standardizes the full hologram; crop patches afterwards.
inline RealVolume normalize_hologram(const Hologram& h) {
    RealVolume out = h.intensity;
    standardize_in_place(out.data, "hologram");
    return out;
}

}  // namespace holodsn
