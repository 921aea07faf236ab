#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace holodsn {

inline constexpr std::size_t kOtsuBins = 256;

/// Histogram range used for thresholding. `SliceMinMax` spans each slice's own
/// minimum and maximum; `Fixed` uses [lo, hi] for every slice (values outside are
/// clamped to the end bins).
struct OtsuRange {
    enum class Kind { SliceMinMax, Fixed } kind = Kind::SliceMinMax;
    double lo = 0.0;
    double hi = 1.0;
};

struct OtsuResult {
    bool degenerate = false;
    std::size_t bin = 0;     ///< last background bin; foreground is bin > this
    double threshold = 0.0;  ///< upper edge of `bin`
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] std::size_t bin_of(double v) const {
        const double t = (v - lo) / (hi - lo) * static_cast<double>(kOtsuBins);
        if (!(t > 0.0)) return 0;
        return std::min<std::size_t>(kOtsuBins - 1, static_cast<std::size_t>(t));
    }
    [[nodiscard]] bool foreground(double v) const { return !degenerate && bin_of(v) > bin; }
};

/// Otsu's threshold on a 256-bin histogram. Class levels are bin centers; the
/// boundary maximizing w0·w1·(µ0 − µ1)² wins, ties (relative 1e-12) going to the
/// lowest boundary. A slice with fewer than two distinct values (or an empty
/// fixed range) is degenerate and has no foreground.
inline OtsuResult otsu_threshold(std::span<const double> values, const OtsuRange& range = {}) {
    OtsuResult r;
    if (values.empty()) {
        r.degenerate = true;
        return r;
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (*mn == *mx) {
        r.degenerate = true;
        return r;
    }
    if (range.kind == OtsuRange::Kind::Fixed) {
        r.lo = range.lo;
        r.hi = range.hi;
    } else {
        r.lo = *mn;
        r.hi = *mx;
    }
    if (!(r.hi > r.lo)) {
        r.degenerate = true;
        return r;
    }
    std::array<double, kOtsuBins> hist{};
    for (double v : values) hist[r.bin_of(v)] += 1.0;
    const double width = (r.hi - r.lo) / static_cast<double>(kOtsuBins);
    auto level = [&](std::size_t b) { return r.lo + (static_cast<double>(b) + 0.5) * width; };
    const double n = static_cast<double>(values.size());
    double total = 0.0;
    for (std::size_t b = 0; b < kOtsuBins; ++b) total += hist[b] * level(b);

    double w0 = 0.0, s0 = 0.0, best = -1.0;
    std::size_t best_bin = 0;
    bool found = false;
    for (std::size_t t = 0; t + 1 < kOtsuBins; ++t) {
        w0 += hist[t];
        s0 += hist[t] * level(t);
        const double w1 = n - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = s0 / w0, m1 = (total - s0) / w1;
        const double var = (w0 / n) * (w1 / n) * (m0 - m1) * (m0 - m1);
        if (!found || var > best * (1.0 + 1e-12)) {
            best = var;
            best_bin = t;
            found = true;
        }
    }
    if (!found) {
        // Every value fell in one bin (possible with a fixed range).
        r.degenerate = true;
        return r;
    }
    r.bin = best_bin;
    r.threshold = r.lo + static_cast<double>(best_bin + 1) * width;
    return r;
}

}  // namespace holodsn
