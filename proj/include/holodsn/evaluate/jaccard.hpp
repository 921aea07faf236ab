#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/evaluate/match.hpp"

namespace holodsn {

inline constexpr std::size_t kJiBinSlices = 10;

/// TP / (TP + FP + FN); nullopt when all three are zero. Counts may be means.
inline std::optional<double> jaccard_index(double tp, double fp, double fn) {
    const double denom = tp + fp + fn;
    if (denom == 0.0) return std::nullopt;
    return tp / denom;
}

struct BinCounts {
    std::size_t tp = 0, fp = 0, fn = 0;
    [[nodiscard]] bool empty() const { return tp + fp + fn == 0; }
};

struct JiBin {
    double bin_start_um = 0.0;
    std::size_t volumes = 0;  ///< volumes contributing a JI value; 0 marks an absent bin
    double mean_ji = std::nan("");
    double std_ji = std::nan("");  ///< population std across volumes
    double tp = 0.0, fp = 0.0, fn = 0.0;  ///< mean counts per volume
    [[nodiscard]] bool present() const { return volumes > 0; }
};

struct JiCurve {
    std::vector<JiBin> bins;
};

/// Depth bin of a z position (µm): slice floor(z/dz), clamped, divided by the bin width.
inline std::size_t depth_bin(double z, std::size_t nz, double dz, std::size_t bin_slices) {
    const double s = std::floor(z / dz);
    const auto slice = s <= 0.0 ? std::size_t{0} : std::min(nz - 1, static_cast<std::size_t>(s));
    return slice / bin_slices;
}

/// Per-bin counts for one report: TP and FN by ground-truth depth, FP by predicted depth.
inline std::vector<BinCounts> bin_counts(const MatchReport& r, std::size_t nz, double dz,
                                         std::size_t bin_slices = kJiBinSlices) {
    if (nz == 0 || bin_slices == 0 || !(dz > 0.0)) throw ConfigError("jaccard binning needs nz, dz, bin > 0");
    std::vector<BinCounts> out((nz + bin_slices - 1) / bin_slices);
    for (std::size_t j = 0; j < r.gt.size(); ++j) {
        auto& b = out[depth_bin(r.gt[j].position[2], nz, dz, bin_slices)];
        (r.gt_labels[j] == MatchLabel::TP ? b.tp : b.fn) += 1;
    }
    for (std::size_t i = 0; i < r.pred.size(); ++i) {
        if (r.pred_labels[i] == MatchLabel::FP) ++out[depth_bin(r.pred[i].position[2], nz, dz, bin_slices)].fp;
    }
    return out;
}

/// JI per volume and bin, then mean / population std across the volumes in which the
/// bin is non-empty. Bins empty in every volume are absent.
inline JiCurve jaccard_curve(const std::vector<MatchReport>& reports, std::size_t nz, double dz,
                             std::size_t bin_slices = kJiBinSlices) {
    const std::size_t nbins = (nz + bin_slices - 1) / bin_slices;
    std::vector<std::vector<double>> ji(nbins);
    JiCurve curve;
    curve.bins.resize(nbins);
    for (const auto& r : reports) {
        const auto counts = bin_counts(r, nz, dz, bin_slices);
        for (std::size_t b = 0; b < nbins; ++b) {
            curve.bins[b].tp += static_cast<double>(counts[b].tp);
            curve.bins[b].fp += static_cast<double>(counts[b].fp);
            curve.bins[b].fn += static_cast<double>(counts[b].fn);
            if (auto v = jaccard_index(counts[b].tp, counts[b].fp, counts[b].fn)) ji[b].push_back(*v);
        }
    }
    const double nvol = reports.empty() ? 1.0 : static_cast<double>(reports.size());
    for (std::size_t b = 0; b < nbins; ++b) {
        auto& bin = curve.bins[b];
        bin.bin_start_um = static_cast<double>(b * bin_slices) * dz;
        bin.tp /= nvol;
        bin.fp /= nvol;
        bin.fn /= nvol;
        bin.volumes = ji[b].size();
        if (ji[b].empty()) continue;
        double mean = 0.0;
        for (double v : ji[b]) mean += v;
        mean /= static_cast<double>(ji[b].size());
        double var = 0.0;
        for (double v : ji[b]) var += (v - mean) * (v - mean);
        bin.mean_ji = mean;
        bin.std_ji = std::sqrt(var / static_cast<double>(ji[b].size()));
    }
    return curve;
}

}  // namespace holodsn
