#pragma once

#include <cmath>
#include <vector>

#include "holodsn/evaluate/assignment.hpp"
#include "holodsn/evaluate/centroids.hpp"

namespace holodsn {

/// Ellipsoidal acceptance region, semi-axes in µm.
struct Gate {
    double a = 2.0;  ///< x
    double b = 2.0;  ///< y
    double c = 6.0;  ///< z
};

/// Gate-scaled distance; 1 is the gate surface.
inline double scaled_distance(const Vec3& p, const Vec3& q, const Gate& g) {
    const double dx = (p[0] - q[0]) / g.a, dy = (p[1] - q[1]) / g.b, dz = (p[2] - q[2]) / g.c;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

enum class MatchLabel { TP, FP, FN };

struct MatchedPair {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double distance = 0.0;
};

struct MatchReport {
    std::vector<Centroid> pred;
    std::vector<Centroid> gt;
    std::vector<MatchLabel> pred_labels;  ///< TP or FP
    std::vector<MatchLabel> gt_labels;    ///< TP or FN
    std::vector<MatchedPair> pairs;       ///< gated (TP) pairs
    std::size_t tp = 0, fp = 0, fn = 0;
    Gate gate{};
    double assignment_cost = 0.0;  ///< total cost of the optimal assignment, before gating
};

/// Optimal assignment on the gate-scaled distance, then gating: assigned pairs with
/// d ≤ 1 are true positives, everything else is a false positive (prediction) or a
/// false negative (ground truth).
inline MatchReport match_and_label(const std::vector<Centroid>& pred, const std::vector<Centroid>& gt,
                                   const Gate& gate = {}) {
    MatchReport r;
    r.pred = pred;
    r.gt = gt;
    r.gate = gate;
    r.pred_labels.assign(pred.size(), MatchLabel::FP);
    r.gt_labels.assign(gt.size(), MatchLabel::FN);
    std::vector<double> cost(pred.size() * gt.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t j = 0; j < gt.size(); ++j) {
            cost[i * gt.size() + j] = scaled_distance(pred[i].position, gt[j].position, gate);
        }
    }
    const auto assign = solve_assignment(cost, pred.size(), gt.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (assign[i] < 0) continue;
        const auto j = static_cast<std::size_t>(assign[i]);
        const double d = cost[i * gt.size() + j];
        r.assignment_cost += d;
        if (d <= 1.0) {
            r.pred_labels[i] = MatchLabel::TP;
            r.gt_labels[j] = MatchLabel::TP;
            r.pairs.push_back({i, j, d});
        }
    }
    r.tp = r.pairs.size();
    r.fp = pred.size() - r.tp;
    r.fn = gt.size() - r.tp;
    return r;
}

}  // namespace holodsn
