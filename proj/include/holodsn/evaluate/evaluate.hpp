#pragma once

#include "holodsn/evaluate/centroids.hpp"
#include "holodsn/evaluate/jaccard.hpp"
#include "holodsn/evaluate/match.hpp"
#include "holodsn/evaluate/segment.hpp"

namespace holodsn {

/// Probability volume → clusters → centroids → matched against the particle list.
inline MatchReport evaluate_volume(const RealVolume& prob, const ParticleField& truth,
                                   const SegmentOptions& seg = {}, const Gate& gate = {}) {
    const auto clusters = segment_volume(prob, seg);
    return match_and_label(extract_centroids(clusters, prob.grid), particle_centroids(truth), gate);
}

}  // namespace holodsn
