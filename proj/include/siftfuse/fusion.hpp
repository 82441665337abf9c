#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "dempster.hpp"
#include "error.hpp"

namespace siftfuse {

// Min-max normalization range, fitted on the training partition.
struct NormalizationStats {
    double min_score = 0.0;
    double max_score = 1.0;
};

inline NormalizationStats fit_minmax(std::span<const double> training_scores) {
    if (training_scores.size() < 2)
        throw DegenerateRange("fit_minmax: need at least two training scores");
    const auto [lo, hi] =
        std::minmax_element(training_scores.begin(), training_scores.end());
    if (!(*hi > *lo))
        throw DegenerateRange("fit_minmax: all training scores are equal");
    return NormalizationStats{*lo, *hi};
}

// Maps a raw score into [0,1]; test scores outside the training range clamp.
inline double normalize(double score, const NormalizationStats& stats) {
    const double t = (score - stats.min_score) / (stats.max_score - stats.min_score);
    return std::clamp(t, 0.0, 1.0);
}

struct FusionConfig {
    double alpha = 0.9;         // fraction of belief committed; 1-alpha stays on theta
    double threshold_psi = 0.5; // acceptance threshold on the combined genuine mass
};

// Converts a normalized distance into a discounted simple-support mass:
// similarity s = 1 - distance, alpha*s on genuine, alpha*(1-s) on impostor,
// 1-alpha on the whole frame.
inline ds::MassFunction score_to_mass(double normalized_distance, double alpha) {
    const double s = 1.0 - normalized_distance;
    ds::MassFunction mass;
    mass.genuine = alpha * s;
    mass.impostor = alpha * (1.0 - s);
    mass.theta = 1.0 - alpha;
    return mass;
}

struct FusedDecision {
    ds::MassFunction mass;
    bool accepted = false;
};

// Normalizes both matcher distances, converts them into mass functions,
// combines with the orthogonal sum, and accepts when the combined genuine
// mass reaches the threshold.
inline FusedDecision fuse_and_decide(double local_distance, double global_distance,
                                     const NormalizationStats& stats_local,
                                     const NormalizationStats& stats_global,
                                     const FusionConfig& config) {
    const auto m_local = score_to_mass(normalize(local_distance, stats_local), config.alpha);
    const auto m_global = score_to_mass(normalize(global_distance, stats_global), config.alpha);
    FusedDecision d;
    d.mass = ds::dempster_combine(m_local, m_global);
    d.accepted = d.mass.genuine >= config.threshold_psi;
    return d;
}

} // namespace siftfuse
