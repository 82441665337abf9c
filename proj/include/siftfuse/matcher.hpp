#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "error.hpp"
#include "landmarks.hpp"
#include "sift.hpp"

namespace siftfuse {

enum class MatchKind { local, global };
enum class MissingRegionPolicy { strict, skip };

struct MatcherOptions {
    MissingRegionPolicy missing_region = MissingRegionPolicy::strict;
    // Lowe's ratio test on the per-keypoint nearest match; off by default.
    bool ratio_test = false;
    double ratio_threshold = 0.8;
};

struct MatchScore {
    double value = 0.0;
    MatchKind kind = MatchKind::local;
    // per-region distances, local kind only; empty optionals mark regions
    // skipped under the skip policy
    std::array<std::optional<double>, kRegionCount> per_region{};
};

namespace detail {

// Mean over probe keypoints of the minimum descriptor distance into the
// gallery set. With the ratio test on, probe keypoints whose best/second
// distance ratio exceeds the threshold are left out of the mean (all of
// them failing falls back to the plain mean).
inline double directed_min_mean(std::span<const Keypoint> probe,
                                std::span<const Keypoint> gallery,
                                const MatcherOptions& opt) {
    double sum = 0.0;
    std::size_t used = 0;
    double fallback_sum = 0.0;
    for (const auto& p : probe) {
        double best = std::numeric_limits<double>::infinity();
        double second = std::numeric_limits<double>::infinity();
        for (const auto& g : gallery) {
            const double d = descriptor_distance(p, g);
            if (d < best) {
                second = best;
                best = d;
            } else if (d < second) {
                second = d;
            }
        }
        fallback_sum += best;
        if (opt.ratio_test && gallery.size() > 1 &&
            best > opt.ratio_threshold * second)
            continue;
        sum += best;
        ++used;
    }
    if (used == 0) return fallback_sum / probe.size();
    return sum / used;
}

} // namespace detail

// Distance between a pair of same-name regions: mean over probe keypoints
// of the nearest gallery descriptor distance. Unit-norm descriptors bound
// every pair distance by 2.
inline double region_distance(std::span<const Keypoint> probe_region,
                              std::span<const Keypoint> gallery_region,
                              const MatcherOptions& opt = {}) {
    if (probe_region.empty() || gallery_region.empty())
        throw MissingRegion("region_distance: empty keypoint list");
    return detail::directed_min_mean(probe_region, gallery_region, opt);
}

// Sum-rule fusion of the four region distances. Under the skip policy a
// region empty on either side is left out and the sum is rescaled by 4/k to
// stay comparable.
inline MatchScore local_match(const RegionFeatures& probe, const RegionFeatures& gallery,
                              const MatcherOptions& opt = {}) {
    MatchScore score;
    score.kind = MatchKind::local;
    double sum = 0.0;
    int available = 0;
    for (Region r : kAllRegions) {
        const int idx = static_cast<int>(r);
        const auto& p = probe.of(r);
        const auto& g = gallery.of(r);
        if (p.empty() || g.empty()) {
            if (opt.missing_region == MissingRegionPolicy::strict)
                throw MissingRegion(std::string("local_match: region ") +
                                    region_name(r) + " is empty");
            continue;
        }
        const double d = region_distance(p, g, opt);
        score.per_region[idx] = d;
        sum += d;
        ++available;
    }
    if (available == 0)
        throw MissingRegion("local_match: no region available on both sides");
    score.value = sum * (static_cast<double>(kRegionCount) / available);
    return score;
}

// The four region lists appended in fixed order (left_eye, right_eye, nose,
// mouth).
inline std::vector<Keypoint> concat_features(const RegionFeatures& regions) {
    if (regions.all_empty())
        throw EmptyFeatureSet("concat_features: all four regions are empty");
    std::vector<Keypoint> out;
    out.reserve(regions.total());
    for (Region r : kAllRegions)
        out.insert(out.end(), regions.of(r).begin(), regions.of(r).end());
    return out;
}

// Modified Hausdorff distance over the concatenated sets: the mean of the
// minimum pair distances in each direction, symmetrized by max.
inline MatchScore global_match(std::span<const Keypoint> probe_set,
                               std::span<const Keypoint> gallery_set,
                               const MatcherOptions& opt = {}) {
    if (probe_set.empty() || gallery_set.empty())
        throw EmptyFeatureSet("global_match: empty feature set");
    MatchScore score;
    score.kind = MatchKind::global;
    const double forward = detail::directed_min_mean(probe_set, gallery_set, opt);
    const double backward = detail::directed_min_mean(gallery_set, probe_set, opt);
    score.value = std::max(forward, backward);
    return score;
}

} // namespace siftfuse
