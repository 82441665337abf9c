#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "sift.hpp"

namespace siftfuse {

enum class Region : int { left_eye = 0, right_eye = 1, nose = 2, mouth = 3 };
inline constexpr int kRegionCount = 4;
inline constexpr std::array<Region, kRegionCount> kAllRegions = {
    Region::left_eye, Region::right_eye, Region::nose, Region::mouth};

inline const char* region_name(Region r) {
    switch (r) {
        case Region::left_eye: return "left_eye";
        case Region::right_eye: return "right_eye";
        case Region::nose: return "nose";
        case Region::mouth: return "mouth";
    }
    return "?";
}

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// The four facial-landmark positions in working-frame pixels. "Left" and
// "right" refer to image coordinates, so left_eye.x < right_eye.x.
struct LandmarkSet {
    Point left_eye, right_eye, nose, mouth;

    const Point& at(Region r) const {
        switch (r) {
            case Region::left_eye: return left_eye;
            case Region::right_eye: return right_eye;
            case Region::nose: return nose;
            case Region::mouth: return mouth;
        }
        return left_eye;
    }

    double interocular_distance() const {
        return std::hypot(right_eye.x - left_eye.x, right_eye.y - left_eye.y);
    }

    void validate(int width, int height) const {
        for (Region r : kAllRegions) {
            const Point& p = at(r);
            if (p.x < 0.0 || p.x > width - 1.0 || p.y < 0.0 || p.y > height - 1.0)
                throw InvariantViolation(std::string("landmark ") + region_name(r) +
                                         " outside image bounds");
        }
        if (!(left_eye.x < right_eye.x))
            throw InvariantViolation("landmarks: left_eye.x must be < right_eye.x");
    }
};

// Fallback geometry when no annotation file is available: eyes at 30%/70% of
// the width and 36% of the height, nose at 55%, mouth at 72%.
inline LandmarkSet default_landmarks(int width, int height) {
    LandmarkSet lm;
    lm.left_eye = {0.30 * width, 0.36 * height};
    lm.right_eye = {0.70 * width, 0.36 * height};
    lm.nose = {0.50 * width, 0.55 * height};
    lm.mouth = {0.50 * width, 0.72 * height};
    return lm;
}

// Annotation file: one image per line,
// `relative_path x_le y_le x_re y_re x_n y_n x_m y_m` in working-frame pixels.
inline std::map<std::string, LandmarkSet> load_landmarks(
    const std::filesystem::path& path, int width = kWorkingWidth,
    int height = kWorkingHeight) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open landmark file: " + path.string());

    std::map<std::string, LandmarkSet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::istringstream ss(line);
        std::string rel;
        LandmarkSet lm;
        if (!(ss >> rel >> lm.left_eye.x >> lm.left_eye.y >> lm.right_eye.x >>
              lm.right_eye.y >> lm.nose.x >> lm.nose.y >> lm.mouth.x >> lm.mouth.y))
            throw ParseError("landmarks: expected `path` plus 8 numbers", lineno);
        std::string extra;
        if (ss >> extra)
            throw ParseError("landmarks: trailing fields", lineno);
        lm.validate(width, height);
        out[rel] = lm;
    }
    return out;
}

// Per-region ROI radii in pixels, derived from the inter-ocular distance.
struct RegionRadii {
    std::array<double, kRegionCount> radius{};

    static RegionRadii from_interocular(const LandmarkSet& lm,
                                        double eye_fraction = 0.35,
                                        double nose_fraction = 0.35,
                                        double mouth_fraction = 0.50) {
        const double iod = lm.interocular_distance();
        RegionRadii r;
        r.radius[static_cast<int>(Region::left_eye)] = eye_fraction * iod;
        r.radius[static_cast<int>(Region::right_eye)] = eye_fraction * iod;
        r.radius[static_cast<int>(Region::nose)] = nose_fraction * iod;
        r.radius[static_cast<int>(Region::mouth)] = mouth_fraction * iod;
        return r;
    }
};

// Keypoints grouped by circular landmark region.
struct RegionFeatures {
    std::array<std::vector<Keypoint>, kRegionCount> regions;
    RegionRadii radii;

    const std::vector<Keypoint>& of(Region r) const {
        return regions[static_cast<int>(r)];
    }
    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& v : regions) n += v.size();
        return n;
    }
    bool all_non_empty() const {
        return std::all_of(regions.begin(), regions.end(),
                           [](const auto& v) { return !v.empty(); });
    }
    bool all_empty() const {
        return std::all_of(regions.begin(), regions.end(),
                           [](const auto& v) { return v.empty(); });
    }
};

// Assigns each keypoint to the region whose circle contains it; overlaps
// resolve to the nearest center, exact ties to the first region in the
// fixed order (left_eye, right_eye, nose, mouth). Keypoints covered by no
// circle are discarded.
inline RegionFeatures assign_regions(const std::vector<Keypoint>& keypoints,
                                     const LandmarkSet& landmarks,
                                     const RegionRadii& radii) {
    for (double r : radii.radius)
        if (!(r > 0.0)) throw Error("assign_regions: radii must be positive");

    RegionFeatures out;
    out.radii = radii;
    for (const auto& kp : keypoints) {
        int best = -1;
        double best_dist = 0.0;
        for (Region r : kAllRegions) {
            const int idx = static_cast<int>(r);
            const Point& c = landmarks.at(r);
            const double dist = std::hypot(kp.x - c.x, kp.y - c.y);
            if (dist > radii.radius[idx]) continue;
            if (best < 0 || dist < best_dist - 1e-12) {
                best = idx;
                best_dist = dist;
            }
        }
        if (best >= 0) out.regions[best].push_back(kp);
    }
    for (auto& v : out.regions)
        std::stable_sort(v.begin(), v.end(), [](const Keypoint& a, const Keypoint& b) {
            return std::make_tuple(a.y, a.x, a.scale) < std::make_tuple(b.y, b.x, b.scale);
        });
    return out;
}

} // namespace siftfuse
