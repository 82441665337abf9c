#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written as plain double loops over the
// contracts, not by calling the code under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <siftfuse/evaluation.hpp>
#include <siftfuse/gaussian.hpp>
#include <siftfuse/sift.hpp>

namespace oracle {

// ---------------------------------------------------------------------------
// Dense 2-D convolution with an isotropic Gaussian, symmetric borders.
// ---------------------------------------------------------------------------

inline siftfuse::Raster gaussian_blur_2d(const siftfuse::Raster& src, double sigma) {
    if (sigma <= 1e-6) return src;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int size = 2 * radius + 1;
    std::vector<double> kernel(static_cast<std::size_t>(size) * size);
    double sum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            kernel[(dy + radius) * size + (dx + radius)] = w;
            sum += w;
        }
    for (auto& w : kernel) w /= sum;

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };

    siftfuse::Raster dst(src.w, src.h);
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx)
                    acc += kernel[(dy + radius) * size + (dx + radius)] *
                           src.at(reflect(x + dx, src.w), reflect(y + dy, src.h));
            dst.at(x, y) = static_cast<float>(acc);
        }
    return dst;
}

// ---------------------------------------------------------------------------
// Descriptor-set matching by exhaustive double loops.
// ---------------------------------------------------------------------------

inline double pair_distance(const siftfuse::Keypoint& a, const siftfuse::Keypoint& b) {
    double acc = 0.0;
    for (int i = 0; i < siftfuse::kDescriptorSize; ++i) {
        const double d = static_cast<double>(a.descriptor[i]) - b.descriptor[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double directed_min_mean(std::span<const siftfuse::Keypoint> from,
                                std::span<const siftfuse::Keypoint> to) {
    double total = 0.0;
    for (const auto& a : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& b : to) best = std::min(best, pair_distance(a, b));
        total += best;
    }
    return total / from.size();
}

inline double modified_hausdorff(std::span<const siftfuse::Keypoint> a,
                                 std::span<const siftfuse::Keypoint> b) {
    return std::max(directed_min_mean(a, b), directed_min_mean(b, a));
}

// ---------------------------------------------------------------------------
// Dempster combination by focal-set enumeration. Masses are indexed by the
// subset bitmask over the frame {genuine=bit0, impostor=bit1}.
// ---------------------------------------------------------------------------

using SubsetMass = std::array<double, 4>;

inline SubsetMass combine_by_enumeration(const SubsetMass& a, const SubsetMass& b) {
    SubsetMass out{0.0, 0.0, 0.0, 0.0};
    double conflict = 0.0;
    for (unsigned s1 = 0; s1 < 4; ++s1)
        for (unsigned s2 = 0; s2 < 4; ++s2) {
            const double product = a[s1] * b[s2];
            const unsigned inter = s1 & s2;
            if (inter == 0)
                conflict += product;
            else
                out[inter] += product;
        }
    if (conflict >= 1.0 - 1e-12)
        throw std::domain_error("total conflict");
    for (auto& m : out) m /= 1.0 - conflict;
    out[0] = 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Equal-error-rate by brute-force threshold sweep.
// ---------------------------------------------------------------------------

struct BruteEer {
    double eer_percent;
    double far_percent;
    double frr_percent;
    double threshold;
};

inline BruteEer brute_force_eer(const siftfuse::ScoreMatrix& matrix,
                                siftfuse::Polarity polarity) {
    std::vector<double> thresholds;
    for (const auto& e : matrix.entries) thresholds.push_back(e.score);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    if (polarity == siftfuse::Polarity::similarity)
        std::reverse(thresholds.begin(), thresholds.end());

    BruteEer best{0, 0, 0, 0};
    double best_gap = std::numeric_limits<double>::infinity();
    for (double t : thresholds) {
        std::size_t genuine_total = 0, genuine_rejected = 0;
        std::size_t impostor_total = 0, impostor_accepted = 0;
        for (const auto& e : matrix.entries) {
            const bool accept = polarity == siftfuse::Polarity::distance
                                    ? e.score <= t
                                    : e.score >= t;
            if (e.genuine()) {
                ++genuine_total;
                if (!accept) ++genuine_rejected;
            } else {
                ++impostor_total;
                if (accept) ++impostor_accepted;
            }
        }
        const double far = static_cast<double>(impostor_accepted) / impostor_total;
        const double frr = static_cast<double>(genuine_rejected) / genuine_total;
        const double gap = std::abs(far - frr);
        if (gap < best_gap) {
            best_gap = gap;
            best = BruteEer{(far + frr) / 2.0 * 100.0, far * 100.0, frr * 100.0, t};
        }
    }
    return best;
}

} // namespace oracle
