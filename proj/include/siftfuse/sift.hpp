#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <vector>

#include "error.hpp"
#include "gaussian.hpp"
#include "image.hpp"

namespace siftfuse {

inline constexpr int kDescriptorSize = 128;
inline constexpr int kDescriptorGrid = 4;   // 4x4 spatial cells
inline constexpr int kDescriptorOriBins = 8;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct SiftParams {
    int octaves = 4;
    int scales_per_octave = 3;
    double base_sigma = 1.6;
    double contrast_threshold = 0.03;   // on [0,1] intensities
    double edge_ratio_threshold = 10.0; // principal-curvature ratio r
    int orientation_bins = 36;

    // blur assumed already present in the input image
    static constexpr double kInitialBlur = 0.5;
    // orientation window is 1.5x the keypoint scale
    static constexpr double kOrientationSigmaFactor = 1.5;
    // descriptor cell width is 3x the keypoint scale
    static constexpr double kDescriptorScaleFactor = 3.0;
    static constexpr double kDescriptorClip = 0.2;
    static constexpr double kPeakAcceptFraction = 0.8;
    static constexpr int kMaxRefineSteps = 5;
};

struct Keypoint {
    double x = 0.0;           // sub-pixel column, original image frame
    double y = 0.0;           // sub-pixel row
    double scale = 0.0;       // blur level in original-image pixels
    double orientation = 0.0; // radians in [0, 2pi)
    std::array<float, kDescriptorSize> descriptor{};
};

inline double descriptor_distance(const Keypoint& a, const Keypoint& b) {
    double acc = 0.0;
    for (int i = 0; i < kDescriptorSize; ++i) {
        const double d = static_cast<double>(a.descriptor[i]) - b.descriptor[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

struct ScaleSpacePyramids {
    std::vector<std::vector<Raster>> gauss; // per octave: scales_per_octave+3 levels
    std::vector<std::vector<Raster>> dog;   // per octave: scales_per_octave+2 levels
    int scales_per_octave = 3;
    double base_sigma = 1.6;

    int octaves() const { return static_cast<int>(gauss.size()); }

    // nominal blur of level s in the octave's pixel units
    double level_sigma(double level) const {
        return base_sigma * std::pow(2.0, level / scales_per_octave);
    }
};

// Candidate keypoint before orientation assignment; coordinates are in the
// octave's pixel units.
struct Candidate {
    int octave = 0;
    int level = 0;   // DoG level the extremum was found at
    int ix = 0;      // integer grid position after refinement
    int iy = 0;
    double x = 0.0;  // refined sub-pixel position
    double y = 0.0;
    double level_refined = 0.0;
    double scale_octave = 0.0; // blur in octave pixel units
    double response = 0.0;     // interpolated DoG value
};

struct OrientedCandidate {
    Candidate base;
    double orientation = 0.0;
};

// ---------------------------------------------------------------------------
// Scale space
// ---------------------------------------------------------------------------

inline ScaleSpacePyramids build_scale_space(const Image& image, const SiftParams& params) {
    if (image.width < 16 || image.height < 16)
        throw ImageTooSmall("build_scale_space: image must be at least 16x16");
    if (params.octaves < 1 || params.scales_per_octave < 1 || params.base_sigma <= 0.0)
        throw Error("build_scale_space: invalid SiftParams");

    const int s = params.scales_per_octave;
    const int levels = s + 3;

    // halving stops once the octave base would fall under 8 pixels
    int max_octaves = 1;
    for (int dim = std::min(image.width, image.height) / 2; dim >= 8; dim /= 2)
        ++max_octaves;
    const int octaves = std::min(params.octaves, max_octaves);

    ScaleSpacePyramids pyr;
    pyr.scales_per_octave = s;
    pyr.base_sigma = params.base_sigma;
    pyr.gauss.resize(octaves);
    pyr.dog.resize(octaves);

    Raster base = to_raster(image);
    for (int o = 0; o < octaves; ++o) {
        auto& stack = pyr.gauss[o];
        stack.reserve(levels);
        if (o == 0) {
            const double have = SiftParams::kInitialBlur;
            const double want = params.base_sigma;
            const double delta = std::sqrt(std::max(0.0, want * want - have * have));
            stack.push_back(gaussian_blur(base, delta));
        } else {
            // level s of the previous octave has blur 2*base_sigma, which is
            // base_sigma in the halved sampling
            stack.push_back(downsample_half(pyr.gauss[o - 1][s]));
        }
        for (int k = 1; k < levels; ++k) {
            const double prev = pyr.level_sigma(k - 1);
            const double next = pyr.level_sigma(k);
            const double delta = std::sqrt(next * next - prev * prev);
            stack.push_back(gaussian_blur(stack.back(), delta));
        }

        auto& dogs = pyr.dog[o];
        dogs.reserve(levels - 1);
        for (int k = 0; k + 1 < levels; ++k) {
            Raster d(stack[k].w, stack[k].h);
            for (std::size_t i = 0; i < d.v.size(); ++i)
                d.v[i] = stack[k + 1].v[i] - stack[k].v[i];
            dogs.push_back(std::move(d));
        }
    }
    return pyr;
}

// ---------------------------------------------------------------------------
// Extremum detection and refinement
// ---------------------------------------------------------------------------

namespace detail {

struct Quadratic3d {
    double gx, gy, gs;       // gradient
    double dxx, dyy, dss;    // Hessian diagonal
    double dxy, dxs, dys;    // Hessian off-diagonal
};

inline Quadratic3d dog_derivatives(const std::vector<Raster>& dog, int k, int x, int y) {
    const Raster& c = dog[k];
    const Raster& lo = dog[k - 1];
    const Raster& hi = dog[k + 1];
    Quadratic3d q;
    q.gx = 0.5 * (c.at(x + 1, y) - c.at(x - 1, y));
    q.gy = 0.5 * (c.at(x, y + 1) - c.at(x, y - 1));
    q.gs = 0.5 * (hi.at(x, y) - lo.at(x, y));
    q.dxx = c.at(x + 1, y) - 2.0 * c.at(x, y) + c.at(x - 1, y);
    q.dyy = c.at(x, y + 1) - 2.0 * c.at(x, y) + c.at(x, y - 1);
    q.dss = hi.at(x, y) - 2.0 * c.at(x, y) + lo.at(x, y);
    q.dxy = 0.25 * (c.at(x + 1, y + 1) - c.at(x - 1, y + 1) -
                    c.at(x + 1, y - 1) + c.at(x - 1, y - 1));
    q.dxs = 0.25 * (hi.at(x + 1, y) - hi.at(x - 1, y) -
                    lo.at(x + 1, y) + lo.at(x - 1, y));
    q.dys = 0.25 * (hi.at(x, y + 1) - hi.at(x, y - 1) -
                    lo.at(x, y + 1) + lo.at(x, y - 1));
    return q;
}

// Solves H * offset = -g by Cramer's rule; false when H is singular.
inline bool solve_offset(const Quadratic3d& q, double out[3]) {
    const double a = q.dxx, b = q.dxy, c = q.dxs;
    const double d = q.dxy, e = q.dyy, f = q.dys;
    const double g = q.dxs, h = q.dys, i = q.dss;
    const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    if (std::abs(det) < 1e-20) return false;
    const double rx = -q.gx, ry = -q.gy, rs = -q.gs;
    out[0] = (rx * (e * i - f * h) - b * (ry * i - f * rs) + c * (ry * h - e * rs)) / det;
    out[1] = (a * (ry * i - f * rs) - rx * (d * i - f * g) + c * (d * rs - ry * g)) / det;
    out[2] = (a * (e * rs - ry * h) - b * (d * rs - ry * g) + rx * (d * h - e * g)) / det;
    return true;
}

inline bool is_extremum_26(const std::vector<Raster>& dog, int k, int x, int y) {
    const float v = dog[k].at(x, y);
    bool is_max = true, is_min = true;
    for (int dk = -1; dk <= 1 && (is_max || is_min); ++dk)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dk == 0 && dy == 0 && dx == 0) continue;
                const float n = dog[k + dk].at(x + dx, y + dy);
                if (n >= v) is_max = false;
                if (n <= v) is_min = false;
            }
    return is_max || is_min;
}

} // namespace detail

inline std::vector<Candidate> detect_keypoints(const ScaleSpacePyramids& pyr,
                                               const SiftParams& params) {
    const int s = pyr.scales_per_octave;
    const float prefilter = static_cast<float>(0.5 * params.contrast_threshold);
    const double r = params.edge_ratio_threshold;
    const double edge_limit = (r + 1.0) * (r + 1.0) / r;

    std::vector<Candidate> out;
    for (int o = 0; o < pyr.octaves(); ++o) {
        const auto& dog = pyr.dog[o];
        const int w = dog[0].w, h = dog[0].h;
        if (w < 3 || h < 3) continue;
        for (int k = 1; k <= s; ++k) {
            for (int y = 1; y < h - 1; ++y) {
                for (int x = 1; x < w - 1; ++x) {
                    if (std::abs(dog[k].at(x, y)) < prefilter) continue;
                    if (!detail::is_extremum_26(dog, k, x, y)) continue;

                    // quadratic refinement, re-centering on the nearest
                    // sample whenever the offset leaves the current cell
                    int cx = x, cy = y, ck = k;
                    double offset[3] = {0, 0, 0};
                    bool converged = false;
                    for (int step = 0; step < SiftParams::kMaxRefineSteps; ++step) {
                        const auto q = detail::dog_derivatives(dog, ck, cx, cy);
                        if (!detail::solve_offset(q, offset)) break;
                        if (std::abs(offset[0]) <= 0.5 && std::abs(offset[1]) <= 0.5 &&
                            std::abs(offset[2]) <= 0.5) {
                            converged = true;
                            break;
                        }
                        cx += static_cast<int>(std::lround(offset[0]));
                        cy += static_cast<int>(std::lround(offset[1]));
                        ck += static_cast<int>(std::lround(offset[2]));
                        if (cx < 1 || cx > w - 2 || cy < 1 || cy > h - 2 || ck < 1 || ck > s)
                            break;
                    }
                    if (!converged) continue;

                    const auto q = detail::dog_derivatives(dog, ck, cx, cy);
                    const double value = dog[ck].at(cx, cy) +
                                         0.5 * (q.gx * offset[0] + q.gy * offset[1] +
                                                q.gs * offset[2]);
                    if (std::abs(value) < params.contrast_threshold) continue;

                    const double trace = q.dxx + q.dyy;
                    const double det = q.dxx * q.dyy - q.dxy * q.dxy;
                    if (det <= 0.0 || trace * trace / det >= edge_limit) continue;

                    Candidate cand;
                    cand.octave = o;
                    cand.level = ck;
                    cand.ix = cx;
                    cand.iy = cy;
                    cand.x = cx + offset[0];
                    cand.y = cy + offset[1];
                    cand.level_refined = ck + offset[2];
                    cand.scale_octave = pyr.level_sigma(cand.level_refined);
                    cand.response = value;
                    out.push_back(cand);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orientation assignment
// ---------------------------------------------------------------------------

namespace detail {

inline bool gradient_at(const Raster& img, int x, int y, double& mag, double& angle) {
    if (x < 1 || x > img.w - 2 || y < 1 || y > img.h - 2) return false;
    const double dx = img.at(x + 1, y) - img.at(x - 1, y);
    const double dy = img.at(x, y + 1) - img.at(x, y - 1);
    mag = std::sqrt(dx * dx + dy * dy);
    angle = std::atan2(dy, dx);
    if (angle < 0.0) angle += kTwoPi;
    return true;
}

} // namespace detail

inline std::vector<OrientedCandidate> assign_orientations(
    const std::vector<Candidate>& candidates, const ScaleSpacePyramids& pyr,
    const SiftParams& params) {
    const int nbins = params.orientation_bins;
    const double bin_width = kTwoPi / nbins;

    std::vector<OrientedCandidate> out;
    std::vector<double> hist(nbins), smoothed(nbins);
    for (const auto& cand : candidates) {
        const Raster& img = pyr.gauss[cand.octave][cand.level];
        const double sigma_w = SiftParams::kOrientationSigmaFactor * cand.scale_octave;
        const int radius = static_cast<int>(std::lround(3.0 * sigma_w));
        const double denom = 2.0 * sigma_w * sigma_w;

        std::fill(hist.begin(), hist.end(), 0.0);
        for (int dy = -radius; dy <= radius; ++dy) {
            for (int dx = -radius; dx <= radius; ++dx) {
                double mag, angle;
                if (!detail::gradient_at(img, cand.ix + dx, cand.iy + dy, mag, angle))
                    continue;
                const double w = std::exp(-(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) / denom);
                int bin = static_cast<int>(angle / bin_width) % nbins;
                hist[bin] += w * mag;
            }
        }

        // two passes of circular 121 smoothing
        for (int pass = 0; pass < 2; ++pass) {
            for (int b = 0; b < nbins; ++b) {
                const double l = hist[(b + nbins - 1) % nbins];
                const double r = hist[(b + 1) % nbins];
                smoothed[b] = 0.25 * l + 0.5 * hist[b] + 0.25 * r;
            }
            hist.swap(smoothed);
        }

        const double peak = *std::max_element(hist.begin(), hist.end());
        if (peak <= 0.0) continue;

        bool emitted = false;
        auto emit = [&](int b) {
            const double l = hist[(b + nbins - 1) % nbins];
            const double r = hist[(b + 1) % nbins];
            const double den = l - 2.0 * hist[b] + r;
            double off = std::abs(den) > 1e-12 ? 0.5 * (l - r) / den : 0.0;
            off = std::clamp(off, -0.5, 0.5);
            double angle = (b + 0.5 + off) * bin_width;
            angle = std::fmod(angle, kTwoPi);
            if (angle < 0.0) angle += kTwoPi;
            out.push_back(OrientedCandidate{cand, angle});
            emitted = true;
        };

        for (int b = 0; b < nbins; ++b) {
            const double l = hist[(b + nbins - 1) % nbins];
            const double r = hist[(b + 1) % nbins];
            if (hist[b] > l && hist[b] > r &&
                hist[b] >= SiftParams::kPeakAcceptFraction * peak)
                emit(b);
        }
        // a flat histogram (rotationally symmetric neighborhood) has no
        // strict local maximum; fall back to the first global peak
        if (!emitted)
            emit(static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin()));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Descriptor computation
// ---------------------------------------------------------------------------

namespace detail {

// Iterates clip-at-0.2 / renormalize until the vector is unit norm with no
// element above the clip limit; false for degenerate histograms that cannot
// satisfy both.
inline bool finalize_descriptor(std::vector<double>& v) {
    const double clip = SiftParams::kDescriptorClip;
    auto norm = [&] {
        double acc = 0.0;
        for (double x : v) acc += x * x;
        return std::sqrt(acc);
    };
    double n = norm();
    if (n < 1e-12) return false;
    for (double& x : v) x /= n;
    for (int iter = 0; iter < 32; ++iter) {
        bool clipped = false;
        for (double& x : v)
            if (x > clip) {
                x = clip;
                clipped = true;
            }
        n = norm();
        if (n < 1e-12) return false;
        for (double& x : v) x /= n;
        if (!clipped) return true;
        if (*std::max_element(v.begin(), v.end()) <= clip + 1e-7) return true;
    }
    return false;
}

} // namespace detail

inline std::vector<Keypoint> compute_descriptors(
    const std::vector<OrientedCandidate>& oriented, const ScaleSpacePyramids& pyr,
    const SiftParams& params) {
    (void)params;
    const int d = kDescriptorGrid;
    const int nb = kDescriptorOriBins;
    const double ori_bin_width = kTwoPi / nb;

    std::vector<Keypoint> out;
    out.reserve(oriented.size());
    std::vector<double> hist((d + 2) * (d + 2) * nb);
    for (const auto& oc : oriented) {
        const Candidate& c = oc.base;
        const Raster& img = pyr.gauss[c.octave][c.level];
        const double hist_width = SiftParams::kDescriptorScaleFactor * c.scale_octave;
        const int radius = static_cast<int>(
            std::lround(hist_width * std::numbers::sqrt2 * (d + 1) * 0.5));

        const int x0 = static_cast<int>(std::lround(c.x));
        const int y0 = static_cast<int>(std::lround(c.y));
        // drop keypoints whose descriptor window exits the image
        if (x0 - radius < 1 || x0 + radius > img.w - 2 ||
            y0 - radius < 1 || y0 + radius > img.h - 2)
            continue;

        const double cos_t = std::cos(oc.orientation);
        const double sin_t = std::sin(oc.orientation);
        const double weight_denom = 0.5 * d * d; // gaussian sigma = d/2 in cell units

        std::fill(hist.begin(), hist.end(), 0.0);
        auto hist_at = [&](int r, int cc, int o) -> double& {
            return hist[(static_cast<std::size_t>(r) * (d + 2) + cc) * nb + o];
        };

        for (int i = -radius; i <= radius; ++i) {
            for (int j = -radius; j <= radius; ++j) {
                const double c_rot = (j * cos_t + i * sin_t) / hist_width;
                const double r_rot = (-j * sin_t + i * cos_t) / hist_width;
                const double rbin = r_rot + d / 2.0 - 0.5;
                const double cbin = c_rot + d / 2.0 - 0.5;
                if (rbin <= -1.0 || rbin >= d || cbin <= -1.0 || cbin >= d) continue;

                double mag, angle;
                if (!detail::gradient_at(img, x0 + j, y0 + i, mag, angle)) continue;
                double obin = (angle - oc.orientation) / ori_bin_width;
                while (obin < 0.0) obin += nb;
                while (obin >= nb) obin -= nb;

                const double w =
                    std::exp(-(c_rot * c_rot + r_rot * r_rot) / weight_denom) * mag;

                const int r0 = static_cast<int>(std::floor(rbin));
                const int c0 = static_cast<int>(std::floor(cbin));
                const int o0 = static_cast<int>(std::floor(obin));
                const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
                for (int dr = 0; dr <= 1; ++dr)
                    for (int dc = 0; dc <= 1; ++dc)
                        for (int dob = 0; dob <= 1; ++dob) {
                            const double share = w * (dr ? fr : 1.0 - fr) *
                                                 (dc ? fc : 1.0 - fc) *
                                                 (dob ? fo : 1.0 - fo);
                            hist_at(r0 + dr + 1, c0 + dc + 1, (o0 + dob) % nb) += share;
                        }
            }
        }

        std::vector<double> desc(kDescriptorSize);
        for (int r = 0; r < d; ++r)
            for (int cc = 0; cc < d; ++cc)
                for (int o = 0; o < nb; ++o)
                    desc[(static_cast<std::size_t>(r) * d + cc) * nb + o] =
                        hist_at(r + 1, cc + 1, o);
        if (!detail::finalize_descriptor(desc)) continue;

        Keypoint kp;
        const double octave_scale = std::pow(2.0, c.octave);
        kp.x = c.x * octave_scale;
        kp.y = c.y * octave_scale;
        kp.scale = c.scale_octave * octave_scale;
        kp.orientation = oc.orientation;
        for (int i = 0; i < kDescriptorSize; ++i)
            kp.descriptor[i] = static_cast<float>(desc[i]);
        out.push_back(kp);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full extraction
// ---------------------------------------------------------------------------

inline std::vector<Keypoint> extract(const Image& image, const SiftParams& params) {
    const auto pyr = build_scale_space(image, params);
    auto candidates = detect_keypoints(pyr, params);
    auto oriented = assign_orientations(candidates, pyr, params);

    // deterministic output order: (octave, level, y, x, orientation)
    std::stable_sort(oriented.begin(), oriented.end(),
                     [](const OrientedCandidate& a, const OrientedCandidate& b) {
                         const auto key = [](const OrientedCandidate& t) {
                             return std::make_tuple(t.base.octave, t.base.level,
                                                    t.base.y, t.base.x, t.orientation);
                         };
                         return key(a) < key(b);
                     });
    auto keypoints = compute_descriptors(oriented, pyr, params);

    // drop anything the refinement pushed outside the frame
    std::erase_if(keypoints, [&](const Keypoint& k) {
        return k.x < 0.0 || k.x > image.width - 1.0 || k.y < 0.0 ||
               k.y > image.height - 1.0;
    });
    return keypoints;
}

// ---------------------------------------------------------------------------
// Text dump format: one keypoint per line, `x y scale orientation d1 .. d128`
// ---------------------------------------------------------------------------

inline void write_keypoint_dump(const std::vector<Keypoint>& keypoints,
                                const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open keypoint dump for writing: " + path.string());
    out << std::fixed << std::setprecision(6);
    for (const auto& k : keypoints) {
        out << k.x << ' ' << k.y << ' ' << k.scale << ' ' << k.orientation;
        for (float v : k.descriptor) out << ' ' << v;
        out << '\n';
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

inline std::vector<Keypoint> read_keypoint_dump(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open keypoint dump: " + path.string());
    std::vector<Keypoint> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        Keypoint k;
        if (!(ss >> k.x >> k.y >> k.scale >> k.orientation))
            throw ParseError("keypoint dump: malformed line", lineno);
        for (int i = 0; i < kDescriptorSize; ++i)
            if (!(ss >> k.descriptor[i]))
                throw ParseError("keypoint dump: descriptor too short", lineno);
        out.push_back(k);
    }
    return out;
}

} // namespace siftfuse
