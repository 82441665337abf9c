#pragma once

#include <cmath>
#include <vector>

#include "image.hpp"

namespace siftfuse {

// Real-valued raster in [0,1] intensity units, row-major.
struct Raster {
    int w = 0;
    int h = 0;
    std::vector<float> v;

    Raster() = default;
    Raster(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0f) {}

    float at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
    float& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline Raster to_raster(const Image& img) {
    Raster r(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        r.v[i] = img.pixels[i] / 255.0f;
    return r;
}

namespace detail {

// Symmetric reflection: ...cba|abc...|cba... Repeats until in range so
// kernels wider than the raster stay defined.
inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

inline std::vector<float> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[i + radius] = static_cast<float>(w);
        sum += w;
    }
    for (auto& w : k) w = static_cast<float>(w / sum);
    return k;
}

} // namespace detail

// Separable Gaussian blur, kernel radius ceil(3*sigma), reflective borders.
inline Raster gaussian_blur(const Raster& src, double sigma) {
    if (sigma <= 1e-6) return src;
    const auto kernel = detail::gaussian_kernel(sigma);
    const int radius = (static_cast<int>(kernel.size()) - 1) / 2;

    Raster tmp(src.w, src.h);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * src.at(detail::reflect_index(x + i, src.w), y);
            tmp.at(x, y) = static_cast<float>(acc);
        }
    }
    Raster dst(src.w, src.h);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp.at(x, detail::reflect_index(y + i, src.h));
            dst.at(x, y) = static_cast<float>(acc);
        }
    }
    return dst;
}

// Every-other-pixel decimation; callers blur first.
inline Raster downsample_half(const Raster& src) {
    Raster dst(std::max(1, src.w / 2), std::max(1, src.h / 2));
    for (int y = 0; y < dst.h; ++y)
        for (int x = 0; x < dst.w; ++x)
            dst.at(x, y) = src.at(2 * x, 2 * y);
    return dst;
}

} // namespace siftfuse
