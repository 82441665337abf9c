#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace siftfuse {

// 8-bit grayscale raster, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
};

// Working resolution every dataset image is brought to before feature
// extraction (portrait: 100 wide, 140 tall).
inline constexpr int kWorkingWidth = 100;
inline constexpr int kWorkingHeight = 140;

namespace detail {

// Next header token of a PGM stream, skipping whitespace and '#' comments.
inline std::string next_pnm_token(std::istream& in) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    return token;
}

inline int parse_pnm_number(const std::string& token, const char* what) {
    if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
        throw CorruptData(std::string("pgm: malformed ") + what + " field '" + token + "'");
    long v = std::strtol(token.c_str(), nullptr, 10);
    if (v <= 0 || v > 1 << 20)
        throw CorruptData(std::string("pgm: out-of-range ") + what + " value " + token);
    return static_cast<int>(v);
}

} // namespace detail

// Decodes a binary PGM (magic "P5", maxval <= 255) file.
inline Image load_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open image file: " + path.string());

    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5')
        throw UnsupportedFormat("not a binary PGM (P5) file: " + path.string());

    Image img;
    img.width = detail::parse_pnm_number(detail::next_pnm_token(in), "width");
    img.height = detail::parse_pnm_number(detail::next_pnm_token(in), "height");
    const std::string maxval_token = detail::next_pnm_token(in);
    if (maxval_token.empty())
        throw CorruptData("pgm: truncated header: " + path.string());
    if (maxval_token.find_first_not_of("0123456789") != std::string::npos)
        throw CorruptData("pgm: malformed maxval field '" + maxval_token + "'");
    const long maxval = std::strtol(maxval_token.c_str(), nullptr, 10);
    if (maxval <= 0 || maxval > 255)
        throw UnsupportedFormat("pgm: unsupported maxval " + maxval_token +
                                " in " + path.string());

    // next_pnm_token consumed the single whitespace byte after maxval.
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    img.pixels.resize(n);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw CorruptData("pgm: pixel payload shorter than header promises: " +
                          path.string());
    return img;
}

// Writes the canonical encoding: "P5\n<w> <h>\n255\n" + payload.
inline void save_pgm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open image file for writing: " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

// Bilinear resize; edge coordinates clamp, intensities round to [0,255].
inline Image resize(const Image& src, int target_w, int target_h) {
    if (target_w <= 0 || target_h <= 0)
        throw InvalidDimensions("resize: target dimensions must be positive");

    Image dst;
    dst.width = target_w;
    dst.height = target_h;
    dst.pixels.resize(static_cast<std::size_t>(target_w) * target_h);

    const double sx = static_cast<double>(src.width) / target_w;
    const double sy = static_cast<double>(src.height) / target_h;
    for (int y = 0; y < target_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < target_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * src.at(x0, y0) + wx * src.at(x1, y0);
            const double bot = (1.0 - wx) * src.at(x0, y1) + wx * src.at(x1, y1);
            const double v = (1.0 - wy) * top + wy * bot;
            dst.at(x, y) = static_cast<std::uint8_t>(
                std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return dst;
}

} // namespace siftfuse
