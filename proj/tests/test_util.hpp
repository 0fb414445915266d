#pragma once

// Shared fixtures for the test binaries: deterministic images with enough
// structure that geometric warps visibly move content.

#include <cmath>
#include <string>

#include "tend/image.hpp"
#include "tend/rng.hpp"

namespace tend::testutil {

// Smooth asymmetric texture, values inside [0.03, 0.97].
inline Image textured_image(int h, int w, int c) {
    Image img = Image::zeros(h, w, c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                const double gx = static_cast<double>(x) / std::max(1, w - 1);
                const double gy = static_cast<double>(y) / std::max(1, h - 1);
                const double wave = std::sin(2.0 * M_PI * (2.3 * gx + 0.7 * ch)) *
                                    std::sin(2.0 * M_PI * (1.7 * gy + 0.31));
                const double ramp = 0.25 * gx + 0.15 * gy;
                img.at(y, x, ch) = static_cast<float>(0.45 + 0.32 * wave + ramp * 0.5);
            }
    return img;
}

inline Image noise_image(int h, int w, int c, uint64_t seed) {
    Rng rng(seed);
    Image img = Image::zeros(h, w, c);
    for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
    return img;
}

inline Image impulse_image(int h, int w) {
    Image img = Image::zeros(h, w, 1);
    img.at(h / 2, w / 2, 0) = 1.0f;
    return img;
}

inline ImageSample id_sample(Image img, const std::string& id) {
    ImageSample s;
    s.image = std::move(img);
    s.label = Label::ID;
    s.source_id = id;
    return s;
}

inline bool images_identical(const Image& a, const Image& b) {
    return a.same_shape(b) && a.pixels == b.pixels;
}

inline bool pixels_in_unit_range(const Image& img) {
    for (const float v : img.pixels)
        if (!(v >= 0.0f && v <= 1.0f)) return false;
    return true;
}

inline double pixel_sum(const Image& img) {
    double s = 0.0;
    for (const float v : img.pixels) s += v;
    return s;
}

inline double pixel_mean(const Image& img) {
    return img.size() ? pixel_sum(img) / static_cast<double>(img.size()) : 0.0;
}

}  // namespace tend::testutil
