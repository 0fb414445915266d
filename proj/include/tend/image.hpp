#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tend {

enum class Label { ID, OOD, UNKNOWN };
enum class Split { TRAIN, TEST, VAL_GENERATED };

const char* label_name(Label l);
Label label_from_name(const std::string& s);
const char* split_name(Split s);

// Dense H x W x C raster, interleaved channels, intensities in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;

    static Image zeros(int h, int w, int c);
    static Image constant(int h, int w, int c, float value);

    float& at(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool empty() const { return pixels.empty(); }
    size_t size() const { return pixels.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

struct ImageSample {
    Image image;
    Label label = Label::UNKNOWN;
    std::string source_id;
    Split split = Split::TRAIN;
};

// Bilinear sample at continuous pixel-center coordinates (y, x). Coordinates
// outside the source grid read `fill`. The lerp form keeps two exactness
// guarantees the warps rely on: integer coordinates reproduce the source
// pixel bit-for-bit, and constant neighborhoods stay constant.
double sample_bilinear_fill(const Image& img, double y, double x, int c, double fill);

// Variant that clamps coordinates to the grid instead of filling; used by
// plain resizing where no virtual pixels should appear.
double sample_bilinear_clamp(const Image& img, double y, double x, int c);

Image resize_bilinear(const Image& img, int out_h, int out_w);

// Channel coercion: 3->1 averages, 1->3 replicates.
Image to_channels(const Image& img, int channels);

// 8-bit file I/O via the system codec. Intensities map by v8 = v / 255 on
// read and v8 = floor(255 v + 0.5) on write (round half up), clamped.
Image load_image(const std::string& path, int channels);
void save_image(const std::string& path, const Image& img);

double mean_abs_diff(const Image& a, const Image& b);
double pixel_variance(const Image& img);

}  // namespace tend
