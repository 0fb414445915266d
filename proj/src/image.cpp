#include "tend/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

#include "tend/errors.hpp"

namespace tend {

const char* label_name(Label l) {
    switch (l) {
        case Label::ID: return "ID";
        case Label::OOD: return "OOD";
        case Label::UNKNOWN: return "UNKNOWN";
    }
    return "UNKNOWN";
}

Label label_from_name(const std::string& s) {
    if (s == "ID") return Label::ID;
    if (s == "OOD") return Label::OOD;
    if (s == "UNKNOWN") return Label::UNKNOWN;
    throw ParamError("unknown label: " + s);
}

const char* split_name(Split s) {
    switch (s) {
        case Split::TRAIN: return "TRAIN";
        case Split::TEST: return "TEST";
        case Split::VAL_GENERATED: return "VAL_GENERATED";
    }
    return "TRAIN";
}

Image Image::zeros(int h, int w, int c) { return constant(h, w, c, 0.0f); }

Image Image::constant(int h, int w, int c, float value) {
    Image img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.pixels.assign(static_cast<size_t>(h) * w * c, value);
    return img;
}

namespace {

inline double lerp(double a, double b, double t) { return a + (b - a) * t; }

}  // namespace

double sample_bilinear_fill(const Image& img, double y, double x, int c, double fill) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;

    auto px = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return fill;
        return img.at(yy, xx, c);
    };

    const double top = lerp(px(y0, x0), px(y0, x0 + 1), fx);
    const double bot = lerp(px(y0 + 1, x0), px(y0 + 1, x0 + 1), fx);
    return lerp(top, bot, fy);
}

double sample_bilinear_clamp(const Image& img, double y, double x, int c) {
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1);
    const double fy = y - y0;
    const double fx = x - x0;
    const double top = lerp(img.at(y0, x0, c), img.at(y0, x1, c), fx);
    const double bot = lerp(img.at(y1, x0, c), img.at(y1, x1, c), fx);
    return lerp(top, bot, fy);
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (img.empty()) throw ParamError("resize_bilinear: empty image");
    if (out_h <= 0 || out_w <= 0) throw ParamError("resize_bilinear: non-positive size");
    if (out_h == img.height && out_w == img.width) return img;

    Image out = Image::zeros(out_h, out_w, img.channels);
    const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) =
                    static_cast<float>(sample_bilinear_clamp(img, y * sy, x * sx, c));
            }
        }
    }
    return out;
}

Image to_channels(const Image& img, int channels) {
    if (channels != 1 && channels != 3) throw ParamError("to_channels: channels must be 1 or 3");
    if (img.channels == channels) return img;
    Image out = Image::zeros(img.height, img.width, channels);
    if (img.channels == 1 && channels == 3) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
    } else if (img.channels == 3 && channels == 1) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(y, x, 0) =
                    (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0f;
    } else {
        throw ParamError("to_channels: unsupported source channel count");
    }
    return out;
}

Image load_image(const std::string& path, int channels) {
    if (channels != 1 && channels != 3) throw ParamError("load_image: channels must be 1 or 3");
    cv::Mat mat = cv::imread(path, channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    if (mat.empty()) throw DataError("load_image: cannot decode " + path);

    Image img = Image::zeros(mat.rows, mat.cols, channels);
    for (int y = 0; y < mat.rows; ++y) {
        for (int x = 0; x < mat.cols; ++x) {
            if (channels == 1) {
                img.at(y, x, 0) = mat.at<uint8_t>(y, x) / 255.0f;
            } else {
                const auto& bgr = mat.at<cv::Vec3b>(y, x);
                img.at(y, x, 0) = bgr[2] / 255.0f;
                img.at(y, x, 1) = bgr[1] / 255.0f;
                img.at(y, x, 2) = bgr[0] / 255.0f;
            }
        }
    }
    return img;
}

void save_image(const std::string& path, const Image& img) {
    if (img.empty()) throw ParamError("save_image: empty image");
    if (img.channels != 1 && img.channels != 3)
        throw ParamError("save_image: channels must be 1 or 3");

    auto to_u8 = [](float v) -> uint8_t {
        const double q = std::floor(255.0 * static_cast<double>(v) + 0.5);
        return static_cast<uint8_t>(std::clamp(q, 0.0, 255.0));
    };

    cv::Mat mat(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (img.channels == 1) {
                mat.at<uint8_t>(y, x) = to_u8(img.at(y, x, 0));
            } else {
                mat.at<cv::Vec3b>(y, x) =
                    cv::Vec3b(to_u8(img.at(y, x, 2)), to_u8(img.at(y, x, 1)),
                              to_u8(img.at(y, x, 0)));
            }
        }
    }
    if (!cv::imwrite(path, mat)) throw DataError("save_image: cannot write " + path);
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ParamError("mean_abs_diff: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i)
        acc += std::abs(static_cast<double>(a.pixels[i]) - b.pixels[i]);
    return a.pixels.empty() ? 0.0 : acc / static_cast<double>(a.pixels.size());
}

double pixel_variance(const Image& img) {
    if (img.empty()) return 0.0;
    double mean = 0.0;
    for (float v : img.pixels) mean += v;
    mean /= static_cast<double>(img.pixels.size());
    double var = 0.0;
    for (float v : img.pixels) {
        const double d = v - mean;
        var += d * d;
    }
    return var / static_cast<double>(img.pixels.size());
}

}  // namespace tend
