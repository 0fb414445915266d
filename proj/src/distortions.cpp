#include "tend/distortions.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "tend/errors.hpp"
#include "tend/rng.hpp"

namespace tend {

const char* kind_name(DistortionKind k) {
    switch (k) {
        case DistortionKind::BARREL: return "barrel";
        case DistortionKind::PERSPECTIVE: return "perspective";
        case DistortionKind::ARC: return "arc";
        case DistortionKind::POLAR: return "polar";
        case DistortionKind::TILE: return "tile";
        case DistortionKind::AFFINE: return "affine";
        case DistortionKind::RANDOM_CUT: return "random_cut";
        case DistortionKind::RANDOM_CROP_RESIZE: return "random_crop_resize";
        case DistortionKind::NOISE: return "noise";
        case DistortionKind::GAUSSIAN_BLUR: return "gaussian_blur";
    }
    throw ConfigError("kind_name: unknown distortion kind");
}

DistortionKind kind_from_name(const std::string& s) {
    for (int k = 0; k <= static_cast<int>(DistortionKind::GAUSSIAN_BLUR); ++k) {
        const auto kind = static_cast<DistortionKind>(k);
        if (s == kind_name(kind)) return kind;
    }
    throw ParamError("unknown distortion kind: " + s);
}

DistortionFamily kind_family(DistortionKind k) {
    return static_cast<int>(k) <= static_cast<int>(DistortionKind::AFFINE)
               ? DistortionFamily::TRAIN_SET
               : DistortionFamily::VAL_SET;
}

std::vector<DistortionKind> train_kinds() {
    return {DistortionKind::BARREL, DistortionKind::PERSPECTIVE, DistortionKind::ARC,
            DistortionKind::POLAR,  DistortionKind::TILE,        DistortionKind::AFFINE};
}

std::vector<DistortionKind> val_kinds() {
    return {DistortionKind::RANDOM_CUT, DistortionKind::RANDOM_CROP_RESIZE,
            DistortionKind::NOISE, DistortionKind::GAUSSIAN_BLUR};
}

DistortionSpec DistortionSpec::barrel(double a, double b, double c, double d) {
    return {DistortionKind::BARREL, {a, b, c, d}, 0};
}

DistortionSpec DistortionSpec::perspective(const std::vector<double>& corners, uint64_t seed) {
    if (corners.size() != 8) throw ParamError("perspective: expected 8 corner coordinates");
    return {DistortionKind::PERSPECTIVE, corners, seed};
}

DistortionSpec DistortionSpec::arc(double angle_rad) {
    return {DistortionKind::ARC, {angle_rad}, 0};
}

DistortionSpec DistortionSpec::polar() { return {DistortionKind::POLAR, {}, 0}; }

DistortionSpec DistortionSpec::tile(double k) { return {DistortionKind::TILE, {k}, 0}; }

DistortionSpec DistortionSpec::affine(double m00, double m01, double m10, double m11,
                                      double tx, double ty) {
    return {DistortionKind::AFFINE, {m00, m01, m10, m11, tx, ty}, 0};
}

DistortionSpec DistortionSpec::affine_identity() { return affine(1, 0, 0, 1, 0, 0); }

DistortionSpec DistortionSpec::random_cut(uint64_t seed, double min_frac, double max_frac) {
    return {DistortionKind::RANDOM_CUT, {min_frac, max_frac}, seed};
}

DistortionSpec DistortionSpec::random_crop_resize(uint64_t seed, double min_frac,
                                                  double max_frac) {
    return {DistortionKind::RANDOM_CROP_RESIZE, {min_frac, max_frac}, seed};
}

DistortionSpec DistortionSpec::noise(double sigma, uint64_t seed) {
    return {DistortionKind::NOISE, {sigma}, seed};
}

DistortionSpec DistortionSpec::gaussian_blur(double sigma) {
    return {DistortionKind::GAUSSIAN_BLUR, {sigma}, 0};
}

DistortionSpec DistortionSpec::default_for(DistortionKind k, uint64_t seed) {
    switch (k) {
        case DistortionKind::BARREL: return barrel(0.15, 0.15, 0.15, 0.55);
        case DistortionKind::PERSPECTIVE:
            // Fixed asymmetric corner displacement, roughly 10-18% of the side.
            return perspective({0.12, 0.08, 1.0 - 0.10, 0.15, 1.0 - 0.05, 1.0 - 0.12,
                                0.18, 1.0 - 0.06});
        case DistortionKind::ARC: return arc(60.0 * M_PI / 180.0);
        case DistortionKind::POLAR: return polar();
        case DistortionKind::TILE: return tile(3.0);
        case DistortionKind::AFFINE: {
            const double rot = 20.0 * M_PI / 180.0;
            const double shear = 0.2;
            const double cs = std::cos(rot), sn = std::sin(rot);
            // R(rot) * Shear(shear)
            return affine(cs, cs * shear - sn, sn, sn * shear + cs);
        }
        case DistortionKind::RANDOM_CUT: return random_cut(seed);
        case DistortionKind::RANDOM_CROP_RESIZE: return random_crop_resize(seed);
        case DistortionKind::NOISE: return noise(0.1, seed);
        case DistortionKind::GAUSSIAN_BLUR: return gaussian_blur(3.0);
    }
    throw ConfigError("default_for: unknown distortion kind");
}

namespace {

struct SourcePoint {
    double y = 0.0;
    double x = 0.0;
    bool inside = true;  // false forces the fill value regardless of coords
};

template <typename MapFn>
Image inverse_warp(const Image& src, MapFn&& map) {
    Image out = Image::zeros(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const SourcePoint p = map(static_cast<double>(y), static_cast<double>(x));
            for (int c = 0; c < src.channels; ++c) {
                const double v =
                    p.inside ? sample_bilinear_fill(src, p.y, p.x, c, 0.0) : 0.0;
                out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

Image warp_barrel(const Image& src, const std::vector<double>& p) {
    if (p.size() != 4) throw ParamError("barrel: expected params {a,b,c,d}");
    const double a = p[0], b = p[1], c = p[2], d = p[3];
    const double cy = 0.5 * (src.height - 1);
    const double cx = 0.5 * (src.width - 1);
    const double rmax = 0.5 * std::min(src.height - 1, src.width - 1);
    if (rmax <= 0.0) throw ParamError("barrel: image too small");
    return inverse_warp(src, [=](double y, double x) {
        const double dy = y - cy, dx = x - cx;
        const double r = std::sqrt(dy * dy + dx * dx) / rmax;
        const double scale = ((a * r + b) * r + c) * r + d;
        return SourcePoint{cy + dy * scale, cx + dx * scale};
    });
}

// Homography H mapping the unit square TL,TR,BR,BL onto the given corners,
// solved as the standard 8x8 linear system. The warp then samples with the
// inverse, so the image visually moves toward the corners.
Image warp_perspective(const Image& src, const std::vector<double>& p) {
    if (p.size() != 8) throw ParamError("perspective: expected 8 corner coordinates");
    const double sx[4] = {0, 1, 1, 0};
    const double sy[4] = {0, 0, 1, 1};

    Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> rhs;
    for (int i = 0; i < 4; ++i) {
        const double dx = p[2 * i], dy = p[2 * i + 1];
        A(2 * i, 0) = sx[i];
        A(2 * i, 1) = sy[i];
        A(2 * i, 2) = 1;
        A(2 * i, 6) = -sx[i] * dx;
        A(2 * i, 7) = -sy[i] * dx;
        A(2 * i + 1, 3) = sx[i];
        A(2 * i + 1, 4) = sy[i];
        A(2 * i + 1, 5) = 1;
        A(2 * i + 1, 6) = -sx[i] * dy;
        A(2 * i + 1, 7) = -sy[i] * dy;
        rhs(2 * i) = dx;
        rhs(2 * i + 1) = dy;
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
    if (!lu.isInvertible()) throw ParamError("perspective: degenerate corner layout");
    const Eigen::Matrix<double, 8, 1> h = lu.solve(rhs);

    Eigen::Matrix3d H;
    H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
    const Eigen::Matrix3d Hinv = H.inverse();

    const double w1 = src.width - 1, h1 = src.height - 1;
    return inverse_warp(src, [=](double y, double x) {
        const double u = x / w1, v = y / h1;
        const double den = Hinv(2, 0) * u + Hinv(2, 1) * v + Hinv(2, 2);
        if (std::abs(den) < 1e-12) return SourcePoint{0, 0, false};
        const double su = (Hinv(0, 0) * u + Hinv(0, 1) * v + Hinv(0, 2)) / den;
        const double sv = (Hinv(1, 0) * u + Hinv(1, 1) * v + Hinv(1, 2)) / den;
        return SourcePoint{sv * h1, su * w1};
    });
}

// Bends the image around a circular arc: the top edge becomes the outer
// radius, the x axis becomes the angular coordinate. The band is centered in
// the frame; everything outside it takes the fill value.
Image warp_arc(const Image& src, const std::vector<double>& p) {
    if (p.size() != 1) throw ParamError("arc: expected params {angle}");
    const double theta = p[0];
    if (theta <= 0.0 || theta > M_PI) throw ParamError("arc: angle must be in (0, pi]");

    const double w = src.width, h = src.height;
    const double rho_out = w / theta;
    const double rho_in = std::max(rho_out - h, 0.0);
    const double half = 0.5 * theta;
    const double band_top = rho_in * std::cos(half);
    const double cx = 0.5 * (src.width - 1);
    const double cy = 0.5 * (src.height - 1) - 0.5 * (band_top + rho_out);

    const double w1 = src.width - 1, h1 = src.height - 1;
    return inverse_warp(src, [=](double y, double x) {
        const double dx = x - cx, dy = y - cy;
        const double rho = std::sqrt(dx * dx + dy * dy);
        const double phi = std::atan2(dx, dy);  // 0 points straight down
        if (std::abs(phi) > half || rho > rho_out || rho < rho_in)
            return SourcePoint{0, 0, false};
        const double u = (phi / theta + 0.5) * w1;
        const double v = (rho_out - rho) / (rho_out - rho_in) * h1;
        return SourcePoint{v, u};
    });
}

// Polar unwrap: output x is the angle, output y the radius. The radius stays
// within half the min side, so every sample lands inside the source grid.
Image warp_polar(const Image& src, const std::vector<double>& p) {
    if (!p.empty()) throw ParamError("polar: takes no params");
    const double cy = 0.5 * (src.height - 1);
    const double cx = 0.5 * (src.width - 1);
    const double rho_max = 0.5 * std::min(src.height - 1, src.width - 1);
    const double w1 = src.width - 1, h1 = src.height - 1;
    return inverse_warp(src, [=](double y, double x) {
        const double phi = (w1 > 0 ? x / w1 : 0.0) * 2.0 * M_PI;
        const double rho = (h1 > 0 ? y / h1 : 0.0) * rho_max;
        return SourcePoint{cy + rho * std::sin(phi), cx + rho * std::cos(phi)};
    });
}

Image warp_tile(const Image& src, const std::vector<double>& p) {
    if (p.size() != 1) throw ParamError("tile: expected params {k}");
    const double k = p[0];
    if (k < 1.0) throw ParamError("tile: k must be >= 1");
    const double tile_w = src.width / k, tile_h = src.height / k;
    const double w1 = src.width - 1, h1 = src.height - 1;
    return inverse_warp(src, [=](double y, double x) {
        const double lx = std::fmod(x, tile_w);
        const double ly = std::fmod(y, tile_h);
        return SourcePoint{ly / tile_h * h1, lx / tile_w * w1};
    });
}

Image warp_affine(const Image& src, const std::vector<double>& p) {
    if (p.size() != 6) throw ParamError("affine: expected params {m00,m01,m10,m11,tx,ty}");
    const double det = p[0] * p[3] - p[1] * p[2];
    if (std::abs(det) < 1e-12) throw ParamError("affine: singular matrix");
    // Inverse of the forward map dst = M (src - c) + c + t.
    const double i00 = p[3] / det, i01 = -p[1] / det;
    const double i10 = -p[2] / det, i11 = p[0] / det;
    const double cy = 0.5 * (src.height - 1);
    const double cx = 0.5 * (src.width - 1);
    return inverse_warp(src, [=](double y, double x) {
        const double dx = x - cx - p[4];
        const double dy = y - cy - p[5];
        return SourcePoint{cy + i10 * dx + i11 * dy, cx + i00 * dx + i01 * dy};
    });
}

Image corrupt_random_cut(const Image& src, const std::vector<double>& p, uint64_t seed) {
    if (p.size() != 2) throw ParamError("random_cut: expected params {min_frac,max_frac}");
    const double lo = p[0], hi = p[1];
    if (!(lo > 0.0) || hi < lo || hi > 1.0)
        throw ParamError("random_cut: fractions must satisfy 0 < min <= max <= 1");
    Rng rng(seed);
    const double frac = rng.uniform(lo, hi);
    const double aspect = rng.uniform(0.5, 2.0);
    int cut_h = static_cast<int>(std::lround(src.height * std::sqrt(frac * aspect)));
    int cut_w = static_cast<int>(std::lround(src.width * std::sqrt(frac / aspect)));
    cut_h = std::clamp(cut_h, 1, src.height);
    cut_w = std::clamp(cut_w, 1, src.width);
    const int top = static_cast<int>(rng.uniform_int(0, src.height - cut_h));
    const int left = static_cast<int>(rng.uniform_int(0, src.width - cut_w));

    Image out = src;
    for (int y = top; y < top + cut_h; ++y)
        for (int x = left; x < left + cut_w; ++x)
            for (int c = 0; c < src.channels; ++c) out.at(y, x, c) = 0.0f;
    return out;
}

Image corrupt_crop_resize(const Image& src, const std::vector<double>& p, uint64_t seed) {
    if (p.size() != 2)
        throw ParamError("random_crop_resize: expected params {min_frac,max_frac}");
    const double lo = p[0], hi = p[1];
    if (!(lo > 0.0) || hi < lo || hi > 1.0)
        throw ParamError("random_crop_resize: fractions must satisfy 0 < min <= max <= 1");
    Rng rng(seed);
    const double frac = rng.uniform(lo, hi);
    const int ch = std::clamp(static_cast<int>(std::lround(frac * src.height)), 1, src.height);
    const int cw = std::clamp(static_cast<int>(std::lround(frac * src.width)), 1, src.width);
    const int top = static_cast<int>(rng.uniform_int(0, src.height - ch));
    const int left = static_cast<int>(rng.uniform_int(0, src.width - cw));

    Image crop = Image::zeros(ch, cw, src.channels);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int c = 0; c < src.channels; ++c)
                crop.at(y, x, c) = src.at(top + y, left + x, c);
    return resize_bilinear(crop, src.height, src.width);
}

Image corrupt_noise(const Image& src, const std::vector<double>& p, uint64_t seed) {
    if (p.size() != 1) throw ParamError("noise: expected params {sigma}");
    const double sigma = p[0];
    if (sigma < 0.0) throw ParamError("noise: sigma must be >= 0");
    Rng rng(seed);
    Image out = src;
    for (auto& v : out.pixels)
        v = static_cast<float>(std::clamp(v + rng.normal(0.0, sigma), 0.0, 1.0));
    return out;
}

Image corrupt_gaussian_blur(const Image& src, const std::vector<double>& p) {
    if (p.size() != 1) throw ParamError("gaussian_blur: expected params {sigma}");
    const double sigma = p[0];
    if (sigma <= 0.0) throw ParamError("gaussian_blur: sigma must be > 0");

    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= sum;

    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };

    // Horizontal then vertical pass, replicated border.
    Image tmp = Image::zeros(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * src.at(y, clampi(x + i, src.width - 1), c);
                tmp.at(y, x, c) = static_cast<float>(acc);
            }
    Image out = Image::zeros(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * tmp.at(clampi(y + i, src.height - 1), x, c);
                out.at(y, x, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
    return out;
}

}  // namespace

ImageSample distort(const ImageSample& sample, const DistortionSpec& spec) {
    if (sample.image.empty()) throw ParamError("distort: empty image");

    ImageSample out = sample;
    switch (spec.kind) {
        case DistortionKind::BARREL: out.image = warp_barrel(sample.image, spec.params); break;
        case DistortionKind::PERSPECTIVE:
            out.image = warp_perspective(sample.image, spec.params);
            break;
        case DistortionKind::ARC: out.image = warp_arc(sample.image, spec.params); break;
        case DistortionKind::POLAR: out.image = warp_polar(sample.image, spec.params); break;
        case DistortionKind::TILE: out.image = warp_tile(sample.image, spec.params); break;
        case DistortionKind::AFFINE: out.image = warp_affine(sample.image, spec.params); break;
        case DistortionKind::RANDOM_CUT:
            out.image = corrupt_random_cut(sample.image, spec.params, spec.seed);
            break;
        case DistortionKind::RANDOM_CROP_RESIZE:
            out.image = corrupt_crop_resize(sample.image, spec.params, spec.seed);
            break;
        case DistortionKind::NOISE:
            out.image = corrupt_noise(sample.image, spec.params, spec.seed);
            break;
        case DistortionKind::GAUSSIAN_BLUR:
            out.image = corrupt_gaussian_blur(sample.image, spec.params);
            break;
        default: throw ConfigError("distort: unknown distortion kind");
    }
    out.label = Label::OOD;
    out.source_id = sample.source_id + ":" + kind_name(spec.kind);
    return out;
}

DistortionSpec sample_train_spec(uint64_t rng_seed) {
    Rng rng(rng_seed);
    const auto kinds = train_kinds();
    const auto kind = kinds[static_cast<size_t>(rng.uniform_int(0, kTrainKindCount - 1))];

    DistortionSpec spec;
    switch (kind) {
        case DistortionKind::BARREL: {
            const double a = rng.uniform(0.0, 0.3);
            const double b = rng.uniform(0.0, 0.3);
            const double c = rng.uniform(0.0, 0.3);
            spec = DistortionSpec::barrel(a, b, c, 1.0 - a - b - c);
            break;
        }
        case DistortionKind::PERSPECTIVE: {
            const double sx[4] = {0, 1, 1, 0};
            const double sy[4] = {0, 0, 1, 1};
            std::vector<double> corners(8);
            for (int i = 0; i < 4; ++i) {
                corners[2 * i] = sx[i] + rng.uniform(-0.25, 0.25);
                corners[2 * i + 1] = sy[i] + rng.uniform(-0.25, 0.25);
            }
            spec = DistortionSpec::perspective(corners);
            break;
        }
        case DistortionKind::ARC:
            spec = DistortionSpec::arc(rng.uniform(45.0, 120.0) * M_PI / 180.0);
            break;
        case DistortionKind::POLAR: spec = DistortionSpec::polar(); break;
        case DistortionKind::TILE: spec = DistortionSpec::tile(3.0); break;
        case DistortionKind::AFFINE: {
            const double rot = rng.uniform(-30.0, 30.0) * M_PI / 180.0;
            const double shear = rng.uniform(-0.3, 0.3);
            const double cs = std::cos(rot), sn = std::sin(rot);
            spec = DistortionSpec::affine(cs, cs * shear - sn, sn, sn * shear + cs);
            break;
        }
        default: throw ConfigError("sample_train_spec: unreachable");
    }
    spec.seed = rng_seed;
    return spec;
}

std::vector<ImageSample> generate_validation_set(const std::vector<ImageSample>& dataset,
                                                 DistortionKind kind) {
    if (kind_family(kind) != DistortionFamily::VAL_SET)
        throw ParamError(std::string("generate_validation_set: ") + kind_name(kind) +
                         " is a training distortion");
    std::vector<ImageSample> out;
    out.reserve(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset[i];
        if (s.label != Label::ID)
            throw ParamError("generate_validation_set: inputs must all be labeled ID");
        const uint64_t seed = derive_seed(fnv1a(s.source_id), static_cast<uint64_t>(kind), i);
        ImageSample d = distort(s, DistortionSpec::default_for(kind, seed));
        d.split = Split::VAL_GENERATED;
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace tend
