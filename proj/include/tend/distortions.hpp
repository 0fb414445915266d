#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tend/image.hpp"

namespace tend {

// The six "extreme" warps (TRAIN_SET) serve as pseudo-outlier generators
// during training; the four "moderate" corruptions (VAL_SET) are reserved
// for the generated-OOD validation protocol.
enum class DistortionKind {
    BARREL,
    PERSPECTIVE,
    ARC,
    POLAR,
    TILE,
    AFFINE,
    RANDOM_CUT,
    RANDOM_CROP_RESIZE,
    NOISE,
    GAUSSIAN_BLUR,
};

enum class DistortionFamily { TRAIN_SET, VAL_SET };

const char* kind_name(DistortionKind k);
DistortionKind kind_from_name(const std::string& s);
DistortionFamily kind_family(DistortionKind k);

constexpr int kTrainKindCount = 6;
constexpr int kValKindCount = 4;
std::vector<DistortionKind> train_kinds();
std::vector<DistortionKind> val_kinds();

// A fully reproducible distortion: (kind, params, seed) on the same input
// always yields the bit-identical output. Pure warps are parameterized
// completely by `params`; the VAL_SET corruptions draw their placement /
// noise from `seed`.
//
// Parameter layout per kind:
//   BARREL              {a, b, c, d}   r_src = r_dst * (a r^3 + b r^2 + c r + d),
//                                      r normalized by half the min side
//   PERSPECTIVE         {x0,y0, x1,y1, x2,y2, x3,y3}  forward images of the unit
//                                      square corners TL,TR,BR,BL in unit coords
//   ARC                 {angle_rad}    image bent around a circular arc
//   POLAR               {}             cartesian -> polar unwrap about the center
//   TILE                {k}            shrink to 1/k and replicate
//   AFFINE              {m00,m01,m10,m11,tx,ty}  forward map about the center,
//                                      translation in pixels
//   RANDOM_CUT          {min_area_frac, max_area_frac}  black rectangle
//   RANDOM_CROP_RESIZE  {min_side_frac, max_side_frac}  crop window, resize back
//   NOISE               {sigma}        i.i.d. Gaussian, clamped to [0,1]
//   GAUSSIAN_BLUR       {sigma}        separable kernel, radius 3 sigma
struct DistortionSpec {
    DistortionKind kind = DistortionKind::AFFINE;
    std::vector<double> params;
    uint64_t seed = 0;

    DistortionFamily family() const { return kind_family(kind); }

    static DistortionSpec barrel(double a, double b, double c, double d);
    static DistortionSpec perspective(const std::vector<double>& corners, uint64_t seed = 0);
    static DistortionSpec arc(double angle_rad);
    static DistortionSpec polar();
    static DistortionSpec tile(double k);
    static DistortionSpec affine(double m00, double m01, double m10, double m11,
                                 double tx = 0.0, double ty = 0.0);
    static DistortionSpec affine_identity();
    static DistortionSpec random_cut(uint64_t seed, double min_frac = 0.1,
                                     double max_frac = 0.3);
    static DistortionSpec random_crop_resize(uint64_t seed, double min_frac = 0.5,
                                             double max_frac = 0.8);
    static DistortionSpec noise(double sigma, uint64_t seed);
    static DistortionSpec gaussian_blur(double sigma);

    // Fixed representative parameters per kind, used by the CLI and by the
    // validation-set generator.
    static DistortionSpec default_for(DistortionKind k, uint64_t seed = 0);
};

// Applies the distortion. Output keeps the input shape, intensities stay in
// [0,1], label becomes OOD. Out-of-frame source reads fill with black.
ImageSample distort(const ImageSample& sample, const DistortionSpec& spec);

// Draws one of the six training warps uniformly, with parameters from the
// documented per-kind ranges. Deterministic per seed.
DistortionSpec sample_train_spec(uint64_t rng_seed);

// Applies one VAL_SET corruption to every ID input; outputs are labeled OOD
// with split VAL_GENERATED. Per-sample randomness derives from the sample's
// source_id and position, so repeated calls agree.
std::vector<ImageSample> generate_validation_set(const std::vector<ImageSample>& dataset,
                                                 DistortionKind kind);

}  // namespace tend
