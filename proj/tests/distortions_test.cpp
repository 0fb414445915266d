#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tend/distortions.hpp"
#include "tend/errors.hpp"
#include "tend/rng.hpp"

#include "test_util.hpp"

using namespace tend;
using namespace tend::testutil;

TEST_CASE("kind names round-trip and map to the right family") {
    int train = 0, val = 0;
    for (int k = 0; k <= static_cast<int>(DistortionKind::GAUSSIAN_BLUR); ++k) {
        const auto kind = static_cast<DistortionKind>(k);
        CHECK(kind_from_name(kind_name(kind)) == kind);
        (kind_family(kind) == DistortionFamily::TRAIN_SET ? train : val)++;
    }
    CHECK(train == kTrainKindCount);
    CHECK(val == kValKindCount);
    CHECK(train_kinds().size() == static_cast<size_t>(kTrainKindCount));
    CHECK(val_kinds().size() == static_cast<size_t>(kValKindCount));
    for (const auto k : train_kinds()) CHECK(kind_family(k) == DistortionFamily::TRAIN_SET);
    for (const auto k : val_kinds()) CHECK(kind_family(k) == DistortionFamily::VAL_SET);
    CHECK_THROWS_AS(kind_from_name("swirl"), ParamError);
}

TEST_CASE("identity parameterizations reproduce the input bit for bit") {
    const auto s = id_sample(textured_image(48, 40, 3), "a");

    CHECK(images_identical(distort(s, DistortionSpec::affine_identity()).image, s.image));
    CHECK(images_identical(distort(s, DistortionSpec::barrel(0, 0, 0, 1)).image, s.image));
    CHECK(images_identical(distort(s, DistortionSpec::noise(0.0, 7)).image, s.image));
}

TEST_CASE("perspective with unit-square corners is the identity up to round-off") {
    const auto s = id_sample(textured_image(40, 40, 1), "a");
    const auto out = distort(s, DistortionSpec::perspective({0, 0, 1, 0, 1, 1, 0, 1}));
    CHECK(mean_abs_diff(out.image, s.image) < 1e-6);
}

TEST_CASE("distorted samples keep shape and stay inside [0,1]") {
    const auto s = id_sample(textured_image(40, 36, 3), "a");
    for (int k = 0; k <= static_cast<int>(DistortionKind::GAUSSIAN_BLUR); ++k) {
        const auto kind = static_cast<DistortionKind>(k);
        const auto out = distort(s, DistortionSpec::default_for(kind, 99));
        CHECK(out.image.same_shape(s.image));
        CHECK(pixels_in_unit_range(out.image));
        CHECK(out.label == Label::OOD);
        CHECK(out.source_id == std::string("a:") + kind_name(kind));
    }
}

TEST_CASE("every default distortion visibly changes a textured image") {
    const auto s = id_sample(textured_image(64, 64, 3), "a");
    for (int k = 0; k <= static_cast<int>(DistortionKind::GAUSSIAN_BLUR); ++k) {
        const auto kind = static_cast<DistortionKind>(k);
        const auto out = distort(s, DistortionSpec::default_for(kind, 5));
        INFO("kind = ", kind_name(kind));
        CHECK(mean_abs_diff(out.image, s.image) > 0.01);
    }
}

TEST_CASE("repeat application with the same spec is bit-exact, seeds matter") {
    const auto s = id_sample(textured_image(40, 40, 3), "a");
    for (int k = 0; k <= static_cast<int>(DistortionKind::GAUSSIAN_BLUR); ++k) {
        const auto kind = static_cast<DistortionKind>(k);
        const auto spec = DistortionSpec::default_for(kind, 123);
        CHECK(images_identical(distort(s, spec).image, distort(s, spec).image));
    }
    for (const auto kind : {DistortionKind::RANDOM_CUT, DistortionKind::RANDOM_CROP_RESIZE,
                            DistortionKind::NOISE}) {
        const auto a = distort(s, DistortionSpec::default_for(kind, 1)).image;
        const auto b = distort(s, DistortionSpec::default_for(kind, 2)).image;
        CHECK(!images_identical(a, b));
    }
}

TEST_CASE("bad parameters are rejected") {
    const auto s = id_sample(textured_image(16, 16, 1), "a");
    CHECK_THROWS_AS(distort(s, DistortionSpec::affine(1, 2, 2, 4)), ParamError);  // singular
    CHECK_THROWS_AS(distort(s, DistortionSpec::arc(0.0)), ParamError);
    CHECK_THROWS_AS(distort(s, DistortionSpec::arc(4.0)), ParamError);
    CHECK_THROWS_AS(distort(s, DistortionSpec::tile(0.5)), ParamError);
    CHECK_THROWS_AS(distort(s, DistortionSpec::noise(-0.1, 0)), ParamError);
    CHECK_THROWS_AS(distort(s, DistortionSpec::gaussian_blur(0.0)), ParamError);
    CHECK_THROWS_AS(distort(s, DistortionSpec::random_cut(0, 0.0, 0.5)), ParamError);
    CHECK_THROWS_AS(distort(s, DistortionSpec::random_cut(0, 0.4, 0.2)), ParamError);
    CHECK_THROWS_AS(DistortionSpec::perspective({0, 0, 1, 0}), ParamError);
    ImageSample empty;
    CHECK_THROWS_AS(distort(empty, DistortionSpec::affine_identity()), ParamError);
}

TEST_CASE("arc maps the band midpoint below center back to the source center") {
    // 65x65 with a 90 degree arc: rho_in = 0, so the point at half the outer
    // radius below the arc center lands exactly on source pixel (32, 32).
    const auto s = id_sample(textured_image(65, 65, 1), "a");
    const auto out = distort(s, DistortionSpec::arc(M_PI / 2.0));
    CHECK(out.image.at(32, 32, 0) == doctest::Approx(s.image.at(32, 32, 0)).epsilon(1e-6));
    // Frame corners fall outside the sector and take the fill value.
    CHECK(out.image.at(64, 0, 0) == 0.0f);
    CHECK(out.image.at(64, 64, 0) == 0.0f);
}

TEST_CASE("polar unwrap sends the top output row to the source center") {
    const auto s = id_sample(textured_image(65, 65, 3), "a");
    const auto out = distort(s, DistortionSpec::polar());
    for (int x = 0; x < 65; x += 16)
        for (int c = 0; c < 3; ++c)
            CHECK(out.image.at(0, x, c) == doctest::Approx(s.image.at(32, 32, c)).epsilon(1e-6));
    // Bottom-left output pixel: angle 0, full radius, i.e. source (32, 64).
    CHECK(out.image.at(64, 0, 0) == doctest::Approx(s.image.at(32, 64, 0)).epsilon(1e-6));
    // Radius never leaves the source frame, so a constant image stays constant.
    const auto flat = id_sample(Image::constant(33, 47, 1, 0.625f), "b");
    CHECK(images_identical(distort(flat, DistortionSpec::polar()).image, flat.image));
}

TEST_CASE("tile with k=2 makes four bit-identical quadrants") {
    const auto s = id_sample(textured_image(64, 64, 1), "a");
    const auto out = distort(s, DistortionSpec::tile(2.0)).image;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(out.at(y, x, 0) == out.at(y, x + 32, 0));
            CHECK(out.at(y, x, 0) == out.at(y + 32, x, 0));
            CHECK(out.at(y, x, 0) == out.at(y + 32, x + 32, 0));
        }
    // The top-left corner of each tile is the source corner pixel.
    CHECK(out.at(0, 0, 0) == s.image.at(0, 0, 0));
}

TEST_CASE("barrel keeps the center pixel and pulls the frame inward") {
    const auto s = id_sample(textured_image(65, 65, 1), "a");
    // d < 1 shrinks every source radius, so content near the rim moves in.
    const auto out = distort(s, DistortionSpec::barrel(0.0, 0.0, 0.0, 0.5)).image;
    CHECK(out.at(32, 32, 0) == s.image.at(32, 32, 0));
    // Output rim at x distance 32 samples source x distance 16.
    CHECK(out.at(32, 64, 0) == doctest::Approx(s.image.at(32, 48, 0)).epsilon(1e-6));
}

TEST_CASE("affine translation shifts content by whole pixels exactly") {
    const auto s = id_sample(textured_image(32, 32, 1), "a");
    const auto out = distort(s, DistortionSpec::affine(1, 0, 0, 1, 3, 0)).image;
    for (int y = 0; y < 32; ++y)
        for (int x = 3; x < 32; ++x) CHECK(out.at(y, x, 0) == s.image.at(y, x - 3, 0));
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 3; ++x) CHECK(out.at(y, x, 0) == 0.0f);
}

TEST_CASE("random cut zeroes one rectangle and nothing else") {
    const auto s = id_sample(textured_image(48, 48, 3), "a");
    const auto out = distort(s, DistortionSpec::random_cut(31, 0.1, 0.3)).image;

    int y0 = 48, y1 = -1, x0 = 48, x1 = -1;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            if (out.at(y, x, 0) != s.image.at(y, x, 0)) {
                y0 = std::min(y0, y); y1 = std::max(y1, y);
                x0 = std::min(x0, x); x1 = std::max(x1, x);
            }
    REQUIRE(y1 >= y0);
    const int area = (y1 - y0 + 1) * (x1 - x0 + 1);
    CHECK(area >= static_cast<int>(0.05 * 48 * 48));
    CHECK(area <= static_cast<int>(0.45 * 48 * 48));
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            for (int c = 0; c < 3; ++c) {
                const bool in_rect = y >= y0 && y <= y1 && x >= x0 && x <= x1;
                if (in_rect)
                    CHECK(out.at(y, x, c) == 0.0f);
                else
                    CHECK(out.at(y, x, c) == s.image.at(y, x, c));
            }
}

TEST_CASE("random crop resize keeps shape and the source value range") {
    const auto s = id_sample(textured_image(40, 56, 3), "a");
    const auto out = distort(s, DistortionSpec::random_crop_resize(17, 0.5, 0.8)).image;
    CHECK(out.same_shape(s.image));
    float lo = 1.0f, hi = 0.0f;
    for (const float v : s.image.pixels) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (const float v : out.pixels) {
        CHECK(v >= lo);
        CHECK(v <= hi);
    }
    CHECK(mean_abs_diff(out, s.image) > 0.01);
}

TEST_CASE("additive noise matches clamped gaussian moments") {
    const double sigma = 0.1;
    const int n = 64 * 64 * 3;

    // Zero image: the clamp turns N(0, sigma) into its positive part, with
    // mean sigma/sqrt(2*pi) and variance sigma^2*(1/2 - 1/(2*pi)).
    const auto zero = id_sample(Image::zeros(64, 64, 3), "z");
    const auto out0 = distort(zero, DistortionSpec::noise(sigma, 2024)).image;
    const double mean0 = pixel_mean(out0);
    const double expect_mean0 = sigma / std::sqrt(2.0 * M_PI);
    const double expect_var0 = sigma * sigma * (0.5 - 1.0 / (2.0 * M_PI));
    CHECK(std::abs(mean0 - expect_mean0) < 2.5e-3);
    CHECK(pixel_variance(out0) == doctest::Approx(expect_var0).epsilon(0.15));

    // Mid-gray image: clamping is inactive, plain gaussian moments apply.
    const auto gray = id_sample(Image::constant(64, 64, 3, 0.5f), "g");
    const auto outg = distort(gray, DistortionSpec::noise(sigma, 2025)).image;
    CHECK(std::abs(pixel_mean(outg) - 0.5) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
    CHECK(pixel_variance(outg) == doctest::Approx(sigma * sigma).epsilon(0.10));
}

TEST_CASE("gaussian blur reproduces kernel moments on an impulse") {
    const double sigma = 1.5;
    const auto s = id_sample(impulse_image(33, 33), "i");
    const auto out = distort(s, DistortionSpec::gaussian_blur(sigma)).image;

    // Mass is conserved (the support sits far from the border).
    CHECK(pixel_sum(out) == doctest::Approx(1.0).epsilon(1e-4));
    // Symmetric in all four directions and across the diagonal.
    for (int i = 1; i <= 5; ++i) {
        CHECK(out.at(16 + i, 16, 0) == doctest::Approx(out.at(16 - i, 16, 0)).epsilon(1e-6));
        CHECK(out.at(16, 16 + i, 0) == doctest::Approx(out.at(16 + i, 16, 0)).epsilon(1e-6));
    }
    // The second moment of the response recovers sigma^2.
    double m2 = 0.0;
    for (int y = 0; y < 33; ++y)
        for (int x = 0; x < 33; ++x) m2 += out.at(y, x, 0) * (y - 16.0) * (y - 16.0);
    CHECK(m2 == doctest::Approx(sigma * sigma).epsilon(0.05));

    // Blurring damps high-frequency content hard.
    const auto noisy = id_sample(noise_image(48, 48, 1, 11), "n");
    const auto blurred = distort(noisy, DistortionSpec::gaussian_blur(2.0)).image;
    CHECK(pixel_variance(blurred) < 0.25 * pixel_variance(noisy.image));
    // A constant image passes through unchanged.
    const auto flat = id_sample(Image::constant(24, 24, 3, 0.375f), "f");
    CHECK(images_identical(distort(flat, DistortionSpec::gaussian_blur(2.0)).image,
                           flat.image));
}

TEST_CASE("sampled training specs cover all six warps with in-range parameters") {
    int counts[kTrainKindCount] = {};
    for (uint64_t i = 0; i < 1200; ++i) {
        const auto spec = sample_train_spec(derive_seed(42, i));
        CHECK(spec.family() == DistortionFamily::TRAIN_SET);
        counts[static_cast<int>(spec.kind)]++;
        switch (spec.kind) {
            case DistortionKind::BARREL: {
                REQUIRE(spec.params.size() == 4);
                double sum = 0.0;
                for (int j = 0; j < 3; ++j) {
                    CHECK(spec.params[j] >= 0.0);
                    CHECK(spec.params[j] <= 0.3);
                    sum += spec.params[j];
                }
                CHECK(sum + spec.params[3] == doctest::Approx(1.0).epsilon(1e-12));
                break;
            }
            case DistortionKind::PERSPECTIVE: {
                REQUIRE(spec.params.size() == 8);
                const double sx[4] = {0, 1, 1, 0}, sy[4] = {0, 0, 1, 1};
                for (int j = 0; j < 4; ++j) {
                    CHECK(std::abs(spec.params[2 * j] - sx[j]) <= 0.25);
                    CHECK(std::abs(spec.params[2 * j + 1] - sy[j]) <= 0.25);
                }
                break;
            }
            case DistortionKind::ARC:
                REQUIRE(spec.params.size() == 1);
                CHECK(spec.params[0] >= 45.0 * M_PI / 180.0);
                CHECK(spec.params[0] <= 120.0 * M_PI / 180.0);
                break;
            case DistortionKind::POLAR: CHECK(spec.params.empty()); break;
            case DistortionKind::TILE:
                REQUIRE(spec.params.size() == 1);
                CHECK(spec.params[0] == 3.0);
                break;
            case DistortionKind::AFFINE: {
                REQUIRE(spec.params.size() == 6);
                const double det =
                    spec.params[0] * spec.params[3] - spec.params[1] * spec.params[2];
                CHECK(std::abs(det - 1.0) < 1e-9);  // rotation times unit shear
                break;
            }
            default: FAIL("val kind from sample_train_spec");
        }
    }
    for (int k = 0; k < kTrainKindCount; ++k) {
        INFO("kind = ", kind_name(static_cast<DistortionKind>(k)), " count = ", counts[k]);
        CHECK(counts[k] > 120);
    }
    // Same seed, same spec.
    const auto a = sample_train_spec(777), b = sample_train_spec(777);
    CHECK(a.kind == b.kind);
    CHECK(a.params == b.params);
}

TEST_CASE("validation set generation is labeled, split, and reproducible") {
    std::vector<ImageSample> data;
    for (int i = 0; i < 6; ++i)
        data.push_back(id_sample(textured_image(32, 32, 1), "img" + std::to_string(i)));

    const auto va = generate_validation_set(data, DistortionKind::NOISE);
    const auto vb = generate_validation_set(data, DistortionKind::NOISE);
    REQUIRE(va.size() == data.size());
    std::set<std::string> ids;
    for (size_t i = 0; i < va.size(); ++i) {
        CHECK(va[i].label == Label::OOD);
        CHECK(va[i].split == Split::VAL_GENERATED);
        CHECK(images_identical(va[i].image, vb[i].image));
        CHECK(!images_identical(va[i].image, data[i].image));
        ids.insert(va[i].source_id);
    }
    CHECK(ids.size() == va.size());

    CHECK_THROWS_AS(generate_validation_set(data, DistortionKind::BARREL), ParamError);
    auto bad = data;
    bad[0].label = Label::OOD;
    CHECK_THROWS_AS(generate_validation_set(bad, DistortionKind::GAUSSIAN_BLUR), ParamError);
}
