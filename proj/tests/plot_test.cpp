#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "tend/errors.hpp"
#include "tend/image.hpp"
#include "tend/plot.hpp"
#include "tend/rng.hpp"
#include "tend/util.hpp"

using namespace tend;

namespace {

std::vector<ScoreRecord> sample_records() {
    std::vector<ScoreRecord> recs;
    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        ScoreRecord r;
        r.source_id = "sample_" + std::to_string(i);
        r.label = i % 2 ? Label::OOD : Label::ID;
        r.d = rng.uniform(0.0, 500.0);
        r.d_prime = r.d / 250.0;
        r.p = rng.uniform();
        r.S = 0.5 * r.p + 0.5 * r.d_prime;
        recs.push_back(std::move(r));
    }
    return recs;
}

}  // namespace

TEST_CASE("plot angles are stable, spread, and in range") {
    const double a = plot_angle("data/img_01");
    CHECK(a == plot_angle("data/img_01"));
    CHECK(a >= 0.0);
    CHECK(a < 2.0 * M_PI);

    // Nearby ids should not all collapse onto one ray.
    double min_seen = 10.0, max_seen = -10.0;
    for (int i = 0; i < 50; ++i) {
        const double ang = plot_angle("data/img_" + std::to_string(i));
        min_seen = std::min(min_seen, ang);
        max_seen = std::max(max_seen, ang);
    }
    CHECK(max_seen - min_seen > 1.0);
}

TEST_CASE("plots render deterministically and decode as images") {
    const auto recs = sample_records();
    const char* t1 = "/tmp/tend_plot_truth_a.png";
    const char* p1 = "/tmp/tend_plot_pred_a.png";
    const char* t2 = "/tmp/tend_plot_truth_b.png";
    const char* p2 = "/tmp/tend_plot_pred_b.png";
    write_score_plots(t1, p1, recs, 250.0, 1.0, 480);
    write_score_plots(t2, p2, recs, 250.0, 1.0, 480);

    CHECK(read_text_file(t1) == read_text_file(t2));
    CHECK(read_text_file(p1) == read_text_file(p2));
    CHECK(read_text_file(t1) != read_text_file(p1));  // panels differ

    const Image truth = load_image(t1, 3);
    CHECK(truth.height == 480);
    CHECK(truth.width == 480);

    for (const char* f : {t1, p1, t2, p2}) std::remove(f);
}

TEST_CASE("empty record sets still draw the margin circle") {
    const char* t = "/tmp/tend_plot_truth_empty.png";
    const char* p = "/tmp/tend_plot_pred_empty.png";
    write_score_plots(t, p, {}, 100.0, 0.5, 256);
    const Image img = load_image(t, 3);
    CHECK(img.height == 256);
    std::remove(t);
    std::remove(p);
}

TEST_CASE("plot input validation") {
    CHECK_THROWS_AS(write_score_plots("/tmp/a.png", "/tmp/b.png", {}, 0.0, 0.5, 256),
                    ParamError);
    CHECK_THROWS_AS(write_score_plots("/tmp/a.png", "/tmp/b.png", {}, 100.0, 0.5, 8),
                    ParamError);
    std::vector<ScoreRecord> bad(1);
    bad[0].source_id = "x";
    bad[0].d = -1.0;
    CHECK_THROWS_AS(write_score_plots("/tmp/a.png", "/tmp/b.png", bad, 100.0, 0.5, 256),
                    DataError);
}
