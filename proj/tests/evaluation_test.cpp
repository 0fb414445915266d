#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tend/errors.hpp"
#include "tend/evaluation.hpp"
#include "tend/rng.hpp"

#include "metric_oracles.hpp"

using namespace tend;
using namespace tend::testutil;

namespace {

std::vector<LabeledScore> make_set(std::vector<double> id_scores,
                                   std::vector<double> ood_scores) {
    std::vector<LabeledScore> out;
    for (double s : id_scores) out.push_back({s, Label::ID});
    for (double s : ood_scores) out.push_back({s, Label::OOD});
    return out;
}

}  // namespace

TEST_CASE("auroc hand values") {
    CHECK(auroc(make_set({0.1, 0.2}, {0.8, 0.9})) == 1.0);
    CHECK(auroc(make_set({0.8, 0.9}, {0.1, 0.2})) == 0.0);
    CHECK(auroc(make_set({2.0}, {1.0, 3.0})) == 0.5);
    CHECK(auroc(make_set({0.5, 0.5}, {0.5, 0.5})) == 0.5);
    CHECK(auroc(make_set({0.3}, {0.3, 0.9})) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("auroc rejects degenerate inputs") {
    CHECK_THROWS_AS(auroc(make_set({0.1, 0.2}, {})), MetricError);
    CHECK_THROWS_AS(auroc(make_set({}, {0.1})), MetricError);
    CHECK_THROWS_AS(auroc({}), MetricError);
    CHECK_THROWS_AS(auroc({{0.5, Label::UNKNOWN}, {0.2, Label::ID}}), MetricError);
    CHECK_THROWS_AS(auroc(make_set({std::nan("")}, {0.1})), MetricError);
}

TEST_CASE("auroc matches the pairwise-count oracle on random tied sets") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_id = 1 + static_cast<int>(rng.uniform_int(0, 80));
        const int n_ood = 1 + static_cast<int>(rng.uniform_int(0, 80));
        std::vector<LabeledScore> scores;
        // Coarse grid of values forces plenty of exact ties.
        for (int i = 0; i < n_id; ++i)
            scores.push_back({rng.uniform_int(0, 12) * 0.125, Label::ID});
        for (int i = 0; i < n_ood; ++i)
            scores.push_back({rng.uniform_int(2, 14) * 0.125, Label::OOD});
        rng.shuffle(scores);
        CHECK(std::abs(auroc(scores) - auroc_pairwise_oracle(scores)) <= 1e-12);
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    Rng rng(99);
    std::vector<LabeledScore> scores;
    for (int i = 0; i < 40; ++i) scores.push_back({rng.uniform_int(0, 9) * 0.1, Label::ID});
    for (int i = 0; i < 30; ++i) scores.push_back({rng.uniform_int(3, 12) * 0.1, Label::OOD});

    auto mapped = scores;
    for (auto& ls : mapped) ls.s = 3.0 * ls.s + 7.0;
    CHECK(auroc(mapped) == auroc(scores));
    for (auto& ls : mapped) ls.s = std::exp(ls.s);
    CHECK(auroc(mapped) == auroc(scores));
}

TEST_CASE("confusion hand counts and rate conventions") {
    const auto scores = make_set({0.1, 0.2, 0.4}, {0.3, 0.5, 0.6});
    const Confusion c = confusion(scores, 0.35);
    CHECK(c.tp == 2);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);
    CHECK(c.tn == 2);
    CHECK(c.tpr == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(c.fpr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(c.tnr == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(c.fnr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    // A score equal to the threshold is called OOD.
    const Confusion at = confusion(make_set({0.5}, {0.5}), 0.5);
    CHECK(at.tp == 1);
    CHECK(at.fp == 1);

    const Confusion id_only = confusion({{0.2, Label::ID}, {0.8, Label::ID}}, 0.5);
    CHECK(id_only.tpr == 0.0);  // zero denominator reports zero
    CHECK(id_only.fnr == 0.0);
    CHECK(id_only.fpr == 0.5);
}

TEST_CASE("confusion rates move monotonically with the threshold") {
    Rng rng(55);
    std::vector<LabeledScore> scores;
    for (int i = 0; i < 50; ++i) scores.push_back({rng.uniform(), Label::ID});
    for (int i = 0; i < 50; ++i) scores.push_back({rng.uniform() + 0.3, Label::OOD});

    double prev_tpr = 2.0, prev_fpr = 2.0;
    for (double t = -0.5; t <= 1.9; t += 0.05) {
        const Confusion c = confusion(scores, t);
        CHECK(c.tpr <= prev_tpr);
        CHECK(c.fpr <= prev_fpr);
        CHECK(c.tp + c.fn == 50);
        CHECK(c.fp + c.tn == 50);
        prev_tpr = c.tpr;
        prev_fpr = c.fpr;
    }
}

TEST_CASE("gmean threshold on the six-point hand set") {
    // Candidates .25 and .45 tie on G = sqrt(2/3) and on DIFF = 2/3; the
    // smaller threshold wins.
    const auto scores = make_set({0.1, 0.2, 0.4}, {0.3, 0.5, 0.6});
    const ThresholdChoice best = gmean_threshold(scores);
    CHECK(best.threshold == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(best.gmean == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
    CHECK(best.tpr == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(best.fpr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(best.diff == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("gmean threshold is perfect on separable data and sane on noise") {
    const auto separable = make_set({0.1, 0.2, 0.3}, {0.7, 0.8});
    const ThresholdChoice best = gmean_threshold(separable);
    CHECK(best.gmean == 1.0);
    CHECK(best.tpr == 1.0);
    CHECK(best.fpr == 0.0);
    CHECK(best.threshold == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(31);
    std::vector<LabeledScore> noisy;
    for (int i = 0; i < 60; ++i) noisy.push_back({rng.uniform(), Label::ID});
    for (int i = 0; i < 60; ++i) noisy.push_back({rng.uniform() + 0.4, Label::OOD});
    const ThresholdChoice nb = gmean_threshold(noisy);
    const Confusion at = confusion(noisy, nb.threshold);
    CHECK(nb.tpr == at.tpr);  // reported rates match the threshold
    CHECK(nb.fpr == at.fpr);
    CHECK(nb.gmean == doctest::Approx(std::sqrt(at.tpr * (1.0 - at.fpr))).epsilon(1e-15));
}

TEST_CASE("gmean threshold matches the exhaustive oracle on random tied sets") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_id = 1 + static_cast<int>(rng.uniform_int(0, 40));
        const int n_ood = 1 + static_cast<int>(rng.uniform_int(0, 40));
        std::vector<LabeledScore> scores;
        for (int i = 0; i < n_id; ++i)
            scores.push_back({rng.uniform_int(0, 10) * 0.25, Label::ID});
        for (int i = 0; i < n_ood; ++i)
            scores.push_back({rng.uniform_int(0, 10) * 0.25, Label::OOD});
        rng.shuffle(scores);

        const ThresholdChoice got = gmean_threshold(scores);
        const ThresholdChoice want = gmean_threshold_oracle(scores);
        CHECK(got.threshold == want.threshold);
        CHECK(got.gmean == want.gmean);
        CHECK(got.tpr == want.tpr);
        CHECK(got.fpr == want.fpr);
    }
}

TEST_CASE("inseparable scores fall back to calling everything ID") {
    const auto flat = make_set({0.5, 0.5, 0.5}, {0.5, 0.5});
    const ThresholdChoice best = gmean_threshold(flat);
    CHECK(best.threshold == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(best.gmean == 0.0);
    CHECK(best.tpr == 0.0);
    CHECK(best.fpr == 0.0);
    const Confusion c = confusion(flat, best.threshold);
    CHECK(c.tp + c.fp == 0);  // nothing is called OOD
}

TEST_CASE("validation accuracy is the flagged fraction") {
    const std::vector<double> val = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    CHECK(validation_accuracy(val, 0.35) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(validation_accuracy(val, 0.1) == 1.0);   // threshold-equal scores count
    CHECK(validation_accuracy(val, 1.01) == 0.0);
    CHECK_THROWS_AS(validation_accuracy({}, 0.5), MetricError);
}

TEST_CASE("transform grouping splits on the final colon") {
    std::vector<ScoreRecord> recs(5);
    recs[0].source_id = "data/img_07:arc";
    recs[0].S = 0.9;
    recs[1].source_id = "data/img_08:arc";
    recs[1].S = 0.7;
    recs[2].source_id = "data/img_07:barrel";
    recs[2].S = 0.2;
    recs[3].source_id = "plain_id";
    recs[3].S = 0.1;
    recs[4].source_id = "weird:path:polar";
    recs[4].S = 0.5;

    const auto groups = scores_by_transform(recs);
    REQUIRE(groups.size() == 4);
    CHECK(groups.at("arc") == std::vector<double>{0.9, 0.7});
    CHECK(groups.at("barrel") == std::vector<double>{0.2});
    CHECK(groups.at("") == std::vector<double>{0.1});
    CHECK(groups.at("polar") == std::vector<double>{0.5});
}

TEST_CASE("evaluate assembles a full report") {
    std::vector<ScoreRecord> test(6);
    const double ss[6] = {0.1, 0.2, 0.4, 0.3, 0.5, 0.6};
    for (int i = 0; i < 6; ++i) {
        test[i].source_id = "t" + std::to_string(i);
        test[i].S = ss[i];
        test[i].label = i < 3 ? Label::ID : Label::OOD;
    }
    std::vector<ScoreRecord> val(4);
    const double vs[4] = {0.3, 0.6, 0.1, 0.9};
    const char* tags[4] = {"v0:arc", "v1:arc", "v2:polar", "v3:polar"};
    for (int i = 0; i < 4; ++i) {
        val[i].source_id = tags[i];
        val[i].S = vs[i];
        val[i].label = Label::OOD;
    }

    const EvalReport rep = evaluate(test, &val);
    CHECK(rep.n_id == 3);
    CHECK(rep.n_ood == 3);
    CHECK(rep.auroc == doctest::Approx(auroc(to_labeled(test))).epsilon(1e-15));
    CHECK(rep.choice.threshold == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(rep.acc_val == doctest::Approx(0.75).epsilon(1e-15));  // 0.3, 0.6, 0.9 >= 0.25
    REQUIRE(rep.acc_val_by_transform.size() == 2);
    CHECK(rep.acc_val_by_transform[0].first == "arc");
    CHECK(rep.acc_val_by_transform[0].second == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(rep.acc_val_by_transform[1].first == "polar");
    CHECK(rep.acc_val_by_transform[1].second == doctest::Approx(0.5).epsilon(1e-15));

    const std::string text = rep.to_text();
    CHECK(text.find("auroc:") != std::string::npos);
    CHECK(text.find("acc_val[arc]:") != std::string::npos);
    const std::string csv = rep.to_csv();
    CHECK(csv.find("n_id,n_ood,auroc,threshold,gmean,tpr,fpr,diff,tp,fn,fp,tn,acc_val\n") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

    const EvalReport no_val = evaluate(test);
    CHECK_FALSE(no_val.has_val);
    CHECK(no_val.to_csv().back() == '\n');
    CHECK_THROWS_AS(evaluate({}), MetricError);
}
