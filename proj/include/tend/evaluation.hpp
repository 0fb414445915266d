#pragma once

// Threshold-invariant evaluation of anomaly scores. AUROC treats OOD as the
// positive class. The operating threshold is chosen by maximizing the
// geometric mean of TPR and TNR over midpoints between distinct scores plus
// two sentinels beyond the extremes; a sample is called OOD when its score is
// at least the threshold.

#include <map>
#include <string>
#include <vector>

#include "tend/image.hpp"
#include "tend/scoring.hpp"

namespace tend {

struct LabeledScore {
    double s = 0.0;
    Label truth = Label::UNKNOWN;
};

std::vector<LabeledScore> to_labeled(const std::vector<ScoreRecord>& records);

// Mann-Whitney form: average ranks over the pooled sample, ties counted half.
// Needs at least one score of each class.
double auroc(const std::vector<LabeledScore>& scores);

struct ThresholdChoice {
    double threshold = 0.0;
    double gmean = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double diff = 0.0;  // tpr - fpr
};

// Best threshold by G = sqrt(TPR * (1 - FPR)); ties prefer larger DIFF, then
// the smaller threshold. If no candidate separates anything (best G = 0) the
// high sentinel wins and everything is called ID.
ThresholdChoice gmean_threshold(const std::vector<LabeledScore>& scores);

struct Confusion {
    long long tp = 0, fn = 0, fp = 0, tn = 0;
    double tpr = 0.0, fpr = 0.0, tnr = 0.0, fnr = 0.0;
};

// Counts at a fixed threshold; a rate whose denominator is zero reports 0.
Confusion confusion(const std::vector<LabeledScore>& scores, double threshold);

// Fraction of validation scores called OOD at the threshold. For generated
// validation sets every sample is a distorted copy, so this fraction is the
// detection accuracy on them.
double validation_accuracy(const std::vector<double>& val_scores, double threshold);

// Validation scores grouped by the transform tag, the source_id suffix after
// the last ':'. Records without a tag group under "".
std::map<std::string, std::vector<double>> scores_by_transform(
    const std::vector<ScoreRecord>& records);

struct EvalReport {
    long long n_id = 0;
    long long n_ood = 0;
    double auroc = 0.0;
    ThresholdChoice choice;
    Confusion at_threshold;
    bool has_val = false;
    double acc_val = 0.0;
    std::vector<std::pair<std::string, double>> acc_val_by_transform;  // sorted by tag

    std::string to_text() const;
    std::string to_csv() const;  // header line + one value line
};

EvalReport evaluate(const std::vector<ScoreRecord>& test_scores,
                    const std::vector<ScoreRecord>* val_scores = nullptr);

}  // namespace tend
