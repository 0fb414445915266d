#pragma once

// Anomaly scoring. A stage-2 model yields an outlier probability p from the
// classifier logit and a squared feature distance d from the center; the
// blended score S = lambda * p + (1 - lambda) * d / R rises with novelty.
// Ablation modes expose each ingredient alone, and AE_RECON scores by
// reconstruction error so a stage-1 checkpoint can serve as a baseline.

#include <string>
#include <vector>

#include "tend/checkpoint.hpp"
#include "tend/image.hpp"
#include "tend/model.hpp"
#include "tend/training.hpp"

namespace tend {

enum class ScoreMode { TEND, MARGIN_ONLY, CLASSIFIER_ONLY, AE_RECON };

const char* score_mode_name(ScoreMode m);
ScoreMode score_mode_from_name(const std::string& s);

struct ScoreRecord {
    std::string source_id;
    Label label = Label::UNKNOWN;
    double p = 0.0;        // sigmoid of the classifier logit
    double d = 0.0;        // squared distance of the compressed feature to O
    double d_prime = 0.0;  // d / R
    double S = 0.0;
    ScoreMode mode = ScoreMode::TEND;
};

// The blended anomaly score: lambda weights the classifier probability
// against the margin-normalized distance.
double blend_score(double p, double d, double R, double lambda);

// Scores one sample in eval mode. AE_RECON accepts any checkpoint stage and
// reports the reconstruction error as S with p = d = d_prime = 0; the other
// modes require a stage-2 checkpoint with a computed center and R > 0.
ScoreRecord score(TendModel& model, const ImageSample& sample, const Center& center,
                  double R, double lambda, ScoreMode mode, Stage ckpt_stage);

// Per-sample loop preserving input order.
std::vector<ScoreRecord> score_batch(TendModel& model, const std::vector<ImageSample>& samples,
                                     const Center& center, double R, double lambda,
                                     ScoreMode mode, Stage ckpt_stage);

void write_scores_csv(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores_csv(const std::string& path);

}  // namespace tend
