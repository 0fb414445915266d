#pragma once

// Stage 1 fits the autoencoder on ID images by mean squared error. Stage 2
// freezes the backbone and trains the head on ID images against distorted
// copies: binary cross-entropy on the logit plus a margin objective that pulls
// ID features toward the center O and pushes distorted features outside R.
// The center is the mean compressed ID feature, computed once after the
// BCE-only warm-up epochs and fixed from then on.

#include <cstdint>
#include <string>
#include <vector>

#include "tend/checkpoint.hpp"
#include "tend/distortions.hpp"
#include "tend/image.hpp"
#include "tend/model.hpp"
#include "tend/tensor.hpp"

namespace tend {

// The margin terms sum squared deviations over the K feature dimensions;
// MEAN_DIM divides by K (the default), SUM_DIM keeps the raw sum.
enum class MarginReduction { MEAN_DIM, SUM_DIM };

const char* margin_reduction_name(MarginReduction r);
MarginReduction margin_reduction_from_name(const std::string& s);

struct TrainConfig {
    int stage = 1;
    int epochs = 50;
    double learning_rate = 1e-3;
    int batch_size = 16;
    int warmup_epochs = 10;
    double margin_r = 250.0;
    MarginReduction margin_reduction = MarginReduction::MEAN_DIM;
    uint64_t seed = 0;
    bool supervised_mode = false;

    void validate() const;
};

struct Center {
    std::vector<double> O;
    int computed_at_epoch = -1;
    bool valid() const { return !O.empty(); }
};

// One row of the per-epoch loss log. Stage 1 uses only `total` (the
// reconstruction loss); stage 2 fills all three.
struct EpochLog {
    int epoch = 0;
    double total = 0.0;
    double bce = 0.0;
    double margin = 0.0;
};

double reconstruction_loss(const Image& img, const Image& recon);

double margin_loss_in(const std::vector<double>& c, const std::vector<double>& O,
                      MarginReduction red = MarginReduction::MEAN_DIM);
double margin_loss_out(const std::vector<double>& c, const std::vector<double>& O, double R,
                       MarginReduction red = MarginReduction::MEAN_DIM);

struct Stage2LossTerms {
    double total = 0.0;
    double bce = 0.0;
    double margin = 0.0;
};

// Feature-level joint loss with analytic gradients. c_* is [B, K], logit_*
// is [B, 1]; ID carries target 0, distorted target 1. BCE averages over the
// combined batch; each margin term averages over its own batch. Gradient
// outputs may be null. With include_margin false (warm-up) O may be empty.
Stage2LossTerms stage2_loss_from_features(const Tensor& c_id, const Tensor& logit_id,
                                          const Tensor& c_dist, const Tensor& logit_dist,
                                          const std::vector<double>& O, double R,
                                          MarginReduction red, bool include_margin,
                                          Tensor* grad_c_id, Tensor* grad_logit_id,
                                          Tensor* grad_c_dist, Tensor* grad_logit_dist);

// Image-level wrapper: eval-mode forward of both batches, no gradients.
Stage2LossTerms stage2_loss(TendModel& model, const std::vector<ImageSample>& batch_id,
                            const std::vector<ImageSample>& batch_distorted,
                            const Center& center, double R, MarginReduction red);

// Mean compressed feature over all ID samples, eval mode, dataset order.
Center compute_center(TendModel& model, const std::vector<ImageSample>& id_data,
                      int batch_size, int computed_at_epoch);

std::vector<EpochLog> train_stage1(TendModel& model, const std::vector<ImageSample>& id_data,
                                   const TrainConfig& cfg);

struct Stage2Result {
    Center center;
    std::vector<EpochLog> log;
};

// backbone_stage guards against training the head on an unfinished backbone.
// supervised_mode draws counterpart batches from ood_train (real outliers,
// BCE only) instead of distorting ID samples.
Stage2Result train_stage2(TendModel& model, const std::vector<ImageSample>& id_data,
                          const TrainConfig& cfg, Stage backbone_stage,
                          const std::vector<ImageSample>* ood_train = nullptr);

void write_epoch_log_csv(const std::string& path, const std::vector<EpochLog>& log,
                         int stage);

}  // namespace tend
