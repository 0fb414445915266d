#include "tend/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tend/errors.hpp"
#include "tend/rng.hpp"
#include "tend/util.hpp"

namespace tend {

const char* margin_reduction_name(MarginReduction r) {
    return r == MarginReduction::MEAN_DIM ? "mean_dim" : "sum_dim";
}

MarginReduction margin_reduction_from_name(const std::string& s) {
    if (s == "mean_dim") return MarginReduction::MEAN_DIM;
    if (s == "sum_dim") return MarginReduction::SUM_DIM;
    throw ConfigError("unknown margin_reduction: " + s);
}

void TrainConfig::validate() const {
    if (stage != 1 && stage != 2) throw ConfigError("train: stage must be 1 or 2");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (stage == 2) {
        if (warmup_epochs < 0) throw ConfigError("train: warmup_epochs must be >= 0");
        if (warmup_epochs >= epochs)
            throw ConfigError("train: stage 2 requires warmup_epochs < epochs");
        if (!(margin_r > 0.0)) throw ConfigError("train: margin R must be > 0");
    }
}

double reconstruction_loss(const Image& img, const Image& recon) {
    if (!img.same_shape(recon)) throw ParamError("reconstruction_loss: shape mismatch");
    if (img.empty()) throw ParamError("reconstruction_loss: empty image");
    double sum = 0.0;
    for (size_t i = 0; i < img.pixels.size(); ++i) {
        const double d = static_cast<double>(img.pixels[i]) - recon.pixels[i];
        sum += d * d;
    }
    return sum / static_cast<double>(img.pixels.size());
}

namespace {

double reduction_scale(size_t k, MarginReduction red) {
    return red == MarginReduction::MEAN_DIM ? 1.0 / static_cast<double>(k) : 1.0;
}

// Numerically stable BCE from the logit; target is 0 (ID) or 1 (distorted).
double bce_from_logit(double z, double target) {
    return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<const Image*> batch_pointers(const std::vector<ImageSample>& data,
                                         const std::vector<size_t>& order, size_t begin,
                                         size_t end) {
    std::vector<const Image*> out;
    out.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) out.push_back(&data[order[i]].image);
    return out;
}

void require_all_id(const std::vector<ImageSample>& data, const char* who) {
    if (data.empty()) throw DataError(std::string(who) + ": empty dataset");
    for (const auto& s : data)
        if (s.label != Label::ID)
            throw DataError(std::string(who) + ": non-ID sample " + s.source_id);
}

}  // namespace

double margin_loss_in(const std::vector<double>& c, const std::vector<double>& O,
                      MarginReduction red) {
    if (c.size() != O.size() || c.empty())
        throw ParamError("margin_loss_in: feature/center length mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < c.size(); ++i) {
        const double d = c[i] - O[i];
        sum += d * d;
    }
    return sum * reduction_scale(c.size(), red);
}

double margin_loss_out(const std::vector<double>& c, const std::vector<double>& O, double R,
                       MarginReduction red) {
    if (c.size() != O.size() || c.empty())
        throw ParamError("margin_loss_out: feature/center length mismatch");
    if (!(R > 0.0)) throw ParamError("margin_loss_out: R must be > 0");
    double sum = 0.0;
    for (size_t i = 0; i < c.size(); ++i) {
        const double d = c[i] - O[i];
        sum += std::max(R - d * d, 0.0);
    }
    return sum * reduction_scale(c.size(), red);
}

Stage2LossTerms stage2_loss_from_features(const Tensor& c_id, const Tensor& logit_id,
                                          const Tensor& c_dist, const Tensor& logit_dist,
                                          const std::vector<double>& O, double R,
                                          MarginReduction red, bool include_margin,
                                          Tensor* grad_c_id, Tensor* grad_logit_id,
                                          Tensor* grad_c_dist, Tensor* grad_logit_dist) {
    const int b_id = c_id.n, b_dist = c_dist.n;
    if (b_id < 1 || b_dist < 1) throw ParamError("stage2_loss: empty batch");
    const int k = c_id.chw();
    if (c_dist.chw() != k) throw ParamError("stage2_loss: feature width mismatch");
    if (logit_id.n != b_id || logit_dist.n != b_dist || logit_id.chw() != 1 ||
        logit_dist.chw() != 1)
        throw ParamError("stage2_loss: logit shape mismatch");
    if (include_margin && static_cast<int>(O.size()) != k)
        throw ConfigError("stage2_loss: margin requested before the center was computed");

    const double total_n = b_id + b_dist;
    if (grad_c_id) *grad_c_id = Tensor::zeros(b_id, c_id.c, c_id.h, c_id.w);
    if (grad_c_dist) *grad_c_dist = Tensor::zeros(b_dist, c_dist.c, c_dist.h, c_dist.w);
    if (grad_logit_id) *grad_logit_id = Tensor::zeros(b_id, 1, 1, 1);
    if (grad_logit_dist) *grad_logit_dist = Tensor::zeros(b_dist, 1, 1, 1);

    Stage2LossTerms terms;
    for (int i = 0; i < b_id; ++i) {
        const double z = logit_id.data[i];
        terms.bce += bce_from_logit(z, 0.0);
        if (grad_logit_id) grad_logit_id->data[i] = sigmoid(z) / total_n;
    }
    for (int i = 0; i < b_dist; ++i) {
        const double z = logit_dist.data[i];
        terms.bce += bce_from_logit(z, 1.0);
        if (grad_logit_dist) grad_logit_dist->data[i] = (sigmoid(z) - 1.0) / total_n;
    }
    terms.bce /= total_n;

    if (include_margin) {
        const double scale = reduction_scale(static_cast<size_t>(k), red);
        double m_in = 0.0, m_out = 0.0;
        for (int i = 0; i < b_id; ++i) {
            const double* c = c_id.sample(i);
            double* g = grad_c_id ? grad_c_id->sample(i) : nullptr;
            for (int j = 0; j < k; ++j) {
                const double d = c[j] - O[j];
                m_in += d * d * scale;
                if (g) g[j] = 2.0 * d * scale / static_cast<double>(b_id);
            }
        }
        for (int i = 0; i < b_dist; ++i) {
            const double* c = c_dist.sample(i);
            double* g = grad_c_dist ? grad_c_dist->sample(i) : nullptr;
            for (int j = 0; j < k; ++j) {
                const double d = c[j] - O[j];
                const double hinge = R - d * d;
                if (hinge > 0.0) {
                    m_out += hinge * scale;
                    if (g) g[j] = -2.0 * d * scale / static_cast<double>(b_dist);
                }
            }
        }
        terms.margin = m_in / b_id + m_out / b_dist;
    }

    terms.total = terms.bce + terms.margin;
    return terms;
}

namespace {

// Forward a combined ID+distorted batch through the frozen encoder and the
// head; returns compressed features and logits, ID samples first.
struct HeadForward {
    Tensor c;
    Tensor logit;
};

HeadForward head_forward(TendModel& model, const std::vector<const Image*>& images) {
    const Tensor x = images_to_tensor(images);
    const Tensor latent = model.encode(x);
    HeadForward out;
    out.c = model.compress(latent);
    out.logit = model.classify_logit(out.c);
    return out;
}

Tensor slice_samples(const Tensor& t, int begin, int end) {
    Tensor out = Tensor::zeros(end - begin, t.c, t.h, t.w);
    std::copy(t.data.begin() + static_cast<size_t>(begin) * t.chw(),
              t.data.begin() + static_cast<size_t>(end) * t.chw(), out.data.begin());
    return out;
}

Tensor concat_samples(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::zeros(a.n + b.n, a.c, a.h, a.w);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

}  // namespace

Stage2LossTerms stage2_loss(TendModel& model, const std::vector<ImageSample>& batch_id,
                            const std::vector<ImageSample>& batch_distorted,
                            const Center& center, double R, MarginReduction red) {
    if (batch_id.empty() || batch_distorted.empty())
        throw ParamError("stage2_loss: empty batch");
    if (!center.valid())
        throw ConfigError("stage2_loss: margin requested before the center was computed");

    model.set_backbone_training(false);
    model.set_head_training(false);

    std::vector<const Image*> images;
    for (const auto& s : batch_id) images.push_back(&s.image);
    for (const auto& s : batch_distorted) images.push_back(&s.image);
    const HeadForward fwd = head_forward(model, images);

    const int b_id = static_cast<int>(batch_id.size());
    const int b_all = static_cast<int>(images.size());
    return stage2_loss_from_features(
        slice_samples(fwd.c, 0, b_id), slice_samples(fwd.logit, 0, b_id),
        slice_samples(fwd.c, b_id, b_all), slice_samples(fwd.logit, b_id, b_all), center.O,
        R, red, true, nullptr, nullptr, nullptr, nullptr);
}

Center compute_center(TendModel& model, const std::vector<ImageSample>& id_data,
                      int batch_size, int computed_at_epoch) {
    require_all_id(id_data, "compute_center");
    if (batch_size < 1) throw ParamError("compute_center: batch_size must be >= 1");

    model.set_backbone_training(false);
    model.set_head_training(false);

    Center center;
    center.computed_at_epoch = computed_at_epoch;
    center.O.assign(ArchitectureSpec::kCompressedDim, 0.0);
    for (size_t begin = 0; begin < id_data.size(); begin += batch_size) {
        const size_t end = std::min(begin + batch_size, id_data.size());
        std::vector<const Image*> images;
        for (size_t i = begin; i < end; ++i) images.push_back(&id_data[i].image);
        const Tensor c = model.compress(model.encode(images_to_tensor(images)));
        for (int i = 0; i < c.n; ++i) {
            const double* row = c.sample(i);
            for (size_t j = 0; j < center.O.size(); ++j) center.O[j] += row[j];
        }
    }
    for (auto& v : center.O) v /= static_cast<double>(id_data.size());
    return center;
}

std::vector<EpochLog> train_stage1(TendModel& model, const std::vector<ImageSample>& id_data,
                                   const TrainConfig& cfg) {
    cfg.validate();
    if (cfg.stage != 1) throw ConfigError("train_stage1: config stage must be 1");
    require_all_id(id_data, "train_stage1");

    model.set_backbone_training(true);
    Adam opt(model.backbone_params(), cfg.learning_rate);

    const size_t n = id_data.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<EpochLog> logs;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, static_cast<uint64_t>(epoch), 1));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const size_t end = std::min(begin + cfg.batch_size, n);
            const Tensor x = images_to_tensor(batch_pointers(id_data, order, begin, end));

            opt.zero_grad();
            const Tensor recon = model.reconstruct(x);
            const double inv = 1.0 / static_cast<double>(x.size());
            double loss = 0.0;
            Tensor grad = Tensor::zeros(x.n, x.c, x.h, x.w);
            for (size_t i = 0; i < x.data.size(); ++i) {
                const double d = recon.data[i] - x.data[i];
                loss += d * d * inv;
                grad.data[i] = 2.0 * d * inv;
            }
            if (!std::isfinite(loss))
                throw DataError("train_stage1: non-finite loss at epoch " +
                                std::to_string(epoch));
            model.encoder_backward(model.decoder_backward(grad));
            opt.step();
            epoch_loss += loss * static_cast<double>(end - begin);
        }
        logs.push_back({epoch, epoch_loss / static_cast<double>(n), 0.0, 0.0});
    }
    return logs;
}

Stage2Result train_stage2(TendModel& model, const std::vector<ImageSample>& id_data,
                          const TrainConfig& cfg, Stage backbone_stage,
                          const std::vector<ImageSample>* ood_train) {
    cfg.validate();
    if (cfg.stage != 2) throw ConfigError("train_stage2: config stage must be 2");
    if (backbone_stage != Stage::STAGE1)
        throw ConfigError("train_stage2: backbone checkpoint must carry the STAGE1 tag");
    require_all_id(id_data, "train_stage2");
    if (cfg.supervised_mode) {
        if (!ood_train || ood_train->empty())
            throw DataError("train_stage2: supervised mode needs real outlier samples");
        for (const auto& s : *ood_train)
            if (s.label != Label::OOD)
                throw DataError("train_stage2: outlier pool has a non-OOD sample " +
                                s.source_id);
    }

    model.set_backbone_training(false);
    model.set_head_training(true);
    Adam opt(model.head_params(), cfg.learning_rate);

    const size_t n = id_data.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    Stage2Result result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (epoch == cfg.warmup_epochs) {
            result.center = compute_center(model, id_data, cfg.batch_size, epoch);
            model.set_head_training(true);
        }
        // Supervised runs stay BCE-only: the ablation measures the bare
        // classifier, so no margin term even after the center exists.
        const bool with_margin = !cfg.supervised_mode && result.center.valid();

        Rng shuffle_rng(derive_seed(cfg.seed, static_cast<uint64_t>(epoch), 2));
        shuffle_rng.shuffle(order);
        Rng ood_rng(derive_seed(cfg.seed, static_cast<uint64_t>(epoch), 3));

        EpochLog log{epoch, 0.0, 0.0, 0.0};
        for (size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const size_t end = std::min(begin + cfg.batch_size, n);
            const int b = static_cast<int>(end - begin);

            std::vector<const Image*> images = batch_pointers(id_data, order, begin, end);
            std::vector<ImageSample> counterparts;
            counterparts.reserve(b);
            for (size_t i = begin; i < end; ++i) {
                const size_t idx = order[i];
                if (cfg.supervised_mode) {
                    const size_t pick = static_cast<size_t>(ood_rng.uniform_int(
                        0, static_cast<int64_t>(ood_train->size()) - 1));
                    counterparts.push_back((*ood_train)[pick]);
                } else {
                    counterparts.push_back(distort(
                        id_data[idx],
                        sample_train_spec(derive_seed(cfg.seed, static_cast<uint64_t>(epoch),
                                                      idx))));
                }
            }
            for (const auto& s : counterparts) images.push_back(&s.image);

            opt.zero_grad();
            const HeadForward fwd = head_forward(model, images);
            const int b_all = b * 2;
            Tensor g_c_id, g_logit_id, g_c_dist, g_logit_dist;
            const Stage2LossTerms terms = stage2_loss_from_features(
                slice_samples(fwd.c, 0, b), slice_samples(fwd.logit, 0, b),
                slice_samples(fwd.c, b, b_all), slice_samples(fwd.logit, b, b_all),
                result.center.O, cfg.margin_r, cfg.margin_reduction, with_margin, &g_c_id,
                &g_logit_id, &g_c_dist, &g_logit_dist);
            if (!std::isfinite(terms.total))
                throw DataError("train_stage2: non-finite loss at epoch " +
                                std::to_string(epoch));

            model.head_backward(concat_samples(g_logit_id, g_logit_dist),
                                concat_samples(g_c_id, g_c_dist));
            opt.step();

            const double wgt = static_cast<double>(b);
            log.total += terms.total * wgt;
            log.bce += terms.bce * wgt;
            log.margin += terms.margin * wgt;
        }
        log.total /= static_cast<double>(n);
        log.bce /= static_cast<double>(n);
        log.margin /= static_cast<double>(n);
        result.log.push_back(log);
    }
    return result;
}

void write_epoch_log_csv(const std::string& path, const std::vector<EpochLog>& log,
                         int stage) {
    std::ostringstream out;
    if (stage == 1) {
        out << "epoch,recon_loss\n";
        for (const auto& row : log)
            out << row.epoch << ',' << format_double(row.total) << '\n';
    } else {
        out << "epoch,total,bce,margin\n";
        for (const auto& row : log)
            out << row.epoch << ',' << format_double(row.total) << ','
                << format_double(row.bce) << ',' << format_double(row.margin) << '\n';
    }
    atomic_write_file(path, out.str());
}

}  // namespace tend
