#include "tend/model.hpp"

#include <string>

#include "tend/errors.hpp"
#include "tend/rng.hpp"

namespace tend {

void ArchitectureSpec::validate() const {
    if (channels != 1 && channels != 3)
        throw ConfigError("architecture: channels must be 1 or 3");
    if (input_side < 64 || (input_side & (input_side - 1)) != 0)
        throw ConfigError("architecture: input_side must be a power of two >= 64, got " +
                          std::to_string(input_side));
}

namespace {

void add_conv_block(Sequential& seq, int in_ch, int out_ch) {
    seq.add<Conv2d>(in_ch, out_ch, ArchitectureSpec::kKernel, ArchitectureSpec::kStride,
                    ArchitectureSpec::kPadding);
    seq.add<BatchNorm2d>(out_ch);
    seq.add<ReLU>();
}

void add_tconv_block(Sequential& seq, int in_ch, int out_ch) {
    seq.add<ConvTranspose2d>(in_ch, out_ch, ArchitectureSpec::kKernel,
                             ArchitectureSpec::kStride, ArchitectureSpec::kPadding);
    seq.add<BatchNorm2d>(out_ch);
    seq.add<ReLU>();
}

}  // namespace

TendModel::TendModel(const ArchitectureSpec& spec, uint64_t init_seed)
    : spec_(spec),
      init_seed_(init_seed),
      fc_logit_(ArchitectureSpec::kCompressedDim, 1) {
    spec_.validate();

    const int widths[] = {16, 32, 64, 128, 256};
    int in_ch = spec_.channels;
    for (const int w : widths) {
        add_conv_block(encoder_, in_ch, w);
        in_ch = w;
    }
    for (int i = 4; i >= 1; --i) add_tconv_block(decoder_, widths[i], widths[i - 1]);
    // Final deconv maps straight to pixel space through a sigmoid; no norm.
    decoder_.add<ConvTranspose2d>(widths[0], spec_.channels, ArchitectureSpec::kKernel,
                                  ArchitectureSpec::kStride, ArchitectureSpec::kPadding);
    decoder_.add<Sigmoid>();

    add_conv_block(head_trunk_, ArchitectureSpec::kLatentChannels,
                   ArchitectureSpec::kHeadConvOut);
    head_trunk_.add<Flatten>();
    head_trunk_.add<Linear>(spec_.fc_in(), ArchitectureSpec::kCompressedDim);

    Rng rng(init_seed_);
    encoder_.init_params(rng);
    decoder_.init_params(rng);
    head_trunk_.init_params(rng);
    fc_logit_.init_params(rng);
}

Tensor TendModel::encode(const Tensor& images) {
    if (images.c != spec_.channels || images.h != spec_.input_side ||
        images.w != spec_.input_side)
        throw ConfigError("encode: input shape does not match the architecture");
    return encoder_.forward(images);
}

Tensor TendModel::decode(const Tensor& latent) {
    if (latent.c != ArchitectureSpec::kLatentChannels || latent.h != spec_.latent_side() ||
        latent.w != spec_.latent_side())
        throw ConfigError("decode: latent shape does not match the architecture");
    return decoder_.forward(latent);
}

Tensor TendModel::reconstruct(const Tensor& images) { return decode(encode(images)); }

Tensor TendModel::compress(const Tensor& latent) {
    if (latent.c != ArchitectureSpec::kLatentChannels || latent.h != spec_.latent_side() ||
        latent.w != spec_.latent_side())
        throw ConfigError("compress: latent shape does not match the architecture");
    return head_trunk_.forward(latent);
}

Tensor TendModel::classify_logit(const Tensor& c) {
    if (c.chw() != ArchitectureSpec::kCompressedDim)
        throw ConfigError("classify: compressed feature length mismatch");
    return fc_logit_.forward(c);
}

Tensor TendModel::decoder_backward(const Tensor& grad_recon) {
    return decoder_.backward(grad_recon);
}

Tensor TendModel::encoder_backward(const Tensor& grad_latent) {
    return encoder_.backward(grad_latent);
}

Tensor TendModel::head_backward(const Tensor& grad_logit, const Tensor& grad_c) {
    Tensor g = fc_logit_.backward(grad_logit);
    if (!grad_c.empty()) {
        if (!g.same_shape(grad_c)) throw ConfigError("head_backward: grad_c shape mismatch");
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += grad_c.data[i];
    }
    return head_trunk_.backward(g);
}

std::vector<ParamRef> TendModel::backbone_params() {
    std::vector<ParamRef> out;
    encoder_.collect_params("encoder", out);
    decoder_.collect_params("decoder", out);
    return out;
}

std::vector<ParamRef> TendModel::head_params() {
    std::vector<ParamRef> out;
    head_trunk_.collect_params("head", out);
    fc_logit_.collect_params("classifier", out);
    return out;
}

std::vector<ParamRef> TendModel::all_params() {
    auto out = backbone_params();
    auto head = head_params();
    out.insert(out.end(), head.begin(), head.end());
    return out;
}

std::vector<ParamRef> TendModel::all_buffers() {
    std::vector<ParamRef> out;
    encoder_.collect_buffers("encoder", out);
    decoder_.collect_buffers("decoder", out);
    head_trunk_.collect_buffers("head", out);
    return out;
}

void TendModel::set_backbone_training(bool on) {
    encoder_.set_training(on);
    decoder_.set_training(on);
}

void TendModel::set_head_training(bool on) {
    head_trunk_.set_training(on);
    fc_logit_.set_training(on);
}

uint64_t TendModel::backbone_hash() const {
    auto& self = const_cast<TendModel&>(*this);
    uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<ParamRef> refs = self.backbone_params();
    std::vector<ParamRef> bufs;
    self.encoder_.collect_buffers("encoder", bufs);
    self.decoder_.collect_buffers("decoder", bufs);
    refs.insert(refs.end(), bufs.begin(), bufs.end());
    for (const auto& r : refs) {
        h = fnv1a(r.name, h);
        h = fnv1a(r.value->data(), r.value->size() * sizeof(double), h);
    }
    return h;
}

}  // namespace tend
