#pragma once

// The two-stage detector: a five-block strided conv autoencoder plus a
// discriminator head (conv block, then FC to the compressed feature c, then a
// single logit). Every conv stage halves the side; the head conv halves once
// more, so input_side must be a power of two and at least 64.

#include <cstdint>
#include <vector>

#include "tend/layers.hpp"
#include "tend/tensor.hpp"

namespace tend {

struct ArchitectureSpec {
    int input_side = 128;
    int channels = 3;

    static constexpr int kKernel = 4;
    static constexpr int kStride = 2;
    static constexpr int kPadding = 1;
    static constexpr int kLatentChannels = 256;
    static constexpr int kHeadConvOut = 512;
    static constexpr int kCompressedDim = 512;

    void validate() const;
    int latent_side() const { return input_side / 32; }
    int head_side() const { return input_side / 64; }
    int fc_in() const { return kHeadConvOut * head_side() * head_side(); }
    bool operator==(const ArchitectureSpec& o) const {
        return input_side == o.input_side && channels == o.channels;
    }
};

class TendModel {
  public:
    TendModel(const ArchitectureSpec& spec, uint64_t init_seed);

    const ArchitectureSpec& spec() const { return spec_; }
    uint64_t init_seed() const { return init_seed_; }

    // Forward passes. Training-mode layers cache activations for backward.
    Tensor encode(const Tensor& images);
    Tensor decode(const Tensor& latent);
    Tensor reconstruct(const Tensor& images);
    Tensor compress(const Tensor& latent);       // head conv -> flatten -> FC, yields c
    Tensor classify_logit(const Tensor& c);      // final FC, one logit per sample

    // Backward passes, mirroring the forwards above.
    Tensor decoder_backward(const Tensor& grad_recon);   // grad wrt latent
    Tensor encoder_backward(const Tensor& grad_latent);  // grad wrt input
    // Joint head backward: BCE gradient enters at the logit, margin gradient
    // at the compressed feature; returns grad wrt the latent (discarded when
    // the backbone is frozen).
    Tensor head_backward(const Tensor& grad_logit, const Tensor& grad_c);

    std::vector<ParamRef> backbone_params();
    std::vector<ParamRef> head_params();
    std::vector<ParamRef> all_params();
    std::vector<ParamRef> all_buffers();

    void set_backbone_training(bool on);
    void set_head_training(bool on);

    // Hash over encoder + decoder parameters and running statistics; the
    // stage-2 freeze contract asserts this never changes.
    uint64_t backbone_hash() const;

  private:
    ArchitectureSpec spec_;
    uint64_t init_seed_;
    Sequential encoder_, decoder_;
    Sequential head_trunk_;  // conv + bn + relu + flatten + FC -> c
    Linear fc_logit_;
};

}  // namespace tend
