#pragma once

// Hand-rolled network layers with explicit backward passes. Every layer
// caches what its backward needs during forward; backward must follow the
// matching forward. Convolutions run one sample at a time through im2col and
// a GEMM, which keeps results bit-identical regardless of batch splitting.

#include <memory>
#include <string>
#include <vector>

#include "tend/rng.hpp"
#include "tend/tensor.hpp"

namespace tend {

// Named view into a parameter (grad != nullptr) or a running buffer.
struct ParamRef {
    std::string name;
    std::vector<double>* value = nullptr;
    std::vector<double>* grad = nullptr;
};

class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
    virtual void collect_buffers(const std::string& prefix, std::vector<ParamRef>& out);
    virtual void init_params(Rng& rng);
    virtual void set_training(bool on) { training_ = on; }
    bool training() const { return training_; }

  protected:
    bool training_ = true;
};

class Conv2d : public Layer {
  public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void init_params(Rng& rng) override;

  private:
    int in_ch_, out_ch_, k_, stride_, pad_;
    std::vector<double> w_, b_, gw_, gb_;  // w: out_ch rows of in_ch*k*k
    Tensor input_;
};

class ConvTranspose2d : public Layer {
  public:
    ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void init_params(Rng& rng) override;

  private:
    int in_ch_, out_ch_, k_, stride_, pad_;
    std::vector<double> w_, b_, gw_, gb_;  // w: in_ch rows of out_ch*k*k
    Tensor input_;
};

class BatchNorm2d : public Layer {
  public:
    explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) override;

  private:
    int ch_;
    double eps_, momentum_;
    std::vector<double> gamma_, beta_, ggamma_, gbeta_;
    std::vector<double> running_mean_, running_var_;
    // cached per-channel statistics and normalized activations
    std::vector<double> inv_std_;
    Tensor xhat_;
    bool was_training_forward_ = true;
};

class ReLU : public Layer {
  public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    Tensor input_;
};

class Sigmoid : public Layer {
  public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    Tensor output_;
};

// Collapses (c,h,w) into the channel axis; pure reshape.
class Flatten : public Layer {
  public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;

  private:
    int c_ = 0, h_ = 0, w_ = 0;
};

class Linear : public Layer {
  public:
    Linear(int in_dim, int out_dim);
    Tensor forward(const Tensor& x) override;  // expects chw() == in_dim
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void init_params(Rng& rng) override;

  private:
    int in_, out_;
    std::vector<double> w_, b_, gw_, gb_;  // w: out rows of in
    Tensor input_;
};

class Sequential : public Layer {
  public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    template <typename L, typename... Args>
    L* add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) override;
    void init_params(Rng& rng) override;
    void set_training(bool on) override;
    size_t size() const { return layers_.size(); }

  private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Adam with bias correction over a fixed parameter set.
class Adam {
  public:
    explicit Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);
    void zero_grad();
    void step();

  private:
    std::vector<ParamRef> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
};

void zero_grads(const std::vector<ParamRef>& params);

}  // namespace tend
