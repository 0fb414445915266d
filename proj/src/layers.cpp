#include "tend/layers.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "tend/errors.hpp"

namespace tend {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void Layer::collect_params(const std::string&, std::vector<ParamRef>&) {}
void Layer::collect_buffers(const std::string&, std::vector<ParamRef>&) {}
void Layer::init_params(Rng&) {}

namespace {

int conv_out_side(int in, int k, int stride, int pad) {
    const int span = in + 2 * pad - k;
    if (span < 0 || span % stride != 0)
        throw ConfigError("conv: input side " + std::to_string(in) +
                          " incompatible with kernel geometry");
    return span / stride + 1;
}

// cols is (c*k*k) x (ho*wo), row-major, indexed [(c*k+ky)*k+kx][oy*wo+ox].
void im2col(const double* x, int c, int h, int w, int k, int stride, int pad, int ho,
            int wo, double* cols) {
    for (int ic = 0; ic < c; ++ic)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols + (static_cast<size_t>(ic) * k * k + ky * k + kx) *
                                         (static_cast<size_t>(ho) * wo);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                                ? x[(static_cast<size_t>(ic) * h + iy) * w + ix]
                                                : 0.0;
                    }
                }
            }
}

// Adjoint of im2col: scatter-adds columns back into the image.
void col2im_add(const double* cols, int c, int h, int w, int k, int stride, int pad,
                int ho, int wo, double* x) {
    for (int ic = 0; ic < c; ++ic)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols + (static_cast<size_t>(ic) * k * k + ky * k + kx) *
                                               (static_cast<size_t>(ho) * wo);
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= w) continue;
                        x[(static_cast<size_t>(ic) * h + iy) * w + ix] += row[oy * wo + ox];
                    }
                }
            }
}

double uniform_sym(Rng& rng, double bound) { return rng.uniform(-bound, bound); }

}  // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw ConfigError("conv2d: bad geometry");
    w_.assign(static_cast<size_t>(out_ch_) * in_ch_ * k_ * k_, 0.0);
    b_.assign(out_ch_, 0.0);
    gw_.assign(w_.size(), 0.0);
    gb_.assign(b_.size(), 0.0);
}

void Conv2d::init_params(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch_) * k_ * k_);
    for (auto& v : w_) v = uniform_sym(rng, bound);
    for (auto& v : b_) v = 0.0;
}

void Conv2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_});
    out.push_back({prefix + ".bias", &b_, &gb_});
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c != in_ch_) throw ConfigError("conv2d: channel mismatch");
    const int ho = conv_out_side(x.h, k_, stride_, pad_);
    const int wo = conv_out_side(x.w, k_, stride_, pad_);
    input_ = x;

    Tensor out = Tensor::zeros(x.n, out_ch_, ho, wo);
    const int ckk = in_ch_ * k_ * k_;
    std::vector<double> cols(static_cast<size_t>(ckk) * ho * wo);
    ConstMapMat wmat(w_.data(), out_ch_, ckk);
    for (int i = 0; i < x.n; ++i) {
        im2col(x.sample(i), in_ch_, x.h, x.w, k_, stride_, pad_, ho, wo, cols.data());
        ConstMapMat cmat(cols.data(), ckk, ho * wo);
        MapMat omat(out.sample(i), out_ch_, ho * wo);
        omat.noalias() = wmat * cmat;
        for (int oc = 0; oc < out_ch_; ++oc) omat.row(oc).array() += b_[oc];
    }
    return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const Tensor& x = input_;
    if (x.empty()) throw ConfigError("conv2d: backward before forward");
    const int ho = grad_out.h, wo = grad_out.w;
    const int ckk = in_ch_ * k_ * k_;

    Tensor gin = Tensor::zeros(x.n, x.c, x.h, x.w);
    std::vector<double> cols(static_cast<size_t>(ckk) * ho * wo);
    std::vector<double> gcols(cols.size());
    ConstMapMat wmat(w_.data(), out_ch_, ckk);
    MapMat gwmat(gw_.data(), out_ch_, ckk);
    for (int i = 0; i < x.n; ++i) {
        im2col(x.sample(i), in_ch_, x.h, x.w, k_, stride_, pad_, ho, wo, cols.data());
        ConstMapMat cmat(cols.data(), ckk, ho * wo);
        ConstMapMat gomat(grad_out.sample(i), out_ch_, ho * wo);
        gwmat.noalias() += gomat * cmat.transpose();
        for (int oc = 0; oc < out_ch_; ++oc) gb_[oc] += gomat.row(oc).sum();
        MapMat gcmat(gcols.data(), ckk, ho * wo);
        gcmat.noalias() = wmat.transpose() * gomat;
        col2im_add(gcols.data(), in_ch_, x.h, x.w, k_, stride_, pad_, ho, wo, gin.sample(i));
    }
    return gin;
}

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw ConfigError("tconv2d: bad geometry");
    w_.assign(static_cast<size_t>(in_ch_) * out_ch_ * k_ * k_, 0.0);
    b_.assign(out_ch_, 0.0);
    gw_.assign(w_.size(), 0.0);
    gb_.assign(b_.size(), 0.0);
}

void ConvTranspose2d::init_params(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch_) * k_ * k_);
    for (auto& v : w_) v = uniform_sym(rng, bound);
    for (auto& v : b_) v = 0.0;
}

void ConvTranspose2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_});
    out.push_back({prefix + ".bias", &b_, &gb_});
}

// Forward of the transposed convolution is the data-backward of the matching
// convolution: spread W^T * input columns back onto the (larger) output grid.
Tensor ConvTranspose2d::forward(const Tensor& x) {
    if (x.c != in_ch_) throw ConfigError("tconv2d: channel mismatch");
    const int ho = (x.h - 1) * stride_ - 2 * pad_ + k_;
    const int wo = (x.w - 1) * stride_ - 2 * pad_ + k_;
    if (ho < 1 || wo < 1) throw ConfigError("tconv2d: degenerate output size");
    input_ = x;

    Tensor out = Tensor::zeros(x.n, out_ch_, ho, wo);
    const int ockk = out_ch_ * k_ * k_;
    std::vector<double> cols(static_cast<size_t>(ockk) * x.h * x.w);
    ConstMapMat wmat(w_.data(), in_ch_, ockk);
    for (int i = 0; i < x.n; ++i) {
        ConstMapMat imat(x.sample(i), in_ch_, x.h * x.w);
        MapMat cmat(cols.data(), ockk, x.h * x.w);
        cmat.noalias() = wmat.transpose() * imat;
        col2im_add(cols.data(), out_ch_, ho, wo, k_, stride_, pad_, x.h, x.w, out.sample(i));
        MapMat omat(out.sample(i), out_ch_, ho * wo);
        for (int oc = 0; oc < out_ch_; ++oc) omat.row(oc).array() += b_[oc];
    }
    return out;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out) {
    const Tensor& x = input_;
    if (x.empty()) throw ConfigError("tconv2d: backward before forward");
    const int ockk = out_ch_ * k_ * k_;

    Tensor gin = Tensor::zeros(x.n, x.c, x.h, x.w);
    std::vector<double> gcols(static_cast<size_t>(ockk) * x.h * x.w);
    ConstMapMat wmat(w_.data(), in_ch_, ockk);
    MapMat gwmat(gw_.data(), in_ch_, ockk);
    for (int i = 0; i < x.n; ++i) {
        im2col(grad_out.sample(i), out_ch_, grad_out.h, grad_out.w, k_, stride_, pad_, x.h,
               x.w, gcols.data());
        ConstMapMat gcmat(gcols.data(), ockk, x.h * x.w);
        ConstMapMat imat(x.sample(i), in_ch_, x.h * x.w);
        MapMat gimat(gin.sample(i), in_ch_, x.h * x.w);
        gimat.noalias() = wmat * gcmat;
        gwmat.noalias() += imat * gcmat.transpose();
        ConstMapMat gomat(grad_out.sample(i), out_ch_, grad_out.h * grad_out.w);
        for (int oc = 0; oc < out_ch_; ++oc) gb_[oc] += gomat.row(oc).sum();
    }
    return gin;
}

BatchNorm2d::BatchNorm2d(int channels, double eps, double momentum)
    : ch_(channels), eps_(eps), momentum_(momentum) {
    gamma_.assign(ch_, 1.0);
    beta_.assign(ch_, 0.0);
    ggamma_.assign(ch_, 0.0);
    gbeta_.assign(ch_, 0.0);
    running_mean_.assign(ch_, 0.0);
    running_var_.assign(ch_, 1.0);
    inv_std_.assign(ch_, 1.0);
}

void BatchNorm2d::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &gamma_, &ggamma_});
    out.push_back({prefix + ".bias", &beta_, &gbeta_});
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
    out.push_back({prefix + ".running_var", &running_var_, nullptr});
}

Tensor BatchNorm2d::forward(const Tensor& x) {
    if (x.c != ch_) throw ConfigError("batchnorm: channel mismatch");
    const int plane = x.h * x.w;
    const long m = static_cast<long>(x.n) * plane;

    Tensor out = Tensor::zeros(x.n, x.c, x.h, x.w);
    xhat_ = Tensor::zeros(x.n, x.c, x.h, x.w);
    for (int c = 0; c < ch_; ++c) {
        double mean, var;
        if (training_) {
            double s = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const double* p = x.sample(i) + static_cast<size_t>(c) * plane;
                for (int j = 0; j < plane; ++j) s += p[j];
            }
            mean = s / static_cast<double>(m);
            double sq = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const double* p = x.sample(i) + static_cast<size_t>(c) * plane;
                for (int j = 0; j < plane; ++j) sq += (p[j] - mean) * (p[j] - mean);
            }
            var = sq / static_cast<double>(m);
            const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
            running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
            running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
        } else {
            mean = running_mean_[c];
            var = running_var_[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = inv;
        for (int i = 0; i < x.n; ++i) {
            const double* p = x.sample(i) + static_cast<size_t>(c) * plane;
            double* xh = xhat_.sample(i) + static_cast<size_t>(c) * plane;
            double* o = out.sample(i) + static_cast<size_t>(c) * plane;
            for (int j = 0; j < plane; ++j) {
                xh[j] = (p[j] - mean) * inv;
                o[j] = gamma_[c] * xh[j] + beta_[c];
            }
        }
    }
    was_training_forward_ = training_;
    return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    if (xhat_.empty()) throw ConfigError("batchnorm: backward before forward");
    const int plane = grad_out.h * grad_out.w;
    const double m = static_cast<double>(grad_out.n) * plane;

    Tensor gin = Tensor::zeros(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
    for (int c = 0; c < ch_; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < grad_out.n; ++i) {
            const double* gy = grad_out.sample(i) + static_cast<size_t>(c) * plane;
            const double* xh = xhat_.sample(i) + static_cast<size_t>(c) * plane;
            for (int j = 0; j < plane; ++j) {
                sum_dy += gy[j];
                sum_dy_xhat += gy[j] * xh[j];
            }
        }
        ggamma_[c] += sum_dy_xhat;
        gbeta_[c] += sum_dy;
        const double scale = gamma_[c] * inv_std_[c];
        for (int i = 0; i < grad_out.n; ++i) {
            const double* gy = grad_out.sample(i) + static_cast<size_t>(c) * plane;
            const double* xh = xhat_.sample(i) + static_cast<size_t>(c) * plane;
            double* gx = gin.sample(i) + static_cast<size_t>(c) * plane;
            if (was_training_forward_) {
                for (int j = 0; j < plane; ++j)
                    gx[j] = scale * (gy[j] - sum_dy / m - xh[j] * sum_dy_xhat / m);
            } else {
                for (int j = 0; j < plane; ++j) gx[j] = scale * gy[j];
            }
        }
    }
    return gin;
}

Tensor ReLU::forward(const Tensor& x) {
    input_ = x;
    Tensor out = x;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    if (input_.empty()) throw ConfigError("relu: backward before forward");
    Tensor gin = grad_out;
    for (size_t i = 0; i < gin.data.size(); ++i)
        if (input_.data[i] <= 0.0) gin.data[i] = 0.0;
    return gin;
}

Tensor Sigmoid::forward(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    output_ = out;
    return out;
}

Tensor Sigmoid::backward(const Tensor& grad_out) {
    if (output_.empty()) throw ConfigError("sigmoid: backward before forward");
    Tensor gin = grad_out;
    for (size_t i = 0; i < gin.data.size(); ++i) {
        const double y = output_.data[i];
        gin.data[i] *= y * (1.0 - y);
    }
    return gin;
}

Tensor Flatten::forward(const Tensor& x) {
    c_ = x.c; h_ = x.h; w_ = x.w;
    return x.reshaped(x.n, x.chw(), 1, 1);
}

Tensor Flatten::backward(const Tensor& grad_out) {
    return grad_out.reshaped(grad_out.n, c_, h_, w_);
}

Linear::Linear(int in_dim, int out_dim) : in_(in_dim), out_(out_dim) {
    if (in_dim < 1 || out_dim < 1) throw ConfigError("linear: bad dimensions");
    w_.assign(static_cast<size_t>(out_) * in_, 0.0);
    b_.assign(out_, 0.0);
    gw_.assign(w_.size(), 0.0);
    gb_.assign(b_.size(), 0.0);
}

void Linear::init_params(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    for (auto& v : w_) v = uniform_sym(rng, bound);
    for (auto& v : b_) v = 0.0;
}

void Linear::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_});
    out.push_back({prefix + ".bias", &b_, &gb_});
}

Tensor Linear::forward(const Tensor& x) {
    if (x.chw() != in_) throw ConfigError("linear: input dimension mismatch");
    input_ = x;
    Tensor out = Tensor::zeros(x.n, out_, 1, 1);
    ConstMapMat wmat(w_.data(), out_, in_);
    for (int i = 0; i < x.n; ++i) {
        Eigen::Map<const Eigen::VectorXd> xi(x.sample(i), in_);
        Eigen::Map<Eigen::VectorXd> yi(out.sample(i), out_);
        yi.noalias() = wmat * xi;
        for (int o = 0; o < out_; ++o) yi(o) += b_[o];
    }
    return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
    const Tensor& x = input_;
    if (x.empty()) throw ConfigError("linear: backward before forward");
    Tensor gin = Tensor::zeros(x.n, x.c, x.h, x.w);
    ConstMapMat wmat(w_.data(), out_, in_);
    MapMat gwmat(gw_.data(), out_, in_);
    for (int i = 0; i < x.n; ++i) {
        Eigen::Map<const Eigen::VectorXd> gy(grad_out.sample(i), out_);
        Eigen::Map<const Eigen::VectorXd> xi(x.sample(i), in_);
        Eigen::Map<Eigen::VectorXd> gx(gin.sample(i), in_);
        gwmat.noalias() += gy * xi.transpose();
        for (int o = 0; o < out_; ++o) gb_[o] += gy(o);
        gx.noalias() = wmat.transpose() * gy;
    }
    return gin;
}

Tensor Sequential::forward(const Tensor& x) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur);
    return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

void Sequential::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_params(prefix + "." + std::to_string(i), out);
}

void Sequential::collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) {
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_buffers(prefix + "." + std::to_string(i), out);
}

void Sequential::init_params(Rng& rng) {
    for (auto& layer : layers_) layer->init_params(rng);
}

void Sequential::set_training(bool on) {
    training_ = on;
    for (auto& layer : layers_) layer->set_training(on);
}

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        if (!p.grad) throw ConfigError("adam: parameter without gradient: " + p.name);
        m_.emplace_back(p.value->size(), 0.0);
        v_.emplace_back(p.value->size(), 0.0);
    }
}

void Adam::zero_grad() { zero_grads(params_); }

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& value = *params_[i].value;
        auto& grad = *params_[i].grad;
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < value.size(); ++j) {
            m[j] = b1_ * m[j] + (1.0 - b1_) * grad[j];
            v[j] = b2_ * v[j] + (1.0 - b2_) * grad[j] * grad[j];
            value[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
    }
}

void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& p : params)
        if (p.grad) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

}  // namespace tend
