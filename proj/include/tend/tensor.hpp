#pragma once

// Dense NCHW activation tensor. Double precision throughout the network so
// finite-difference gradient checks resolve well below the 1e-3 contract.

#include <cstddef>
#include <vector>

#include "tend/image.hpp"

namespace tend {

struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    static Tensor zeros(int n, int c, int h, int w) {
        Tensor t;
        t.n = n; t.c = c; t.h = h; t.w = w;
        t.data.assign(static_cast<size_t>(n) * c * h * w, 0.0);
        return t;
    }

    double& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    // Contiguous block of one sample.
    double* sample(int in) { return data.data() + static_cast<size_t>(in) * chw(); }
    const double* sample(int in) const { return data.data() + static_cast<size_t>(in) * chw(); }

    size_t size() const { return data.size(); }
    int chw() const { return c * h * w; }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    Tensor reshaped(int nn, int nc, int nh, int nw) const {
        Tensor t = *this;
        t.n = nn; t.c = nc; t.h = nh; t.w = nw;
        return t;
    }
};

// HWC float images to an NCHW batch and back. Values pass through unscaled.
Tensor images_to_tensor(const std::vector<const Image*>& batch);
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t, int index);

}  // namespace tend
