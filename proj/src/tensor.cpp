#include "tend/tensor.hpp"

#include "tend/errors.hpp"

namespace tend {

Tensor images_to_tensor(const std::vector<const Image*>& batch) {
    if (batch.empty()) throw ParamError("images_to_tensor: empty batch");
    const Image& first = *batch[0];
    Tensor t = Tensor::zeros(static_cast<int>(batch.size()), first.channels, first.height,
                             first.width);
    for (size_t i = 0; i < batch.size(); ++i) {
        const Image& img = *batch[i];
        if (!img.same_shape(first)) throw ParamError("images_to_tensor: mixed shapes");
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    t.at(static_cast<int>(i), c, y, x) = img.at(y, x, c);
    }
    return t;
}

Tensor image_to_tensor(const Image& img) { return images_to_tensor({&img}); }

Image tensor_to_image(const Tensor& t, int index) {
    if (index < 0 || index >= t.n) throw ParamError("tensor_to_image: index out of range");
    Image img = Image::zeros(t.h, t.w, t.c);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int c = 0; c < t.c; ++c)
                img.at(y, x, c) = static_cast<float>(t.at(index, c, y, x));
    return img;
}

}  // namespace tend
