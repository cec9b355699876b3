#include "dfr/layers.hpp"

#include <cmath>

namespace dfr {

Affine1x1 Affine1x1::init(int out, int in, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    Affine1x1 layer;
    layer.weight = Tensor::uniform({out, in}, rng, -s, s, true);
    layer.bias = Tensor::zeros({out}, true);
    return layer;
}

Tensor Affine1x1::apply_map(const Tensor& x) const {
    const Shape& s = x.shape();
    if (s.size() != 3 || s[0] != in_channels()) {
        throw DimensionError("1x1 transform expects [" + std::to_string(in_channels()) +
                             ",H,W], got " + shape_str(s));
    }
    Tensor cols = reshape(x, {s[0], s[1] * s[2]});
    Tensor y = add_row_bias(matmul(weight, cols), bias);
    return reshape(y, {out_channels(), s[1], s[2]});
}

Tensor Affine1x1::apply_vec(const Tensor& x) const {
    if (x.rank() != 1 || x.shape()[0] != in_channels()) {
        throw DimensionError("affine expects [" + std::to_string(in_channels()) + "], got " +
                             shape_str(x.shape()));
    }
    Tensor col = reshape(x, {in_channels(), 1});
    Tensor y = add(matmul(weight, col), reshape(bias, {out_channels(), 1}));
    return reshape(y, {out_channels()});
}

void Affine1x1::collect(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight);
    params.add(prefix + ".bias", bias);
}

ConvLayer ConvLayer::init(int out, int in, int k, Padding padding, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in) * k * k);
    ConvLayer layer;
    layer.kernel = Tensor::uniform({out, in, k, k}, rng, -s, s, true);
    layer.bias = Tensor::zeros({out}, true);
    layer.padding = padding;
    return layer;
}

void ConvLayer::collect(ParameterSet& params, const std::string& prefix) const {
    params.add(prefix + ".kernel", kernel);
    params.add(prefix + ".bias", bias);
}

}  // namespace dfr
