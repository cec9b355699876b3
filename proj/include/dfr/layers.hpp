#pragma once

#include "dfr/optim.hpp"
#include "dfr/tensor.hpp"

namespace dfr {

/// 1x1 channel transform: weight [out,in] plus per-channel bias [out].
/// Weights start uniform in [-s, s] with s = 1/sqrt(fan_in), biases at zero.
struct Affine1x1 {
    Tensor weight;
    Tensor bias;

    static Affine1x1 init(int out, int in, Rng& rng);

    int out_channels() const { return weight.shape()[0]; }
    int in_channels() const { return weight.shape()[1]; }

    /// Apply to a [C,H,W] map; every pixel's channel vector goes through the
    /// same affine transform.
    Tensor apply_map(const Tensor& x) const;
    /// Apply to a [C] vector, producing [out].
    Tensor apply_vec(const Tensor& x) const;

    void collect(ParameterSet& params, const std::string& prefix) const;
};

/// k x k convolution layer, stride 1.
struct ConvLayer {
    Tensor kernel;  // [out,in,k,k]
    Tensor bias;    // [out]
    Padding padding = Padding::same;

    static ConvLayer init(int out, int in, int k, Padding padding, Rng& rng);

    Tensor apply(const Tensor& x) const { return conv2d(x, kernel, bias, padding); }

    void collect(ParameterSet& params, const std::string& prefix) const;
};

}  // namespace dfr
