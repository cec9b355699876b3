#pragma once

#include <string>
#include <utility>

#include "dfr/layers.hpp"
#include "dfr/tensor.hpp"

namespace dfr {

/// Which mutual-reflect directions are active. `none` leaves each stream with
/// its self-reflect map only; the other settings enable one or both cross
/// directions.
enum class FlowMode { both, app_to_loc, loc_to_app, none };

FlowMode flow_from_string(const std::string& s);
std::string to_string(FlowMode flow);

/// Parameters of one feature-reflecting block. Two separation transforms
/// split the shared feature into an appearance stream (v) and a localization
/// stream (s); per stream, two projections feed the attention products, a
/// value transform feeds the warp, a mixing scalar blends self- against
/// mutual-reflect maps, and a residual scalar gates the warped feature back
/// onto the shared input.
struct AlfrParams {
    int channels = 0;
    int reduction = 0;

    Affine1x1 sep_v, sep_s;                          // C -> C
    Affine1x1 proj_v1, proj_v2, proj_s1, proj_s2;    // C -> C/r
    Affine1x1 value_v, value_s;                      // C -> C
    Tensor mix_v_raw, mix_s_raw;  // sigmoid gives the blend weight in (0,1)
    Tensor res_v, res_s;          // residual scalars, zero at init

    static AlfrParams init(int channels, int reduction, Rng& rng);
    void collect(ParameterSet& params, const std::string& prefix) const;
};

/// Row-stochastic position-to-position attention, [N,N] with N = H*W.
/// Row i holds the weights with which output position i attends.
struct AttentionMap {
    Tensor weights;
};

struct StreamOutputs {
    Tensor f_star_v;  // appearance-specific feature, same shape as the input
    Tensor f_star_s;  // localization-specific feature
    AttentionMap w_v;  // combined appearance attention (inspection)
    AttentionMap w_s;  // combined localization attention
};

/// Shared feature -> (appearance stream, localization stream), each passed
/// through its separation transform and relu.
std::pair<Tensor, Tensor> separate(const Tensor& f_shared, const AlfrParams& params);

/// Attention within one stream: row-softmax of f1^T * f2 for [C/r,N] inputs.
AttentionMap self_reflect(const Tensor& f1, const Tensor& f2);

/// Attention across streams: row-softmax of f_other1^T * f_self2. For the
/// appearance stream the first operand comes from the localization stream
/// and vice versa.
AttentionMap mutual_reflect(const Tensor& f_other1, const Tensor& f_self2);

/// Convex blend w = lambda * w_self + (1 - lambda) * w_mutual with
/// lambda = sigmoid(mix_raw); rows stay stochastic.
AttentionMap combine(const AttentionMap& w_self, const AttentionMap& w_mutual,
                     const Tensor& mix_raw);

/// value(f_shared) warped by the attention map and gated back:
/// f_shared + res * reshape(value(f_shared) * w^T).
Tensor warp_and_residual(const Tensor& f_shared, const AttentionMap& w, const Affine1x1& value,
                         const Tensor& res);

/// Full block over both streams.
StreamOutputs alfr_forward(const Tensor& f_shared, const AlfrParams& params, FlowMode flow);

}  // namespace dfr
