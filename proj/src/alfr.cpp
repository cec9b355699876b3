#include "dfr/alfr.hpp"

namespace dfr {

FlowMode flow_from_string(const std::string& s) {
    if (s == "both") return FlowMode::both;
    if (s == "app_to_loc") return FlowMode::app_to_loc;
    if (s == "loc_to_app") return FlowMode::loc_to_app;
    if (s == "none") return FlowMode::none;
    throw ConfigError("unknown flow mode '" + s + "'");
}

std::string to_string(FlowMode flow) {
    switch (flow) {
        case FlowMode::both: return "both";
        case FlowMode::app_to_loc: return "app_to_loc";
        case FlowMode::loc_to_app: return "loc_to_app";
        case FlowMode::none: return "none";
    }
    throw ConfigError("invalid flow mode");
}

AlfrParams AlfrParams::init(int channels, int reduction, Rng& rng) {
    if (reduction <= 0 || channels % reduction != 0) {
        throw ConfigError("reduction " + std::to_string(reduction) + " must divide channels " +
                          std::to_string(channels));
    }
    AlfrParams p;
    p.channels = channels;
    p.reduction = reduction;
    const int reduced = channels / reduction;
    p.sep_v = Affine1x1::init(channels, channels, rng);
    p.sep_s = Affine1x1::init(channels, channels, rng);
    p.proj_v1 = Affine1x1::init(reduced, channels, rng);
    p.proj_v2 = Affine1x1::init(reduced, channels, rng);
    p.proj_s1 = Affine1x1::init(reduced, channels, rng);
    p.proj_s2 = Affine1x1::init(reduced, channels, rng);
    p.value_v = Affine1x1::init(channels, channels, rng);
    p.value_s = Affine1x1::init(channels, channels, rng);
    p.mix_v_raw = Tensor::scalar(0.0, true);  // blend starts at 0.5
    p.mix_s_raw = Tensor::scalar(0.0, true);
    p.res_v = Tensor::scalar(0.0, true);  // block is the identity at step 0
    p.res_s = Tensor::scalar(0.0, true);
    return p;
}

void AlfrParams::collect(ParameterSet& params, const std::string& prefix) const {
    sep_v.collect(params, prefix + ".sep_v");
    sep_s.collect(params, prefix + ".sep_s");
    proj_v1.collect(params, prefix + ".proj_v1");
    proj_v2.collect(params, prefix + ".proj_v2");
    proj_s1.collect(params, prefix + ".proj_s1");
    proj_s2.collect(params, prefix + ".proj_s2");
    value_v.collect(params, prefix + ".value_v");
    value_s.collect(params, prefix + ".value_s");
    params.add(prefix + ".mix_v_raw", mix_v_raw);
    params.add(prefix + ".mix_s_raw", mix_s_raw);
    params.add(prefix + ".res_v", res_v);
    params.add(prefix + ".res_s", res_s);
}

std::pair<Tensor, Tensor> separate(const Tensor& f_shared, const AlfrParams& params) {
    return {relu(params.sep_v.apply_map(f_shared)), relu(params.sep_s.apply_map(f_shared))};
}

AttentionMap self_reflect(const Tensor& f1, const Tensor& f2) {
    if (f1.rank() != 2 || f2.rank() != 2) {
        throw DimensionError("self_reflect expects [C/r,N] operands");
    }
    if (f1.shape()[1] == 0) throw ContractError("self_reflect: empty position axis");
    Tensor affinity = matmul(transpose2d(f1), f2);  // [N,N]
    return {softmax(affinity, 1)};
}

AttentionMap mutual_reflect(const Tensor& f_other1, const Tensor& f_self2) {
    return self_reflect(f_other1, f_self2);
}

AttentionMap combine(const AttentionMap& w_self, const AttentionMap& w_mutual,
                     const Tensor& mix_raw) {
    if (w_self.weights.shape() != w_mutual.weights.shape()) {
        throw DimensionError("combine: map shapes differ, " + shape_str(w_self.weights.shape()) +
                             " vs " + shape_str(w_mutual.weights.shape()));
    }
    Tensor lambda = sigmoid(mix_raw);
    Tensor one_minus = add_const(scale(lambda, -1.0), 1.0);
    return {add(scale_by(lambda, w_self.weights), scale_by(one_minus, w_mutual.weights))};
}

Tensor warp_and_residual(const Tensor& f_shared, const AttentionMap& w, const Affine1x1& value,
                         const Tensor& res) {
    const Shape& s = f_shared.shape();
    if (s.size() != 3) {
        throw DimensionError("warp_and_residual expects [C,H,W], got " + shape_str(s));
    }
    const int n = s[1] * s[2];
    if (w.weights.shape() != Shape{n, n}) {
        throw DimensionError("warp_and_residual: attention " + shape_str(w.weights.shape()) +
                             " does not match " + std::to_string(n) + " positions");
    }
    Tensor values = reshape(value.apply_map(f_shared), {s[0], n});
    Tensor warped = matmul(values, transpose2d(w.weights));
    return add(f_shared, scale_by(res, reshape(warped, s)));
}

StreamOutputs alfr_forward(const Tensor& f_shared, const AlfrParams& params, FlowMode flow) {
    const Shape& s = f_shared.shape();
    if (s.size() != 3 || s[0] != params.channels) {
        throw DimensionError("alfr_forward: input " + shape_str(s) + " does not match " +
                             std::to_string(params.channels) + " channels");
    }
    const int n = s[1] * s[2];
    const int reduced = params.channels / params.reduction;

    auto [f_v, f_s] = separate(f_shared, params);
    auto flat = [&](const Tensor& t) { return reshape(t, {reduced, n}); };
    Tensor f_v1 = flat(params.proj_v1.apply_map(f_v));
    Tensor f_v2 = flat(params.proj_v2.apply_map(f_v));
    Tensor f_s1 = flat(params.proj_s1.apply_map(f_s));
    Tensor f_s2 = flat(params.proj_s2.apply_map(f_s));

    const bool mutual_into_v = flow == FlowMode::both || flow == FlowMode::loc_to_app;
    const bool mutual_into_s = flow == FlowMode::both || flow == FlowMode::app_to_loc;

    AttentionMap w_v = self_reflect(f_v1, f_v2);
    if (mutual_into_v) {
        w_v = combine(w_v, mutual_reflect(f_s1, f_v2), params.mix_v_raw);
    }
    AttentionMap w_s = self_reflect(f_s1, f_s2);
    if (mutual_into_s) {
        w_s = combine(w_s, mutual_reflect(f_v1, f_s2), params.mix_s_raw);
    }

    StreamOutputs out;
    out.f_star_v = warp_and_residual(f_shared, w_v, params.value_v, params.res_v);
    out.f_star_s = warp_and_residual(f_shared, w_s, params.value_s, params.res_s);
    out.w_v = std::move(w_v);
    out.w_s = std::move(w_s);
    return out;
}

}  // namespace dfr
