#include "dfr/dit.hpp"

#include <algorithm>

namespace dfr {

DitVariant dit_variant_from_string(const std::string& s) {
    if (s == "learned") return DitVariant::learned;
    if (s == "init") return DitVariant::init;
    if (s == "cross") return DitVariant::cross;
    if (s == "shared") return DitVariant::shared;
    throw ConfigError("unknown dit variant '" + s + "'");
}

std::string to_string(DitVariant variant) {
    switch (variant) {
        case DitVariant::learned: return "learned";
        case DitVariant::init: return "init";
        case DitVariant::cross: return "cross";
        case DitVariant::shared: return "shared";
    }
    throw ConfigError("invalid dit variant");
}

TradingHead TradingHead::init(int channels, int reduction, Rng& rng) {
    const int hidden = std::max(1, channels / reduction);
    TradingHead head;
    head.fc1 = Affine1x1::init(hidden, channels, rng);
    head.fc2 = Affine1x1::init(1, hidden, rng);
    return head;
}

void TradingHead::collect(ParameterSet& params, const std::string& prefix) const {
    fc1.collect(params, prefix + ".fc1");
    fc2.collect(params, prefix + ".fc2");
}

DitParams DitParams::init(int channels, int reduction, DitVariant variant, Rng& rng,
                          double init_raw) {
    DitParams p;
    p.variant = variant;
    p.head_v = TradingHead::init(channels, reduction, rng);
    p.head_s = TradingHead::init(channels, reduction, rng);
    p.init_raw_v = Tensor::scalar(init_raw, true);
    p.init_raw_s = Tensor::scalar(init_raw, true);
    return p;
}

void DitParams::collect(ParameterSet& params, const std::string& prefix) const {
    if (variant == DitVariant::init) {
        params.add(prefix + ".init_raw_v", init_raw_v);
        params.add(prefix + ".init_raw_s", init_raw_s);
        return;
    }
    head_v.collect(params, prefix + ".head_v");
    head_s.collect(params, prefix + ".head_s");
}

Tensor trading_score(const Tensor& f_star, const TradingHead& head) {
    Tensor pooled = global_avg_pool(f_star);
    Tensor hidden = relu(head.fc1.apply_vec(pooled));
    return sigmoid(head.fc2.apply_vec(hidden));
}

TradingScores score_variant(const DitParams& params, const Tensor& f_star_v,
                            const Tensor& f_star_s, const Tensor& f_shared) {
    switch (params.variant) {
        case DitVariant::learned:
            return {trading_score(f_star_v, params.head_v), trading_score(f_star_s, params.head_s)};
        case DitVariant::init:
            return {sigmoid(params.init_raw_v), sigmoid(params.init_raw_s)};
        case DitVariant::cross:
            return {trading_score(f_star_s, params.head_v), trading_score(f_star_v, params.head_s)};
        case DitVariant::shared:
            return {trading_score(f_shared, params.head_v), trading_score(f_shared, params.head_s)};
    }
    throw ConfigError("invalid dit variant");
}

Tensor trading_loss(const Tensor& l_v, const Tensor& l_s, const TradingScores& scores) {
    if (l_v.numel() != 1 || l_s.numel() != 1) {
        throw DimensionError("trading_loss expects scalar task losses");
    }
    const double sv = scores.s_v.item();
    const double ss = scores.s_s.item();
    if (!(sv > 0.0) || !(ss > 0.0)) {
        throw DomainError("trading score outside (0,1]: s_v=" + std::to_string(sv) +
                          " s_s=" + std::to_string(ss));
    }
    Tensor weighted = add(mul(scores.s_v, l_v), mul(scores.s_s, l_s));
    Tensor regularizer = log_elem(mul(scores.s_v, scores.s_s));
    return sub(weighted, regularizer);
}

}  // namespace dfr
