#pragma once

#include <string>

#include "dfr/layers.hpp"
#include "dfr/tensor.hpp"

namespace dfr {

/// How the trading scores are produced.
///   learned - each stream's score from its own warped feature (default)
///   init    - free trainable scalars, no feature input
///   cross   - each stream scores the other stream's feature
///   shared  - both scores from the shared feature, separate heads
enum class DitVariant { learned, init, cross, shared };

DitVariant dit_variant_from_string(const std::string& s);
std::string to_string(DitVariant variant);

/// Score head: pool -> C -> C/r affine -> relu -> 1 affine -> sigmoid.
struct TradingHead {
    Affine1x1 fc1;  // C -> C/r
    Affine1x1 fc2;  // C/r -> 1

    static TradingHead init(int channels, int reduction, Rng& rng);
    void collect(ParameterSet& params, const std::string& prefix) const;
};

struct DitParams {
    DitVariant variant = DitVariant::learned;
    TradingHead head_v, head_s;
    Tensor init_raw_v, init_raw_s;  // used by the init variant, sigmoid-squashed

    static DitParams init(int channels, int reduction, DitVariant variant, Rng& rng,
                          double init_raw = 0.0);
    void collect(ParameterSet& params, const std::string& prefix) const;
};

/// Per-task confidences, both strictly inside (0,1).
struct TradingScores {
    Tensor s_v;
    Tensor s_s;
};

/// Confidence of one stream's feature, a single-element tensor in (0,1).
Tensor trading_score(const Tensor& f_star, const TradingHead& head);

/// Scores for both tasks under the configured variant.
TradingScores score_variant(const DitParams& params, const Tensor& f_star_v,
                            const Tensor& f_star_s, const Tensor& f_shared);

/// Total trading loss: s_v * l_v + s_s * l_s - log(s_v * s_s). The log term
/// keeps the scores from collapsing to zero.
Tensor trading_loss(const Tensor& l_v, const Tensor& l_s, const TradingScores& scores);

}  // namespace dfr
