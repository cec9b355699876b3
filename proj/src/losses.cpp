#include "dfr/losses.hpp"

#include <cmath>

namespace dfr {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kIouFloor = 1e-6;

// max(a, b) and min(a, b) on single-element tensors, built on relu so the
// adjoints need no extra rules.
Tensor t_max(const Tensor& a, const Tensor& b) { return add(a, relu(sub(b, a))); }
Tensor t_min(const Tensor& a, const Tensor& b) { return sub(a, relu(sub(a, b))); }

Tensor pick(const Tensor& t, int i) { return slice_flat(t, i, 1); }

}  // namespace

Stream stream_from_string(const std::string& s) {
    if (s == "appearance") return Stream::appearance;
    if (s == "localization") return Stream::localization;
    throw ConfigError("unknown stream '" + s + "'");
}

std::string to_string(Stream stream) {
    return stream == Stream::appearance ? "appearance" : "localization";
}

Tensor smooth_l1(const Tensor& pred, std::span<const double> target) {
    if (pred.numel() != static_cast<std::int64_t>(target.size())) {
        throw DimensionError("smooth_l1: " + std::to_string(pred.numel()) + " predictions vs " +
                             std::to_string(target.size()) + " targets");
    }
    Tensor tgt = Tensor::from_data(pred.shape(), {target.begin(), target.end()});
    Tensor d = sub(pred, tgt);
    // |d| = relu(d) + relu(-d); huber = 0.5 d^2 - 0.5 relu(|d| - 1)^2
    Tensor abs_d = add(relu(d), relu(scale(d, -1.0)));
    Tensor excess = relu(add_const(abs_d, -1.0));
    Tensor huber = sub(scale(mul(d, d), 0.5), scale(mul(excess, excess), 0.5));
    return scale(sum_all(huber), 1.0 / static_cast<double>(pred.numel()));
}

Tensor category_loss(const Tensor& logits, int target) {
    const std::int64_t n = logits.numel();
    if (n < 2) throw ContractError("category_loss needs at least 2 classes");
    if (target < 0 || target >= n) {
        throw ContractError("category_loss: target " + std::to_string(target) + " out of [0, " +
                            std::to_string(n) + ")");
    }
    double mx = logits.data()[0];
    for (double v : logits.data()) mx = std::max(mx, v);
    Tensor shifted = add_const(logits, -mx);
    Tensor log_norm = log_elem(sum_all(exp_elem(shifted)));
    return sub(log_norm, pick(shifted, target));
}

Tensor box2d_iou_loss(const Tensor& pred, const std::array<double, 4>& target) {
    if (pred.numel() != 4) {
        throw DimensionError("box2d_iou_loss: expected 4 coordinates, got " +
                             shape_str(pred.shape()));
    }
    if (!(target[0] < target[2]) || !(target[1] < target[3])) {
        throw ContractError("box2d_iou_loss: target box is not well-ordered");
    }
    Tensor u1 = pick(pred, 0), v1 = pick(pred, 1), u2 = pick(pred, 2), v2 = pick(pred, 3);
    Tensor g1 = Tensor::scalar(target[0]), g2 = Tensor::scalar(target[1]);
    Tensor g3 = Tensor::scalar(target[2]), g4 = Tensor::scalar(target[3]);

    Tensor iw = relu(sub(t_min(u2, g3), t_max(u1, g1)));
    Tensor ih = relu(sub(t_min(v2, g4), t_max(v1, g2)));
    Tensor inter = mul(iw, ih);

    Tensor area_p = mul(relu(sub(u2, u1)), relu(sub(v2, v1)));
    const double area_g = (target[2] - target[0]) * (target[3] - target[1]);
    Tensor uni = sub(add_const(area_p, area_g), inter);
    // Keep the ratio >= the floor without a division: clamp the numerator at
    // floor * union, then take the log difference.
    Tensor uni_safe = add_const(relu(add_const(uni, -1e-12)), 1e-12);
    Tensor inter_floor = add(scale(uni_safe, kIouFloor),
                             relu(sub(inter, scale(uni_safe, kIouFloor))));
    return sub(log_elem(uni_safe), log_elem(inter_floor));
}

Tensor rotation_loss(const Tensor& pred, double target) {
    if (pred.numel() != 1) {
        throw DimensionError("rotation_loss: expected a single angle, got " +
                             shape_str(pred.shape()));
    }
    // Shift the target by whole turns so the current residual lies in
    // (-pi, pi]; the shift is constant, so gradients are unaffected.
    const double d = pred.item() - target;
    double wrapped = d - 2.0 * kPi * std::floor((d + kPi) / (2.0 * kPi));
    if (wrapped <= -kPi) wrapped = kPi;
    const double adjusted = pred.item() - wrapped;
    const double t[1] = {adjusted};
    return smooth_l1(pred, t);
}

GroupedLoss grouped_losses(const Predictions& preds, const AppearanceTarget& app,
                           const LocalizationTarget& loc, const ClusteringConfig& cfg) {
    for (double d : app.dims) {
        if (!(d > 0.0)) throw ContractError("grouped_losses: non-positive target dimension");
    }
    Tensor l_class = category_loss(preds.category_logits, app.category);
    Tensor l_rot = rotation_loss(preds.rot, app.rot);
    Tensor l_whl = smooth_l1(preds.dims, app.dims);
    Tensor l_box = box2d_iou_loss(preds.box2d, loc.box2d);
    Tensor l_xyz = smooth_l1(preds.center3d, loc.center3d);

    Tensor l_v = l_class;
    Tensor l_s = add(l_box, l_xyz);
    if (cfg.rot_stream == Stream::appearance) {
        l_v = add(l_v, l_rot);
    } else {
        l_s = add(l_s, l_rot);
    }
    if (cfg.whl_stream == Stream::appearance) {
        l_v = add(l_v, l_whl);
    } else {
        l_s = add(l_s, l_whl);
    }
    return {l_v, l_s};
}

}  // namespace dfr
