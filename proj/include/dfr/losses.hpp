#pragma once

#include <array>
#include <span>
#include <string>

#include "dfr/tensor.hpp"

namespace dfr {

/// Targets decoded from appearance: class, heading, metric dimensions (w,h,l).
struct AppearanceTarget {
    int category = 0;
    double rot = 0.0;
    std::array<double, 3> dims{};  // (w, h, l), strictly positive
};

/// Targets decoded from localization: 2D box corners and 3D position.
struct LocalizationTarget {
    std::array<double, 4> box2d{};    // (u, v, u', v') with u < u', v < v'
    std::array<double, 3> center3d{};  // (x, y, z), camera frame
};

/// Which stream a regression target is trained under. Class is always
/// appearance; the 2D box and 3D position are always localization; rotation
/// and dimensions are configurable.
enum class Stream { appearance, localization };

Stream stream_from_string(const std::string& s);
std::string to_string(Stream stream);

struct ClusteringConfig {
    Stream rot_stream = Stream::appearance;
    Stream whl_stream = Stream::appearance;
};

/// Mean smooth-L1 with unit transition: 0.5 d^2 below |d| = 1, |d| - 0.5 above.
Tensor smooth_l1(const Tensor& pred, std::span<const double> target);

/// Cross-entropy -log softmax(logits)[target], max-subtracted.
Tensor category_loss(const Tensor& logits, int target);

/// -log(max(IoU, 1e-6)) of axis-aligned boxes given as (u, v, u', v').
Tensor box2d_iou_loss(const Tensor& pred, const std::array<double, 4>& target);

/// Smooth-L1 on the heading residual wrapped to (-pi, pi].
Tensor rotation_loss(const Tensor& pred, double target);

/// Raw per-task head outputs.
struct Predictions {
    Tensor category_logits;  // [n_c]
    Tensor rot;              // [1]
    Tensor dims;             // [3] (w, h, l)
    Tensor box2d;            // [4]
    Tensor center3d;         // [3]
};

struct GroupedLoss {
    Tensor l_v;  // appearance-aware loss
    Tensor l_s;  // localization-aware loss
};

/// Assemble the two grouped losses, routing rotation and dimensions per the
/// clustering config. The sum l_v + l_s does not depend on the routing.
GroupedLoss grouped_losses(const Predictions& preds, const AppearanceTarget& app,
                           const LocalizationTarget& loc, const ClusteringConfig& cfg);

}  // namespace dfr
