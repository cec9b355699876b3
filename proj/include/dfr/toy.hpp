#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfr/alfr.hpp"
#include "dfr/dit.hpp"
#include "dfr/eval.hpp"
#include "dfr/kitti.hpp"
#include "dfr/layers.hpp"
#include "dfr/losses.hpp"
#include "dfr/tensor.hpp"

namespace dfr::toy {

/// Training diverged; carries the step the non-finite loss appeared at.
struct RunFailure : std::runtime_error {
    RunFailure(int step, const std::string& message)
        : std::runtime_error("step " + std::to_string(step) + ": " + message), step(step) {}
    int step;
};

inline constexpr int kImageSize = 32;
inline constexpr int kCategories = 3;

const std::array<std::string, kCategories>& category_names();

/// One synthetic frame: a single colored box rendered into a 32x32 image.
/// Category determines the base color and the (disjoint) dimension ranges;
/// brightness falls off with 1/z, so depth is recoverable from appearance.
struct SyntheticScene {
    Tensor image;  // [3,32,32]
    int category = 0;
    std::array<double, 3> dims_hwl{};   // (h, w, l) meters
    std::array<double, 3> location{};   // bottom-center, camera frame
    double yaw = 0.0;
    std::array<double, 4> box2d{};      // projected, fully inside the image
    std::uint64_t seed = 0;
};

kitti::CalibP2 toy_calib();

SyntheticScene generate_scene(std::uint64_t seed);

/// Projected box2d recomputed from the 3D box (hull of the eight projected
/// corners); generate_scene stores exactly this.
std::array<double, 4> project_box3d(const kitti::CalibP2& calib,
                                    const std::array<double, 3>& dims_hwl,
                                    const std::array<double, 3>& location, double yaw);

struct TrainConfig {
    int steps = 500;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::uint64_t seed = 1;

    bool use_alfr = true;
    FlowMode flow = FlowMode::both;
    int reduction = 4;
    bool use_dit = true;
    DitVariant dit_variant = DitVariant::learned;
    ClusteringConfig clustering;

    /// Multiplier on the appearance loss before the trading combination.
    double appearance_loss_scale = 1.0;
};

/// Two 3x3 conv layers into the shared feature, the reflecting block, and
/// per-stream 1x1 heads read out at the object-center pixel.
struct ToyDetector {
    int channels = 16;
    ConvLayer enc1, enc2;
    AlfrParams alfr;
    Affine1x1 head_app;  // C -> [n_c+1 logits | rot | w h l]
    Affine1x1 head_loc;  // C -> [u v u' v' | x y z]
    DitParams dit;

    static ToyDetector init(const TrainConfig& cfg, Rng& rng);

    /// Parameters reached by the configured forward/loss path.
    ParameterSet params(const TrainConfig& cfg) const;
};

struct ForwardOut {
    Predictions preds;
    Tensor f_star_v, f_star_s, f_shared;
    int center_row = 0, center_col = 0;
};

/// Encoder -> reflecting block -> heads at the scene's center pixel.
ForwardOut toy_forward(const ToyDetector& detector, const SyntheticScene& scene,
                       const TrainConfig& cfg);

struct HistoryRow {
    int step;
    double l_v, l_s, s_v, s_s, total;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    ToyDetector detector;
};

TrainResult train(const TrainConfig& cfg);

/// Held-out detection quality: mean AP over the three categories with
/// rotated 3D IoU at the given threshold (R40, no difficulty filter).
double evaluate_ap3d(const ToyDetector& detector, const TrainConfig& cfg, int n_scenes,
                     std::uint64_t scene_stream, double iou_thresh);

/// Fraction of held-out scenes whose category logits rank the true class first.
double category_accuracy(const ToyDetector& detector, const TrainConfig& cfg, int n_scenes,
                         std::uint64_t scene_stream);

struct AblationVariant {
    std::string name;
    TrainConfig cfg;
};

struct AblationRow {
    std::string name;
    std::vector<double> seed_ap;
    double mean = 0.0;
    double stddev = 0.0;
};

/// Trains every variant over n_seeds seeds (cfg.seed + 0..n-1), evaluates
/// each on the same held-out scene set, and reports mean +- std AP. Jobs run
/// in parallel; results do not depend on scheduling.
std::vector<AblationRow> ablate(const std::vector<AblationVariant>& variants, int n_seeds,
                                int eval_scenes, double iou_thresh, int threads = 0);

/// Seed stream mixer used to decouple train/eval scene sequences.
std::uint64_t mix_seed(std::uint64_t stream, std::uint64_t index);

inline constexpr std::uint64_t kTrainStream = 0x7261696e;
inline constexpr std::uint64_t kEvalStream = 0x6576616c;

}  // namespace dfr::toy
