#include "dfr/toy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace dfr::toy {

namespace {

constexpr double kFocal = 32.0;
constexpr double kPrincipal = 16.0;
constexpr double kBrightness = 8.0;  // added as kBrightness / z
constexpr double kZMin = 8.0, kZMax = 40.0;
constexpr double kYawRange = 0.3;

struct DimRange {
    double lo, hi;
};
// Disjoint per-category (h, w, l) ranges so dimensions identify the class.
constexpr DimRange kDims[kCategories][3] = {
    {{1.40, 1.55}, {1.55, 1.75}, {3.70, 4.10}},  // Car
    {{1.70, 1.85}, {0.45, 0.60}, {0.45, 0.60}},  // Pedestrian
    {{1.56, 1.69}, {0.65, 0.80}, {1.60, 1.90}},  // Cyclist
};

constexpr double kBaseColor[kCategories][3] = {
    {0.8, 0.2, 0.2},
    {0.2, 0.8, 0.2},
    {0.2, 0.2, 0.8},
};

}  // namespace

const std::array<std::string, kCategories>& category_names() {
    static const std::array<std::string, kCategories> names = {"Car", "Pedestrian", "Cyclist"};
    return names;
}

kitti::CalibP2 toy_calib() {
    kitti::CalibP2 calib;
    calib.p2 = {kFocal, 0, kPrincipal, 0, 0, kFocal, kPrincipal, 0, 0, 0, 1, 0};
    return calib;
}

std::uint64_t mix_seed(std::uint64_t stream, std::uint64_t index) {
    // splitmix64 over the combined words
    std::uint64_t z = stream * 0x9E3779B97F4A7C15ull + index + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::array<double, 4> project_box3d(const kitti::CalibP2& calib,
                                    const std::array<double, 3>& dims_hwl,
                                    const std::array<double, 3>& location, double yaw) {
    const double h = dims_hwl[0], w = dims_hwl[1], l = dims_hwl[2];
    const double c = std::cos(yaw), s = std::sin(yaw);
    double umin = 1e30, vmin = 1e30, umax = -1e30, vmax = -1e30;
    for (int i = 0; i < 8; ++i) {
        const double dx = (i & 1 ? 0.5 : -0.5) * l;
        const double dz = (i & 2 ? 0.5 : -0.5) * w;
        const double dy = (i & 4 ? 0.0 : -h);  // bottom-anchored
        const std::array<double, 3> corner = {location[0] + c * dx + s * dz, location[1] + dy,
                                              location[2] - s * dx + c * dz};
        const auto [u, v] = kitti::project_center(calib, corner);
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    return {umin, vmin, umax, vmax};
}

SyntheticScene generate_scene(std::uint64_t seed) {
    Rng rng(seed);
    const auto calib = toy_calib();

    SyntheticScene scene;
    scene.seed = seed;
    scene.category = static_cast<int>(rng.below(kCategories));
    for (int i = 0; i < 3; ++i) {
        scene.dims_hwl[i] = rng.uniform(kDims[scene.category][i].lo, kDims[scene.category][i].hi);
    }

    const double margin = 1.0;  // pixels kept clear of the border
    for (int attempt = 0;; ++attempt) {
        const double z = rng.uniform(kZMin, kZMax);
        const double yaw = rng.uniform(-kYawRange, kYawRange);
        // Horizontal slack: the footprint's largest corner offset, projected.
        const double ext = 0.5 * (scene.dims_hwl[2] + scene.dims_hwl[1]);
        const double x_span = std::max(0.0, (kPrincipal - margin) * z / kFocal - ext);
        const double x = rng.uniform(-x_span, x_span);
        const double y = rng.uniform(0.8, 2.2);
        scene.location = {x, y, z};
        scene.yaw = yaw;
        scene.box2d = project_box3d(calib, scene.dims_hwl, scene.location, yaw);
        const bool inside = scene.box2d[0] >= margin && scene.box2d[1] >= margin &&
                            scene.box2d[2] <= kImageSize - margin &&
                            scene.box2d[3] <= kImageSize - margin &&
                            scene.box2d[0] < scene.box2d[2] && scene.box2d[1] < scene.box2d[3];
        if (inside) break;
        if (attempt > 256) {
            throw ContractError("generate_scene: placement rejection did not converge");
        }
    }

    std::vector<double> pix(static_cast<std::size_t>(3) * kImageSize * kImageSize, 0.0);
    const double bright = kBrightness / scene.location[2];
    const int u0 = static_cast<int>(std::floor(scene.box2d[0]));
    const int v0 = static_cast<int>(std::floor(scene.box2d[1]));
    const int u1 = static_cast<int>(std::ceil(scene.box2d[2]));
    const int v1 = static_cast<int>(std::ceil(scene.box2d[3]));
    for (int ch = 0; ch < 3; ++ch) {
        const double value = kBaseColor[scene.category][ch] + bright;
        for (int py = std::max(0, v0); py < std::min(kImageSize, v1); ++py) {
            for (int px = std::max(0, u0); px < std::min(kImageSize, u1); ++px) {
                pix[(static_cast<std::size_t>(ch) * kImageSize + py) * kImageSize + px] = value;
            }
        }
    }
    scene.image = Tensor::from_data({3, kImageSize, kImageSize}, std::move(pix));
    return scene;
}

ToyDetector ToyDetector::init(const TrainConfig& cfg, Rng& rng) {
    ToyDetector d;
    d.channels = 16;
    d.enc1 = ConvLayer::init(d.channels, 3, 3, Padding::same, rng);
    d.enc2 = ConvLayer::init(d.channels, d.channels, 3, Padding::same, rng);
    d.alfr = AlfrParams::init(d.channels, cfg.reduction, rng);
    d.head_app = Affine1x1::init(kCategories + 1 + 1 + 3, d.channels, rng);
    d.head_loc = Affine1x1::init(4 + 3, d.channels, rng);
    d.dit = DitParams::init(d.channels, cfg.reduction, cfg.dit_variant, rng);

    // Start the regression heads at plausible targets so the IoU loss sees
    // overlap from step 0 and the smooth-L1 terms start in a sane range.
    auto& loc_bias = d.head_loc.bias.data();
    loc_bias[0] = 6.0;
    loc_bias[1] = 6.0;
    loc_bias[2] = 26.0;
    loc_bias[3] = 26.0;
    loc_bias[4] = 0.0;
    loc_bias[5] = 1.5;
    loc_bias[6] = 20.0;
    auto& app_bias = d.head_app.bias.data();
    app_bias[kCategories + 2] = 1.1;  // w
    app_bias[kCategories + 3] = 1.6;  // h
    app_bias[kCategories + 4] = 2.0;  // l
    return d;
}

ParameterSet ToyDetector::params(const TrainConfig& cfg) const {
    ParameterSet set;
    enc1.collect(set, "enc1");
    enc2.collect(set, "enc2");
    if (cfg.use_alfr) {
        // Only the parameters the selected flow touches.
        alfr.sep_v.collect(set, "alfr.sep_v");
        alfr.sep_s.collect(set, "alfr.sep_s");
        alfr.proj_v1.collect(set, "alfr.proj_v1");
        alfr.proj_v2.collect(set, "alfr.proj_v2");
        alfr.proj_s1.collect(set, "alfr.proj_s1");
        alfr.proj_s2.collect(set, "alfr.proj_s2");
        alfr.value_v.collect(set, "alfr.value_v");
        alfr.value_s.collect(set, "alfr.value_s");
        if (cfg.flow == FlowMode::both || cfg.flow == FlowMode::loc_to_app) {
            set.add("alfr.mix_v_raw", alfr.mix_v_raw);
        }
        if (cfg.flow == FlowMode::both || cfg.flow == FlowMode::app_to_loc) {
            set.add("alfr.mix_s_raw", alfr.mix_s_raw);
        }
        set.add("alfr.res_v", alfr.res_v);
        set.add("alfr.res_s", alfr.res_s);
    }
    head_app.collect(set, "head_app");
    head_loc.collect(set, "head_loc");
    if (cfg.use_dit) dit.collect(set, "dit");
    return set;
}

namespace {

std::pair<int, int> center_pixel(const SyntheticScene& scene) {
    const std::array<double, 3> mid = {scene.location[0], scene.location[1] - 0.5 * scene.dims_hwl[0],
                                       scene.location[2]};
    const auto [u, v] = kitti::project_center(toy_calib(), mid);
    const int col = std::clamp(static_cast<int>(std::lround(u)), 0, kImageSize - 1);
    const int row = std::clamp(static_cast<int>(std::lround(v)), 0, kImageSize - 1);
    return {row, col};
}

AppearanceTarget appearance_target(const SyntheticScene& scene) {
    AppearanceTarget t;
    t.category = scene.category;
    t.rot = scene.yaw;
    t.dims = {scene.dims_hwl[1], scene.dims_hwl[0], scene.dims_hwl[2]};  // (w, h, l)
    return t;
}

LocalizationTarget localization_target(const SyntheticScene& scene) {
    LocalizationTarget t;
    t.box2d = scene.box2d;
    t.center3d = scene.location;
    return t;
}

}  // namespace

ForwardOut toy_forward(const ToyDetector& detector, const SyntheticScene& scene,
                       const TrainConfig& cfg) {
    ForwardOut out;
    Tensor f1 = relu(detector.enc1.apply(scene.image));
    out.f_shared = relu(detector.enc2.apply(f1));

    Tensor feat_v = out.f_shared;
    Tensor feat_s = out.f_shared;
    if (cfg.use_alfr) {
        StreamOutputs streams = alfr_forward(out.f_shared, detector.alfr, cfg.flow);
        feat_v = streams.f_star_v;
        feat_s = streams.f_star_s;
    }
    out.f_star_v = feat_v;
    out.f_star_s = feat_s;

    const auto [row, col] = center_pixel(scene);
    out.center_row = row;
    out.center_col = col;
    Tensor app_vec = detector.head_app.apply_vec(spatial_column(feat_v, row, col));
    Tensor loc_vec = detector.head_loc.apply_vec(spatial_column(feat_s, row, col));

    out.preds.category_logits = slice_flat(app_vec, 0, kCategories + 1);
    out.preds.rot = slice_flat(app_vec, kCategories + 1, 1);
    out.preds.dims = slice_flat(app_vec, kCategories + 2, 3);
    out.preds.box2d = slice_flat(loc_vec, 0, 4);
    out.preds.center3d = slice_flat(loc_vec, 4, 3);
    return out;
}

TrainResult train(const TrainConfig& cfg) {
    if (cfg.steps < 1) throw ConfigError("train: steps must be >= 1");
    Rng rng(cfg.seed);
    ToyDetector detector = ToyDetector::init(cfg, rng);
    ParameterSet params = detector.params(cfg);
    SgdOptimizer sgd({cfg.lr, cfg.momentum, cfg.weight_decay});

    TrainResult result;
    result.history.reserve(static_cast<std::size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        const SyntheticScene scene =
            generate_scene(mix_seed(kTrainStream + cfg.seed, static_cast<std::uint64_t>(step)));
        ForwardOut fwd = toy_forward(detector, scene, cfg);
        GroupedLoss losses = grouped_losses(fwd.preds, appearance_target(scene),
                                            localization_target(scene), cfg.clustering);
        Tensor l_v = cfg.appearance_loss_scale == 1.0
                         ? losses.l_v
                         : scale(losses.l_v, cfg.appearance_loss_scale);

        Tensor total;
        double s_v = 1.0, s_s = 1.0;
        if (cfg.use_dit) {
            TradingScores scores = score_variant(detector.dit, fwd.f_star_v, fwd.f_star_s,
                                                 fwd.f_shared);
            s_v = scores.s_v.item();
            s_s = scores.s_s.item();
            total = trading_loss(l_v, losses.l_s, scores);
        } else {
            total = add(l_v, losses.l_s);
        }

        const HistoryRow row{step, l_v.item(), losses.l_s.item(), s_v, s_s, total.item()};
        if (!std::isfinite(row.total)) {
            throw RunFailure(step, "non-finite training loss");
        }
        result.history.push_back(row);

        total.backward();
        sgd.step(params);
    }
    result.detector = std::move(detector);
    return result;
}

namespace {

kitti::ObjectLabel gt_label(const SyntheticScene& scene) {
    kitti::ObjectLabel label;
    label.category = category_names()[static_cast<std::size_t>(scene.category)];
    label.truncation = 0.0;
    label.occlusion = 0;
    label.alpha = -10.0;
    label.box2d = scene.box2d;
    label.dims_hwl = scene.dims_hwl;
    label.location = scene.location;
    label.rotation_y = scene.yaw;
    return label;
}

kitti::ObjectLabel det_label(const Predictions& preds) {
    const auto& logits = preds.category_logits.data();
    int best = 0;
    for (int c = 1; c < kCategories; ++c) {
        if (logits[c] > logits[best]) best = c;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : logits) denom += std::exp(v - mx);
    const double score = std::exp(logits[best] - mx) / denom;

    kitti::ObjectLabel label;
    label.category = category_names()[static_cast<std::size_t>(best)];
    label.alpha = -10.0;
    label.box2d = {preds.box2d.data()[0], preds.box2d.data()[1], preds.box2d.data()[2],
                   preds.box2d.data()[3]};
    const auto& dims = preds.dims.data();  // (w, h, l)
    label.dims_hwl = {std::max(dims[1], 0.01), std::max(dims[0], 0.01), std::max(dims[2], 0.01)};
    label.location = {preds.center3d.data()[0], preds.center3d.data()[1],
                      preds.center3d.data()[2]};
    label.rotation_y = preds.rot.data()[0];
    label.score = score;
    return label;
}

std::string frame_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", index);
    return buf;
}

}  // namespace

double evaluate_ap3d(const ToyDetector& detector, const TrainConfig& cfg, int n_scenes,
                     std::uint64_t scene_stream, double iou_thresh) {
    eval::FrameLabels gt, det;
    for (int i = 0; i < n_scenes; ++i) {
        const SyntheticScene scene =
            generate_scene(mix_seed(scene_stream, static_cast<std::uint64_t>(i)));
        ForwardOut fwd = toy_forward(detector, scene, cfg);
        const std::string frame = frame_id(i);
        gt[frame].push_back(gt_label(scene));
        det[frame].push_back(det_label(fwd.preds));
    }
    double acc = 0.0;
    for (const auto& name : category_names()) {
        acc += eval::evaluate_category(gt, det, name, std::nullopt, iou_thresh,
                                       eval::IouMetric::box3d, eval::ApMode::r40);
    }
    return acc / kCategories;
}

double category_accuracy(const ToyDetector& detector, const TrainConfig& cfg, int n_scenes,
                         std::uint64_t scene_stream) {
    int correct = 0;
    for (int i = 0; i < n_scenes; ++i) {
        const SyntheticScene scene =
            generate_scene(mix_seed(scene_stream, static_cast<std::uint64_t>(i)));
        ForwardOut fwd = toy_forward(detector, scene, cfg);
        const auto& logits = fwd.preds.category_logits.data();
        int best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c) {
            if (logits[c] > logits[best]) best = static_cast<int>(c);
        }
        if (best == scene.category) ++correct;
    }
    return static_cast<double>(correct) / n_scenes;
}

std::vector<AblationRow> ablate(const std::vector<AblationVariant>& variants, int n_seeds,
                                int eval_scenes, double iou_thresh, int threads) {
    if (n_seeds < 1) throw ConfigError("ablate: need at least one seed");
    struct Job {
        int variant, seed_index;
    };
    std::vector<Job> jobs;
    for (int v = 0; v < static_cast<int>(variants.size()); ++v) {
        for (int s = 0; s < n_seeds; ++s) jobs.push_back({v, s});
    }
    std::vector<std::vector<double>> aps(variants.size(), std::vector<double>(n_seeds, 0.0));

    if (threads <= 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(jobs.size());
    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            const Job job = jobs[j];
            try {
                TrainConfig cfg = variants[static_cast<std::size_t>(job.variant)].cfg;
                cfg.seed += static_cast<std::uint64_t>(job.seed_index);
                TrainResult run = train(cfg);
                aps[static_cast<std::size_t>(job.variant)][static_cast<std::size_t>(job.seed_index)] =
                    evaluate_ap3d(run.detector, cfg, eval_scenes, kEvalStream, iou_thresh);
            } catch (const std::exception& e) {
                errors[j] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& err : errors) {
        if (!err.empty()) throw ContractError("ablate job failed: " + err);
    }

    std::vector<AblationRow> rows;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        AblationRow row;
        row.name = variants[v].name;
        row.seed_ap = aps[v];
        for (double ap : aps[v]) row.mean += ap;
        row.mean /= n_seeds;
        for (double ap : aps[v]) row.stddev += (ap - row.mean) * (ap - row.mean);
        row.stddev = n_seeds > 1 ? std::sqrt(row.stddev / (n_seeds - 1)) : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dfr::toy
