#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dfr/errors.hpp"
#include "dfr/kitti.hpp"

namespace dfr::eval {

/// Bird's-eye-view rectangle: center (cx, cz), extents, heading.
struct RotatedBevBox {
    double cx = 0.0;
    double cz = 0.0;
    double length = 1.0;  // extent along the heading
    double width = 1.0;
    double yaw = 0.0;
};

/// Upright 3D box: BEV footprint plus a vertical interval
/// [y_bottom - height, y_bottom] (camera y points down).
struct Box3D {
    RotatedBevBox bev;
    double y_bottom = 0.0;
    double height = 1.0;
};

/// Corners of the footprint, counter-clockwise.
std::array<std::array<double, 2>, 4> bev_corners(const RotatedBevBox& box);

/// Intersection-over-union of two rotated rectangles; the intersection is a
/// convex polygon obtained by clipping one box against the other's edges.
double rotated_bev_iou(const RotatedBevBox& a, const RotatedBevBox& b);

double iou_3d(const Box3D& a, const Box3D& b);

/// Axis-aligned IoU of (u, v, u', v') boxes.
double axis_aligned_iou(const std::array<double, 4>& a, const std::array<double, 4>& b);

/// Greedy score-descending suppression. Boxes scoring below score_thresh are
/// dropped first; a surviving box is removed when its IoU with an already
/// kept box exceeds iou_thresh. Returns kept indices into the input order.
std::vector<int> nms_2d(const std::vector<std::array<double, 4>>& boxes,
                        const std::vector<double>& scores, double iou_thresh,
                        double score_thresh);

/// Cumulative (recall, precision) samples of a score-descending sweep.
struct PrCurve {
    std::vector<std::pair<double, double>> points;  // (recall, precision)
    int total_gt = 0;
};

enum class ApMode { r11, r40 };
enum class IouMetric { bev, box3d };

ApMode ap_mode_from_string(const std::string& s);

/// Interpolated average precision: the mean over the mode's recall grid of
/// max{precision(r') : r' >= r}. R11 samples {0, 0.1, ..., 1}; R40 samples
/// {1/40, ..., 1}.
double average_precision(const PrCurve& curve, ApMode mode);

/// Sweep entries pooled over frames: detection score plus whether it matched
/// a counted ground truth.
struct SweepEntry {
    double score;
    bool tp;
};

PrCurve build_pr_curve(std::vector<SweepEntry> entries, int total_gt);

using FrameLabels = std::map<std::string, std::vector<kitti::ObjectLabel>>;

Box3D box3d_from_label(const kitti::ObjectLabel& label);

/// KITTI-style AP for one category. Detections are matched per frame in
/// score-descending order, each to the best not-yet-matched ground truth at
/// IoU >= iou_thresh. Ground truth outside the difficulty level (or of a
/// neighboring category such as Van for Car) absorbs matches without counting
/// as either TP or FP; difficulty nullopt disables the strata filter.
double evaluate_category(const FrameLabels& gt, const FrameLabels& det,
                         const std::string& category,
                         std::optional<kitti::Difficulty> difficulty, double iou_thresh,
                         IouMetric metric, ApMode mode);

}  // namespace dfr::eval
