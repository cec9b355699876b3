#include "dfr/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace dfr::eval {

namespace {

struct Pt {
    double x, y;
};

double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Shoelace area of a simple polygon (positive for counter-clockwise order).
double polygon_area(const std::vector<Pt>& poly) {
    if (poly.size() < 3) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Pt& p = poly[i];
        const Pt& q = poly[(i + 1) % poly.size()];
        acc += p.x * q.y - p.y * q.x;
    }
    return 0.5 * acc;
}

// Clip a convex polygon against the half-plane left of edge a->b.
std::vector<Pt> clip_edge(const std::vector<Pt>& poly, const Pt& a, const Pt& b) {
    std::vector<Pt> out;
    out.reserve(poly.size() + 1);
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Pt& cur = poly[i];
        const Pt& nxt = poly[(i + 1) % poly.size()];
        const double dc = cross(a, b, cur);
        const double dn = cross(a, b, nxt);
        if (dc >= 0.0) out.push_back(cur);
        if ((dc > 0.0 && dn < 0.0) || (dc < 0.0 && dn > 0.0)) {
            const double t = dc / (dc - dn);
            out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
        }
    }
    return out;
}

}  // namespace

std::array<std::array<double, 2>, 4> bev_corners(const RotatedBevBox& box) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const double hl = 0.5 * box.length, hw = 0.5 * box.width;
    // Local corners (+-hl, +-hw) rotated into the plane, counter-clockwise.
    const double lx[4] = {hl, -hl, -hl, hl};
    const double lw[4] = {hw, hw, -hw, -hw};
    std::array<std::array<double, 2>, 4> out;
    for (int i = 0; i < 4; ++i) {
        out[i][0] = box.cx + c * lx[i] - s * lw[i];
        out[i][1] = box.cz + s * lx[i] + c * lw[i];
    }
    return out;
}

double rotated_bev_iou(const RotatedBevBox& a, const RotatedBevBox& b) {
    if (!(a.length > 0.0) || !(a.width > 0.0) || !(b.length > 0.0) || !(b.width > 0.0)) {
        throw ContractError("rotated_bev_iou: non-positive box extents");
    }
    const auto ca = bev_corners(a);
    const auto cb = bev_corners(b);
    std::vector<Pt> poly = {{ca[0][0], ca[0][1]},
                            {ca[1][0], ca[1][1]},
                            {ca[2][0], ca[2][1]},
                            {ca[3][0], ca[3][1]}};
    for (int e = 0; e < 4 && !poly.empty(); ++e) {
        const Pt ea{cb[e][0], cb[e][1]};
        const Pt eb{cb[(e + 1) % 4][0], cb[(e + 1) % 4][1]};
        poly = clip_edge(poly, ea, eb);
    }
    const double inter = std::abs(polygon_area(poly));
    const double area_a = a.length * a.width;
    const double area_b = b.length * b.width;
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double iou_3d(const Box3D& a, const Box3D& b) {
    if (!(a.height > 0.0) || !(b.height > 0.0)) {
        throw ContractError("iou_3d: non-positive height");
    }
    const auto ca = bev_corners(a.bev);
    const auto cb = bev_corners(b.bev);
    std::vector<Pt> poly = {{ca[0][0], ca[0][1]},
                            {ca[1][0], ca[1][1]},
                            {ca[2][0], ca[2][1]},
                            {ca[3][0], ca[3][1]}};
    for (int e = 0; e < 4 && !poly.empty(); ++e) {
        const Pt ea{cb[e][0], cb[e][1]};
        const Pt eb{cb[(e + 1) % 4][0], cb[(e + 1) % 4][1]};
        poly = clip_edge(poly, ea, eb);
    }
    const double inter_area = std::abs(polygon_area(poly));
    const double y_hi = std::min(a.y_bottom, b.y_bottom);
    const double y_lo = std::max(a.y_bottom - a.height, b.y_bottom - b.height);
    const double overlap_h = std::max(0.0, y_hi - y_lo);
    const double inter_vol = inter_area * overlap_h;
    const double vol_a = a.bev.length * a.bev.width * a.height;
    const double vol_b = b.bev.length * b.bev.width * b.height;
    const double uni = vol_a + vol_b - inter_vol;
    return uni > 0.0 ? inter_vol / uni : 0.0;
}

double axis_aligned_iou(const std::array<double, 4>& a, const std::array<double, 4>& b) {
    const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
    const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double area_a = std::max(0.0, a[2] - a[0]) * std::max(0.0, a[3] - a[1]);
    const double area_b = std::max(0.0, b[2] - b[0]) * std::max(0.0, b[3] - b[1]);
    const double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<int> nms_2d(const std::vector<std::array<double, 4>>& boxes,
                        const std::vector<double>& scores, double iou_thresh,
                        double score_thresh) {
    if (boxes.size() != scores.size()) {
        throw DimensionError("nms_2d: " + std::to_string(boxes.size()) + " boxes vs " +
                             std::to_string(scores.size()) + " scores");
    }
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(boxes.size()); ++i) {
        if (scores[i] >= score_thresh) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) {
        if (scores[l] != scores[r]) return scores[l] > scores[r];
        return l < r;
    });
    std::vector<int> kept;
    for (int idx : order) {
        bool suppressed = false;
        for (int k : kept) {
            if (axis_aligned_iou(boxes[idx], boxes[k]) > iou_thresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(idx);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

ApMode ap_mode_from_string(const std::string& s) {
    if (s == "r11" || s == "R11") return ApMode::r11;
    if (s == "r40" || s == "R40") return ApMode::r40;
    throw ConfigError("unknown AP mode '" + s + "'");
}

PrCurve build_pr_curve(std::vector<SweepEntry> entries, int total_gt) {
    if (total_gt <= 0) {
        throw ContractError("pr curve needs at least one ground-truth object");
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const SweepEntry& a, const SweepEntry& b) { return a.score > b.score; });
    PrCurve curve;
    curve.total_gt = total_gt;
    int tp = 0, fp = 0;
    for (const auto& e : entries) {
        (e.tp ? tp : fp) += 1;
        curve.points.emplace_back(static_cast<double>(tp) / total_gt,
                                  static_cast<double>(tp) / (tp + fp));
    }
    return curve;
}

double average_precision(const PrCurve& curve, ApMode mode) {
    if (curve.total_gt <= 0) {
        throw ContractError("average_precision: no ground truth");
    }
    const int samples = mode == ApMode::r11 ? 11 : 40;
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double r = mode == ApMode::r11 ? i / 10.0 : (i + 1) / 40.0;
        double best = 0.0;
        for (const auto& [recall, precision] : curve.points) {
            if (recall >= r - 1e-12) best = std::max(best, precision);
        }
        acc += best;
    }
    return acc / samples;
}

Box3D box3d_from_label(const kitti::ObjectLabel& label) {
    Box3D box;
    box.bev.cx = label.location[0];
    box.bev.cz = label.location[2];
    box.bev.length = label.dims_hwl[2];
    box.bev.width = label.dims_hwl[1];
    box.bev.yaw = label.rotation_y;
    box.y_bottom = label.location[1];
    box.height = label.dims_hwl[0];
    return box;
}

namespace {

bool iequals(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i]))) {
            return false;
        }
    }
    return true;
}

// Neighboring categories absorb detections without penalty.
bool is_neighbor_category(const std::string& target, const std::string& candidate) {
    if (iequals(target, "Car") && iequals(candidate, "Van")) return true;
    if (iequals(target, "Pedestrian") && iequals(candidate, "Person_sitting")) return true;
    return false;
}

bool within_difficulty(const kitti::ObjectLabel& label,
                       std::optional<kitti::Difficulty> difficulty) {
    if (!difficulty) return true;
    const auto d = kitti::difficulty_of(label);
    return static_cast<int>(d) <= static_cast<int>(*difficulty);
}

bool has_valid_box3d(const kitti::ObjectLabel& label) {
    return label.dims_hwl[0] > 0.0 && label.dims_hwl[1] > 0.0 && label.dims_hwl[2] > 0.0;
}

double label_iou(const kitti::ObjectLabel& a, const kitti::ObjectLabel& b, IouMetric metric) {
    if (metric == IouMetric::box3d) return iou_3d(box3d_from_label(a), box3d_from_label(b));
    const Box3D ba = box3d_from_label(a);
    const Box3D bb = box3d_from_label(b);
    return rotated_bev_iou(ba.bev, bb.bev);
}

}  // namespace

double evaluate_category(const FrameLabels& gt, const FrameLabels& det,
                         const std::string& category,
                         std::optional<kitti::Difficulty> difficulty, double iou_thresh,
                         IouMetric metric, ApMode mode) {
    if (category.empty()) throw ContractError("evaluate_category: empty category");

    std::vector<SweepEntry> entries;
    int total_gt = 0;

    for (const auto& [frame, gt_labels] : gt) {
        // Candidate ground truth: the category itself (counted when inside
        // the difficulty level) plus ignorable neighbors.
        struct GtSlot {
            const kitti::ObjectLabel* label;
            bool counted;
            bool matched = false;
        };
        std::vector<GtSlot> slots;
        for (const auto& g : gt_labels) {
            const bool same = iequals(g.category, category);
            const bool neighbor = is_neighbor_category(category, g.category);
            if (!same && !neighbor) continue;
            if (!has_valid_box3d(g)) continue;
            const bool counted = same && within_difficulty(g, difficulty);
            slots.push_back({&g, counted});
            if (counted) ++total_gt;
        }

        auto det_it = det.find(frame);
        if (det_it == det.end()) continue;
        std::vector<const kitti::ObjectLabel*> dets;
        for (const auto& d : det_it->second) {
            if (!iequals(d.category, category)) continue;
            if (!d.score) throw ContractError("detection without score in frame " + frame);
            dets.push_back(&d);
        }
        std::stable_sort(dets.begin(), dets.end(),
                         [](const kitti::ObjectLabel* a, const kitti::ObjectLabel* b) {
                             return *a->score > *b->score;
                         });

        for (const auto* d : dets) {
            int best = -1;
            double best_iou = -1.0;
            for (std::size_t i = 0; i < slots.size(); ++i) {
                if (slots[i].matched) continue;
                const double iou = label_iou(*d, *slots[i].label, metric);
                if (iou >= iou_thresh && iou > best_iou) {
                    best_iou = iou;
                    best = static_cast<int>(i);
                }
            }
            if (best < 0) {
                entries.push_back({*d->score, false});  // false positive
            } else {
                slots[best].matched = true;
                if (slots[best].counted) {
                    entries.push_back({*d->score, true});
                }
                // Matches to ignorable ground truth leave the sweep untouched.
            }
        }
    }

    if (total_gt == 0) {
        throw ContractError("evaluate_category: no '" + category + "' ground truth at this level");
    }
    if (entries.empty()) return 0.0;
    return average_precision(build_pr_curve(std::move(entries), total_gt), mode);
}

}  // namespace dfr::eval
