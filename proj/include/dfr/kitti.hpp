#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfr/errors.hpp"

namespace dfr::kitti {

/// Parse failure with the 1-based line it occurred on.
struct ParseError : std::runtime_error {
    ParseError(int line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line(line) {}
    int line;
};

/// One object record in devkit field order:
///   type trunc occ alpha bbox(4) dims(h w l) location(x y z) rotation_y [score]
struct ObjectLabel {
    std::string category;
    double truncation = 0.0;
    int occlusion = 0;                  // 0..3, or -1 for unknown
    double alpha = 0.0;                 // observation angle, -10 when invalid
    std::array<double, 4> box2d{};      // left, top, right, bottom (pixels)
    std::array<double, 3> dims_hwl{};   // height, width, length (meters)
    std::array<double, 3> location{};   // x, y, z in the camera frame
    double rotation_y = 0.0;
    std::optional<double> score;

    double box_height() const { return box2d[3] - box2d[1]; }
};

std::vector<ObjectLabel> parse_label_file(const std::string& text);

/// 16-field result lines; every label must carry a score.
std::string write_result_file(const std::vector<ObjectLabel>& labels);

/// Left color camera projection matrix (the "P2:" row), row-major 3x4.
struct CalibP2 {
    std::array<double, 12> p2{};
};

CalibP2 parse_calib_file(const std::string& text);
std::string write_calib_file(const CalibP2& calib);

/// Pinhole projection of a camera-frame point; z must be positive.
std::pair<double, double> project_center(const CalibP2& calib, const std::array<double, 3>& xyz);

/// Benchmark strata by 2D box height, occlusion and truncation. `ignored`
/// marks objects below even the hard bar. An object qualifies for its easiest
/// level and for every harder one.
enum class Difficulty { easy, moderate, hard, ignored };

std::string to_string(Difficulty d);

Difficulty difficulty_of(const ObjectLabel& label);

}  // namespace dfr::kitti
