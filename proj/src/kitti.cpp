#include "dfr/kitti.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dfr::kitti {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream in(line);
    std::string field;
    while (in >> field) fields.push_back(field);
    return fields;
}

double parse_num(const std::string& field, int line, const char* what) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw ParseError(line, std::string("non-numeric ") + what + " '" + field + "'");
    }
    return value;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::vector<ObjectLabel> parse_label_file(const std::string& text) {
    std::vector<ObjectLabel> labels;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (fields.size() != 15 && fields.size() != 16) {
            throw ParseError(line_no, "expected 15 or 16 fields, found " +
                                          std::to_string(fields.size()));
        }
        ObjectLabel label;
        label.category = fields[0];
        label.truncation = parse_num(fields[1], line_no, "truncation");
        const double occ = parse_num(fields[2], line_no, "occlusion");
        label.occlusion = static_cast<int>(std::lround(occ));
        label.alpha = parse_num(fields[3], line_no, "alpha");
        for (int i = 0; i < 4; ++i) label.box2d[i] = parse_num(fields[4 + i], line_no, "bbox");
        for (int i = 0; i < 3; ++i) label.dims_hwl[i] = parse_num(fields[8 + i], line_no, "dims");
        for (int i = 0; i < 3; ++i) label.location[i] = parse_num(fields[11 + i], line_no, "location");
        label.rotation_y = parse_num(fields[14], line_no, "rotation_y");
        if (fields.size() == 16) label.score = parse_num(fields[15], line_no, "score");
        labels.push_back(std::move(label));
    }
    return labels;
}

std::string write_result_file(const std::vector<ObjectLabel>& labels) {
    std::string out;
    for (const auto& label : labels) {
        if (!label.score) {
            throw dfr::ContractError("result label '" + label.category + "' has no score");
        }
        out += label.category;
        out += ' ';
        out += fmt(label.truncation);
        out += ' ';
        out += std::to_string(label.occlusion);
        out += ' ';
        out += fmt(label.alpha);
        for (double v : label.box2d) {
            out += ' ';
            out += fmt(v);
        }
        for (double v : label.dims_hwl) {
            out += ' ';
            out += fmt(v);
        }
        for (double v : label.location) {
            out += ' ';
            out += fmt(v);
        }
        out += ' ';
        out += fmt(label.rotation_y);
        out += ' ';
        out += fmt(*label.score);
        out += '\n';
    }
    return out;
}

CalibP2 parse_calib_file(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = split_ws(line);
        if (fields.empty()) continue;
        // The key may appear as "P2:" or "P2" followed by 12 numbers.
        std::string key = fields[0];
        if (!key.empty() && key.back() == ':') key.pop_back();
        if (key != "P2") continue;
        if (fields.size() != 13) {
            throw ParseError(line_no, "P2 needs 12 numbers, found " +
                                          std::to_string(fields.size() - 1));
        }
        CalibP2 calib;
        for (int i = 0; i < 12; ++i) calib.p2[i] = parse_num(fields[1 + i], line_no, "P2 entry");
        return calib;
    }
    throw ParseError(line_no == 0 ? 1 : line_no, "no P2 line found");
}

std::string write_calib_file(const CalibP2& calib) {
    std::string out = "P2:";
    char buf[40];
    for (double v : calib.p2) {
        std::snprintf(buf, sizeof(buf), " %.12e", v);
        out += buf;
    }
    out += '\n';
    return out;
}

std::pair<double, double> project_center(const CalibP2& calib, const std::array<double, 3>& xyz) {
    if (!(xyz[2] > 0.0)) {
        throw dfr::DomainError("project_center: point behind camera, z=" + std::to_string(xyz[2]));
    }
    const double hom[4] = {xyz[0], xyz[1], xyz[2], 1.0};
    double row[3];
    for (int r = 0; r < 3; ++r) {
        double acc = 0.0;
        for (int c = 0; c < 4; ++c) acc += calib.p2[r * 4 + c] * hom[c];
        row[r] = acc;
    }
    return {row[0] / row[2], row[1] / row[2]};
}

std::string to_string(Difficulty d) {
    switch (d) {
        case Difficulty::easy: return "easy";
        case Difficulty::moderate: return "moderate";
        case Difficulty::hard: return "hard";
        case Difficulty::ignored: return "ignored";
    }
    return "?";
}

Difficulty difficulty_of(const ObjectLabel& label) {
    const double height = label.box_height();
    if (height >= 40.0 && label.occlusion <= 0 && label.truncation <= 0.15) {
        return Difficulty::easy;
    }
    if (height >= 25.0 && label.occlusion <= 1 && label.truncation <= 0.30) {
        return Difficulty::moderate;
    }
    if (height >= 25.0 && label.occlusion <= 2 && label.truncation <= 0.50) {
        return Difficulty::hard;
    }
    return Difficulty::ignored;
}

}  // namespace dfr::kitti
