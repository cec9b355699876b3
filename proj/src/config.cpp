#include "dfr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dfr {

namespace {

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    }
    return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "train.steps") {
        train.steps = static_cast<int>(parse_int(key, value));
    } else if (key == "train.lr") {
        train.lr = parse_double(key, value);
    } else if (key == "train.momentum") {
        train.momentum = parse_double(key, value);
    } else if (key == "train.weight_decay") {
        train.weight_decay = parse_double(key, value);
    } else if (key == "train.seed") {
        train.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "alfr.enabled") {
        train.use_alfr = parse_bool(key, value);
    } else if (key == "alfr.flow") {
        train.flow = flow_from_string(value);
    } else if (key == "alfr.reduction") {
        train.reduction = static_cast<int>(parse_int(key, value));
    } else if (key == "dit.enabled") {
        train.use_dit = parse_bool(key, value);
    } else if (key == "dit.variant") {
        train.dit_variant = dit_variant_from_string(value);
    } else if (key == "tasks.rot_stream") {
        train.clustering.rot_stream = stream_from_string(value);
    } else if (key == "tasks.whl_stream") {
        train.clustering.whl_stream = stream_from_string(value);
    } else if (key == "loss.appearance_scale") {
        train.appearance_loss_scale = parse_double(key, value);
    } else if (key == "ablate.seeds") {
        ablate_seeds = static_cast<int>(parse_int(key, value));
    } else if (key == "ablate.scenes") {
        ablate_scenes = static_cast<int>(parse_int(key, value));
    } else if (key == "ablate.iou") {
        ablate_iou = parse_double(key, value);
    } else if (key == "eval.gt") {
        eval_gt = value;
    } else if (key == "eval.det") {
        eval_det = value;
    } else if (key == "eval.category") {
        eval_category = value;
    } else if (key == "eval.iou") {
        eval_iou = parse_double(key, value);
    } else if (key == "eval.mode") {
        eval_mode = eval::ap_mode_from_string(value);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

std::string RunConfig::to_text() const {
    std::ostringstream out;
    out << "train.steps = " << train.steps << "\n";
    out << "train.lr = " << train.lr << "\n";
    out << "train.momentum = " << train.momentum << "\n";
    out << "train.weight_decay = " << train.weight_decay << "\n";
    out << "train.seed = " << train.seed << "\n";
    out << "alfr.enabled = " << (train.use_alfr ? "true" : "false") << "\n";
    out << "alfr.flow = " << to_string(train.flow) << "\n";
    out << "alfr.reduction = " << train.reduction << "\n";
    out << "dit.enabled = " << (train.use_dit ? "true" : "false") << "\n";
    out << "dit.variant = " << to_string(train.dit_variant) << "\n";
    out << "tasks.rot_stream = " << to_string(train.clustering.rot_stream) << "\n";
    out << "tasks.whl_stream = " << to_string(train.clustering.whl_stream) << "\n";
    out << "loss.appearance_scale = " << train.appearance_loss_scale << "\n";
    out << "ablate.seeds = " << ablate_seeds << "\n";
    out << "ablate.scenes = " << ablate_scenes << "\n";
    out << "ablate.iou = " << ablate_iou << "\n";
    out << "eval.gt = " << eval_gt << "\n";
    out << "eval.det = " << eval_det << "\n";
    out << "eval.category = " << eval_category << "\n";
    out << "eval.iou = " << eval_iou << "\n";
    out << "eval.mode = " << (eval_mode == eval::ApMode::r11 ? "r11" : "r40") << "\n";
    return out.str();
}

}  // namespace dfr
