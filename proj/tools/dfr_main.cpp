#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dfr/checkpoint.hpp"
#include "dfr/config.hpp"
#include "dfr/eval.hpp"
#include "dfr/gradcheck.hpp"
#include "dfr/kitti.hpp"
#include "dfr/toy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string canonical_category(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (name == "car") return "Car";
    if (name == "pedestrian") return "Pedestrian";
    if (name == "cyclist") return "Cyclist";
    throw dfr::ConfigError("unknown category '" + name + "' (car|pedestrian|cyclist)");
}

dfr::eval::FrameLabels load_label_dir(const fs::path& dir) {
    dfr::eval::FrameLabels frames;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        try {
            frames[file.stem().string()] = dfr::kitti::parse_label_file(read_file(file));
        } catch (const dfr::kitti::ParseError& e) {
            throw dfr::kitti::ParseError(e.line, file.string() + ": " + e.what());
        }
    }
    return frames;
}

int cmd_eval(const std::string& gt_dir, const std::string& det_dir, const std::string& category,
             double iou, dfr::eval::ApMode mode, const std::string& out_dir) {
    if (!fs::is_directory(gt_dir)) {
        std::cerr << "error: ground-truth directory '" << gt_dir << "' does not exist\n";
        return kExitUsage;
    }
    if (!fs::is_directory(det_dir)) {
        std::cerr << "error: detection directory '" << det_dir << "' does not exist\n";
        return kExitUsage;
    }
    dfr::eval::FrameLabels gt, det;
    try {
        gt = load_label_dir(gt_dir);
        det = load_label_dir(det_dir);
    } catch (const dfr::kitti::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }

    const std::string cat = canonical_category(category);
    const char* mode_name = mode == dfr::eval::ApMode::r11 ? "R11" : "R40";
    struct Row {
        const char* metric;
        dfr::eval::IouMetric m;
    };
    const Row rows[2] = {{"AP_3D", dfr::eval::IouMetric::box3d},
                         {"AP_BEV", dfr::eval::IouMetric::bev}};
    const std::pair<const char*, dfr::kitti::Difficulty> levels[3] = {
        {"easy", dfr::kitti::Difficulty::easy},
        {"moderate", dfr::kitti::Difficulty::moderate},
        {"hard", dfr::kitti::Difficulty::hard}};

    json summary = json::array();
    std::printf("%s %s IoU=%.2f (%s)\n", cat.c_str(), mode_name, iou, mode_name);
    std::printf("%-8s %10s %10s %10s\n", "metric", "easy", "moderate", "hard");
    for (const auto& row : rows) {
        std::printf("%-8s", row.metric);
        for (const auto& [level_name, level] : levels) {
            double ap = 0.0;
            bool have_gt = true;
            try {
                ap = dfr::eval::evaluate_category(gt, det, cat, level, iou, row.m, mode);
            } catch (const dfr::ContractError&) {
                have_gt = false;  // no ground truth at this level
            }
            if (have_gt) {
                std::printf(" %10.3f", ap);
                summary.push_back({{"category", cat},
                                   {"difficulty", level_name},
                                   {"metric", row.metric},
                                   {"mode", mode_name},
                                   {"ap", ap}});
            } else {
                std::printf(" %10s", "-");
            }
        }
        std::printf("\n");
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream out(fs::path(out_dir) / "metrics.json");
        out << summary.dump(2) << "\n";
    }
    return 0;
}

void write_history_csv(const fs::path& path, const std::vector<dfr::toy::HistoryRow>& history) {
    std::ofstream out(path);
    out << "step,l_v,l_s,s_v,s_s,total\n";
    char buf[160];
    for (const auto& row : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.step, row.l_v,
                      row.l_s, row.s_v, row.s_s, row.total);
        out << buf;
    }
}

int cmd_toy_train(const dfr::RunConfig& cfg, const std::string& out_dir) {
    dfr::toy::TrainResult result = dfr::toy::train(cfg.train);
    const fs::path out = out_dir.empty() ? fs::path("toy_out") : fs::path(out_dir);
    fs::create_directories(out);
    write_history_csv(out / "history.csv", result.history);
    dfr::ParameterSet params = result.detector.params(cfg.train);
    dfr::save_checkpoint((out / "checkpoint.bin").string(), params, cfg.to_text());
    const auto& last = result.history.back();
    std::printf("trained %d steps: l_v=%.4f l_s=%.4f s_v=%.3f s_s=%.3f total=%.4f\n",
                cfg.train.steps, last.l_v, last.l_s, last.s_v, last.s_s, last.total);
    std::printf("history: %s\ncheckpoint: %s\n", (out / "history.csv").c_str(),
                (out / "checkpoint.bin").c_str());
    return 0;
}

int cmd_ablate(const dfr::RunConfig& cfg, const std::string& sweep, const std::string& out_dir) {
    using dfr::toy::AblationVariant;
    std::vector<AblationVariant> variants;
    dfr::toy::TrainConfig base = cfg.train;
    if (sweep == "groups") {
        AblationVariant off{"I:base", base};
        off.cfg.use_alfr = false;
        off.cfg.use_dit = false;
        AblationVariant alfr_only{"IV:alfr", base};
        alfr_only.cfg.use_alfr = true;
        alfr_only.cfg.use_dit = false;
        AblationVariant full{"VII:alfr+dit", base};
        full.cfg.use_alfr = true;
        full.cfg.use_dit = true;
        variants = {off, alfr_only, full};
    } else if (sweep == "clustering") {
        using dfr::Stream;
        const std::pair<Stream, Stream> combos[4] = {
            {Stream::localization, Stream::localization},
            {Stream::localization, Stream::appearance},
            {Stream::appearance, Stream::localization},
            {Stream::appearance, Stream::appearance}};
        for (const auto& [rot, whl] : combos) {
            AblationVariant v{"rot=" + to_string(rot) + ",whl=" + to_string(whl), base};
            v.cfg.clustering = {rot, whl};
            variants.push_back(v);
        }
    } else if (sweep == "flow") {
        for (auto flow : {dfr::FlowMode::none, dfr::FlowMode::app_to_loc,
                          dfr::FlowMode::loc_to_app, dfr::FlowMode::both}) {
            AblationVariant v{"flow=" + to_string(flow), base};
            v.cfg.flow = flow;
            variants.push_back(v);
        }
    } else if (sweep == "dit") {
        {
            AblationVariant v{"dit=off", base};
            v.cfg.use_dit = false;
            variants.push_back(v);
        }
        for (auto variant : {dfr::DitVariant::init, dfr::DitVariant::cross,
                             dfr::DitVariant::shared, dfr::DitVariant::learned}) {
            AblationVariant v{"dit=" + to_string(variant), base};
            v.cfg.use_dit = true;
            v.cfg.dit_variant = variant;
            variants.push_back(v);
        }
    } else {
        std::cerr << "error: unknown sweep '" << sweep
                  << "' (groups|clustering|flow|dit)\n";
        return kExitUsage;
    }

    auto rows = dfr::toy::ablate(variants, cfg.ablate_seeds, cfg.ablate_scenes, cfg.ablate_iou);
    std::printf("%-24s %10s %10s  per-seed AP_3D\n", "variant", "mean", "std");
    json jrows = json::array();
    for (const auto& row : rows) {
        std::printf("%-24s %10.4f %10.4f ", row.name.c_str(), row.mean, row.stddev);
        for (double ap : row.seed_ap) std::printf(" %.4f", ap);
        std::printf("\n");
        jrows.push_back({{"variant", row.name},
                         {"mean", row.mean},
                         {"std", row.stddev},
                         {"seed_ap", row.seed_ap}});
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream out(fs::path(out_dir) / "ablation.json");
        out << jrows.dump(2) << "\n";
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& corrupt_op) {
    const auto t0 = std::chrono::steady_clock::now();
    dfr::GradcheckReport report = dfr::run_gradcheck(seed, 20, corrupt_op);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    for (const auto& op : report.ops) {
        std::printf("%-16s worst_rel_err=%.3e  %s\n", op.op.c_str(), op.worst_err,
                    op.pass ? "ok" : "FAIL");
    }
    std::printf("%zu ops in %lld ms: %s\n", report.ops.size(), static_cast<long long>(ms),
                report.all_pass ? "all within tolerance" : "TOLERANCE BREACH");
    if (!report.all_pass) {
        for (const auto& op : report.ops) {
            if (!op.pass) std::printf("offending op: %s\n", op.op.c_str());
        }
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-reflecting detection head: training, evaluation and self-checks"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::string gt_dir, det_dir, category = "car", mode_str, sweep = "groups", corrupt_op;
    double iou = -1.0;
    std::optional<std::int64_t> seed_flag;

    auto* eval_cmd = app.add_subcommand("eval", "KITTI-protocol AP over label directories");
    eval_cmd->add_option("--gt", gt_dir, "ground-truth label directory")->required();
    eval_cmd->add_option("--det", det_dir, "detection label directory")->required();
    eval_cmd->add_option("--category", category, "car|pedestrian|cyclist");
    eval_cmd->add_option("--iou", iou, "IoU threshold (default 0.7 car, 0.5 otherwise)");
    eval_cmd->add_option("--mode", mode_str, "r11|r40 (default r40)");
    eval_cmd->add_option("--config", config_path, "config file");
    eval_cmd->add_option("--out", out_dir, "output directory for metrics.json");

    auto* train_cmd = app.add_subcommand("toy-train", "train the synthetic-task detector");
    train_cmd->add_option("--config", config_path, "config file");
    train_cmd->add_option("--seed", seed_flag, "override train.seed");
    train_cmd->add_option("--out", out_dir, "output directory (default toy_out)");

    auto* ablate_cmd = app.add_subcommand("ablate", "train and compare variant configurations");
    ablate_cmd->add_option("--config", config_path, "config file");
    ablate_cmd->add_option("--sweep", sweep, "groups|clustering|flow|dit");
    ablate_cmd->add_option("--seed", seed_flag, "override train.seed");
    ablate_cmd->add_option("--out", out_dir, "output directory for ablation.json");

    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference audit of every op");
    grad_cmd->add_option("--seed", seed_flag, "RNG seed");
    grad_cmd->add_option("--corrupt", corrupt_op,
                         "test hook: corrupt this op's gradient (expect exit 1)");

    CLI11_PARSE(app, argc, argv);

    try {
        dfr::RunConfig cfg;
        if (!config_path.empty()) cfg = dfr::RunConfig::from_file(config_path);
        if (seed_flag) cfg.train.seed = static_cast<std::uint64_t>(*seed_flag);

        if (eval_cmd->parsed()) {
            if (!gt_dir.empty()) cfg.eval_gt = gt_dir;
            if (!det_dir.empty()) cfg.eval_det = det_dir;
            if (!category.empty()) cfg.eval_category = category;
            if (iou > 0.0) cfg.eval_iou = iou;
            if (!mode_str.empty()) cfg.eval_mode = dfr::eval::ap_mode_from_string(mode_str);
            if (iou <= 0.0) {
                cfg.eval_iou = canonical_category(cfg.eval_category) == "Car" ? 0.7 : 0.5;
            }
            return cmd_eval(cfg.eval_gt, cfg.eval_det, cfg.eval_category, cfg.eval_iou,
                            cfg.eval_mode, out_dir);
        }
        if (train_cmd->parsed()) return cmd_toy_train(cfg, out_dir);
        if (ablate_cmd->parsed()) return cmd_ablate(cfg, sweep, out_dir);
        if (grad_cmd->parsed()) {
            return cmd_gradcheck(seed_flag ? static_cast<std::uint64_t>(*seed_flag) : 7, corrupt_op);
        }
    } catch (const dfr::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const dfr::kitti::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
