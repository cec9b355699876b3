#pragma once

#include <string>

#include "dfr/eval.hpp"
#include "dfr/toy.hpp"

namespace dfr {

/// Flat dotted-key configuration. Every key has a default; unknown keys are
/// rejected. Files hold `key = value` lines with `#` comments; command-line
/// flags override file values.
struct RunConfig {
    toy::TrainConfig train;

    int ablate_seeds = 5;
    int ablate_scenes = 200;
    double ablate_iou = 0.5;

    std::string eval_gt;
    std::string eval_det;
    std::string eval_category = "car";
    double eval_iou = 0.7;
    eval::ApMode eval_mode = eval::ApMode::r40;

    /// Apply one `key = value` assignment; throws ConfigError on unknown
    /// keys or unparsable values.
    void set(const std::string& key, const std::string& value);

    static RunConfig from_text(const std::string& text);
    static RunConfig from_file(const std::string& path);

    /// Canonical `key = value` dump of every key (the checkpoint snapshot).
    std::string to_text() const;
};

}  // namespace dfr
