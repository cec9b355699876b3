#pragma once

#include <string>
#include <vector>

#include "dfr/optim.hpp"
#include "dfr/tensor.hpp"

namespace dfr {

/// Versioned binary container of named f64 tensors plus a config snapshot.
/// save followed by load reproduces every value bitwise.
struct Checkpoint {
    std::uint32_t version = 1;
    std::string config_text;
    std::vector<Parameter> entries;

    /// Copy stored values into matching parameters; shapes must agree and
    /// every stored name must exist in the set.
    void apply_to(ParameterSet& params) const;
};

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::string& config_text);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace dfr
