#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dfr {

struct OpCheckResult {
    std::string op;
    double worst_err = 0.0;  // worst relative error (absolute below 1e-6 counts as 0)
    bool pass = true;
};

struct GradcheckReport {
    std::vector<OpCheckResult> ops;
    bool all_pass = true;
};

/// Compare reverse-mode gradients against central finite differences
/// (h = 1e-4) for every registered differentiable operation, on
/// trials_per_op random inputs each. `corrupt_op` perturbs that op's
/// analytic gradient before comparison, as a negative control.
GradcheckReport run_gradcheck(std::uint64_t seed, int trials_per_op = 20,
                              const std::string& corrupt_op = "");

/// Names of all registered ops, in report order.
std::vector<std::string> gradcheck_op_names();

}  // namespace dfr
