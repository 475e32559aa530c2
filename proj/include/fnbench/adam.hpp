#pragma once

#include "fnbench/matrix.hpp"

#include <vector>

namespace fnbench {

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam. One first/second moment matrix per parameter,
/// shapes fixed at init; step_count advances by exactly 1 per step.
struct AdamState {
    AdamConfig cfg;
    long step_count = 0;
    std::vector<Matrix> m; // first moments
    std::vector<Matrix> v; // second moments

    static AdamState init(const std::vector<const Matrix*>& params, AdamConfig cfg);
};

/// In-place update of params from grads. Throws shape_error if the
/// parameter list or any shape disagrees with the state.
void adam_step(const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads, AdamState& state);

} // namespace fnbench
