#pragma once

#include <string>
#include <vector>

#include "encscan/tensor.hpp"

namespace encscan {

enum class OptKind : uint8_t { sgd_momentum = 0, adam = 1 };

struct OptimizerConfig {
    OptKind kind = OptKind::adam;
    double lr = 1e-2;
    double momentum = 0.9;  // sgd_momentum only
    double beta1 = 0.9;     // adam
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct ParamRef {
    Tensor* value;
    const Tensor* grad;
    std::string path;  // e.g. "layer0.weight"; reported on non-finite failures
};

// Holds per-parameter slots (velocity for sgd_momentum; first/second moment
// for adam). Slots are shaped lazily on the first step; the parameter list
// must then keep its length and shapes across steps.
struct OptimizerState {
    OptimizerConfig cfg;
    int64_t step_count = 0;
    std::vector<Tensor> slot1, slot2;

    explicit OptimizerState(OptimizerConfig c = {}) : cfg(c) {}

    // Applies one update in place. Throws NonFiniteError (naming the
    // parameter path) if a gradient or an updated value is not finite.
    void step(const std::vector<ParamRef>& params);
};

}  // namespace encscan
