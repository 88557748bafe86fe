#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "encscan/tensor.hpp"

namespace encscan {

struct ImageGeom {
    int64_t height = 16;
    int64_t width = 16;
    int64_t channels = 1;
    int64_t dim() const { return height * width * channels; }
    bool operator==(const ImageGeom&) const = default;
};

// A set of flattened images in [0,1], one per row, with optional labels.
struct SampleSet {
    ImageGeom geom;
    Tensor samples;  // [n x geom.dim()]
    std::optional<std::vector<int32_t>> labels;

    int64_t count() const { return samples.shape.empty() ? 0 : samples.rows(); }
    bool labeled() const { return labels.has_value(); }

    void validate() const {
        if (samples.shape.size() != 2 || samples.cols() != geom.dim())
            throw ContractError("sample set shape " + shape_str(samples.shape) +
                                " does not match geometry dim " + std::to_string(geom.dim()));
        if (labels && static_cast<int64_t>(labels->size()) != count())
            throw ContractError("sample set has " + std::to_string(count()) + " samples but " +
                                std::to_string(labels->size()) + " labels");
    }
};

}  // namespace encscan
