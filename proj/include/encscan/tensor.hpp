#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "encscan/common.hpp"

namespace encscan {

int64_t shape_size(const std::vector<int64_t>& shape);
std::string shape_str(const std::vector<int64_t>& shape);

// Dense row-major float32 tensor. Mostly used as [n x d] matrices and flat
// vectors. Reductions over tensor data accumulate in double everywhere in
// this codebase; the stored values stay float32.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, float value);
    static Tensor from(std::vector<int64_t> shape, std::vector<float> values);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    bool empty() const { return data.empty(); }

    // 2-D accessors; throw on rank mismatch so shape bugs fail loudly.
    int64_t rows() const;
    int64_t cols() const;
    float& at(int64_t i, int64_t j);
    float at(int64_t i, int64_t j) const;
    const float* row(int64_t i) const;
    float* row(int64_t i);

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

}  // namespace encscan
