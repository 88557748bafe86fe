#include "encscan/tensor.hpp"

#include <cmath>
#include <sstream>

namespace encscan {

int64_t shape_size(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw ContractError("tensor shape has negative extent " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? " x " : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    Tensor t;
    int64_t n = shape_size(shape);
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), 0.0f);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t = zeros(std::move(shape));
    for (float& v : t.data) v = value;
    return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<float> values) {
    if (shape_size(shape) != static_cast<int64_t>(values.size()))
        throw ContractError("tensor data length " + std::to_string(values.size()) +
                            " does not match shape " + shape_str(shape));
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

int64_t Tensor::rows() const {
    if (shape.size() != 2) throw ContractError("rows(): tensor is not 2-D, shape " + shape_str(shape));
    return shape[0];
}

int64_t Tensor::cols() const {
    if (shape.size() != 2) throw ContractError("cols(): tensor is not 2-D, shape " + shape_str(shape));
    return shape[1];
}

float& Tensor::at(int64_t i, int64_t j) {
    return data[static_cast<size_t>(i * cols() + j)];
}

float Tensor::at(int64_t i, int64_t j) const {
    return data[static_cast<size_t>(i * cols() + j)];
}

const float* Tensor::row(int64_t i) const { return data.data() + i * cols(); }
float* Tensor::row(int64_t i) { return data.data() + i * cols(); }

bool Tensor::all_finite() const {
    for (float v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace encscan
