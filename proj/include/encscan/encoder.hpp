#pragma once

#include <cstdint>
#include <vector>

#include "encscan/rng.hpp"
#include "encscan/tensor.hpp"

namespace encscan {

enum class Activation : uint8_t { relu = 0, tanh_fn = 1 };

struct ParamGrads {
    std::vector<Tensor> dweights;
    std::vector<Tensor> dbiases;
};

// Small fully connected encoder: input -> hidden... -> embedding. Hidden
// layers apply the activation, the output layer is linear, and the final
// embedding is optionally L2-normalized per row. Weights for layer l are
// stored [dims[l+1] x dims[l]], row-major; forward computes x W^T + b.
struct EncoderNet {
    std::vector<int64_t> layer_dims;  // input, hidden ..., embedding
    std::vector<Tensor> weights;
    std::vector<Tensor> biases;
    Activation activation = Activation::relu;
    bool normalize_output = true;

    // Scaled Gaussian init (sqrt(2/fan_in) for relu, sqrt(1/fan_in) for tanh),
    // zero biases. Deterministic in the stream.
    static EncoderNet random_init(const std::vector<int64_t>& dims, Activation act,
                                  bool normalize, RngStream& rng);

    int64_t input_dim() const { return layer_dims.front(); }
    int64_t embedding_dim() const { return layer_dims.back(); }
    size_t layer_count() const { return weights.size(); }

    // batch: [n x input_dim] -> [n x embedding_dim]. An empty batch (n = 0)
    // passes through as an empty result.
    Tensor forward(const Tensor& batch) const;

    // Exact reverse-mode gradients of sum(upstream . forward(batch)).
    // upstream: [n x embedding_dim].
    Tensor grad_wrt_input(const Tensor& batch, const Tensor& upstream) const;
    ParamGrads grad_wrt_params(const Tensor& batch, const Tensor& upstream) const;
    void backward(const Tensor& batch, const Tensor& upstream,
                  Tensor* dinput, ParamGrads* dparams) const;

    void validate() const;  // shape consistency; throws ContractError
};

// cos(u, v) = u.v / (|u| |v|), accumulated in double.
// Throws DegenerateInputError when either vector has zero norm.
double cosine_similarity(const float* u, const float* v, int64_t d);
double cosine_similarity(const Tensor& u, const Tensor& v);

}  // namespace encscan
