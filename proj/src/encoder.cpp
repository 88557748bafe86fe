#include "encscan/encoder.hpp"

#include <cmath>

#include "encscan/kernels.hpp"

namespace encscan {

namespace {

// Forward pass with every intermediate kept for the backward sweep.
struct ForwardTrace {
    std::vector<Tensor> acts;   // acts[0] = input, acts[l+1] = output of layer l (post-activation)
    Tensor prenorm;             // last linear output, before optional normalization
    std::vector<double> norms;  // per-row L2 norm of prenorm (empty when not normalizing)
    Tensor out;
};

void add_bias_inplace(Tensor& z, const Tensor& bias) {
    int64_t n = z.rows(), m = z.cols();
    for (int64_t i = 0; i < n; ++i) {
        float* r = z.row(i);
        for (int64_t j = 0; j < m; ++j) r[j] += bias.data[static_cast<size_t>(j)];
    }
}

void activate_inplace(Tensor& z, Activation act) {
    if (act == Activation::relu) {
        for (float& v : z.data) v = v > 0.0f ? v : 0.0f;
    } else {
        for (float& v : z.data) v = std::tanh(v);
    }
}

ForwardTrace run_forward(const EncoderNet& net, const Tensor& batch) {
    ForwardTrace tr;
    int64_t n = batch.rows();
    tr.acts.reserve(net.layer_count() + 1);
    tr.acts.push_back(batch);
    for (size_t l = 0; l < net.layer_count(); ++l) {
        const Tensor& w = net.weights[l];
        Tensor z = Tensor::zeros({n, w.rows()});
        if (n > 0)
            kern::gemm_nt(tr.acts[l].data.data(), n, w.cols(), w.data.data(), w.rows(), z.data.data());
        add_bias_inplace(z, net.biases[l]);
        if (l + 1 < net.layer_count()) activate_inplace(z, net.activation);
        tr.acts.push_back(std::move(z));
    }
    tr.prenorm = tr.acts.back();
    if (net.normalize_output) {
        tr.norms.resize(static_cast<size_t>(n));
        Tensor y = tr.prenorm;
        int64_t d = y.cols();
        for (int64_t i = 0; i < n; ++i) {
            double acc = 0.0;
            const float* r = tr.prenorm.row(i);
            for (int64_t j = 0; j < d; ++j) acc += static_cast<double>(r[j]) * r[j];
            double nrm = std::sqrt(acc);
            tr.norms[static_cast<size_t>(i)] = nrm;
            if (nrm > 0.0) {
                float* o = y.row(i);
                for (int64_t j = 0; j < d; ++j) o[j] = static_cast<float>(r[j] / nrm);
            }
            // nrm == 0: the row stays zero. Degenerate, but only reachable
            // from an exactly-zero pre-normalization embedding.
        }
        tr.out = std::move(y);
    } else {
        tr.out = tr.prenorm;
    }
    return tr;
}

}  // namespace

EncoderNet EncoderNet::random_init(const std::vector<int64_t>& dims, Activation act,
                                   bool normalize, RngStream& rng) {
    if (dims.size() < 2) throw ContractError("random_init: need at least input and embedding dims");
    for (int64_t d : dims)
        if (d < 1) throw ContractError("random_init: layer dims must be >= 1, got " + shape_str(dims));
    EncoderNet net;
    net.layer_dims = dims;
    net.activation = act;
    net.normalize_output = normalize;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        int64_t fan_in = dims[l], fan_out = dims[l + 1];
        double scale = act == Activation::relu ? std::sqrt(2.0 / static_cast<double>(fan_in))
                                               : std::sqrt(1.0 / static_cast<double>(fan_in));
        Tensor w = Tensor::zeros({fan_out, fan_in});
        for (float& v : w.data) v = static_cast<float>(rng.next_normal(scale));
        net.weights.push_back(std::move(w));
        net.biases.push_back(Tensor::zeros({fan_out}));
    }
    return net;
}

void EncoderNet::validate() const {
    if (layer_dims.size() < 2) throw ContractError("encoder has no layers");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
        throw ContractError("encoder layer bookkeeping mismatch");
    for (size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].shape != std::vector<int64_t>{layer_dims[l + 1], layer_dims[l]})
            throw ContractError("encoder weight " + std::to_string(l) + " has shape " +
                                shape_str(weights[l].shape) + ", expected [" +
                                std::to_string(layer_dims[l + 1]) + " x " + std::to_string(layer_dims[l]) + "]");
        if (weights[l].shape.size() != 2 || biases[l].size() != layer_dims[l + 1])
            throw ContractError("encoder bias " + std::to_string(l) + " has length " +
                                std::to_string(biases[l].size()) + ", expected " +
                                std::to_string(layer_dims[l + 1]));
    }
}

Tensor EncoderNet::forward(const Tensor& batch) const {
    validate();
    if (batch.shape.size() != 2 || batch.cols() != input_dim())
        throw ContractError("forward: batch shape " + shape_str(batch.shape) +
                            " does not match encoder input dim " + std::to_string(input_dim()));
    return run_forward(*this, batch).out;
}

void EncoderNet::backward(const Tensor& batch, const Tensor& upstream,
                          Tensor* dinput, ParamGrads* dparams) const {
    validate();
    if (batch.shape.size() != 2 || batch.cols() != input_dim())
        throw ContractError("backward: batch shape " + shape_str(batch.shape) +
                            " does not match encoder input dim " + std::to_string(input_dim()));
    if (upstream.shape != std::vector<int64_t>{batch.rows(), embedding_dim()})
        throw ContractError("backward: upstream shape " + shape_str(upstream.shape) +
                            " does not match [" + std::to_string(batch.rows()) + " x " +
                            std::to_string(embedding_dim()) + "]");

    ForwardTrace tr = run_forward(*this, batch);
    int64_t n = batch.rows();

    // Gradient through the optional row normalization y = z / |z|:
    // dz = (g - y (y . g)) / |z|.
    Tensor delta = upstream;
    if (normalize_output) {
        int64_t d = embedding_dim();
        for (int64_t i = 0; i < n; ++i) {
            double nrm = tr.norms[static_cast<size_t>(i)];
            float* dr = delta.row(i);
            if (nrm == 0.0) {
                for (int64_t j = 0; j < d; ++j) dr[j] = 0.0f;
                continue;
            }
            const float* y = tr.out.row(i);
            double ydotg = 0.0;
            for (int64_t j = 0; j < d; ++j) ydotg += static_cast<double>(y[j]) * dr[j];
            for (int64_t j = 0; j < d; ++j)
                dr[j] = static_cast<float>((static_cast<double>(dr[j]) - y[j] * ydotg) / nrm);
        }
    }

    if (dparams) {
        dparams->dweights.assign(weights.size(), Tensor());
        dparams->dbiases.assign(weights.size(), Tensor());
    }

    for (size_t l = layer_count(); l-- > 0;) {
        const Tensor& w = weights[l];
        const Tensor& input = tr.acts[l];
        if (dparams) {
            Tensor dw = Tensor::zeros(w.shape);
            if (n > 0)
                kern::gemm_tn(delta.data.data(), n, w.rows(), input.data.data(), w.cols(), dw.data.data());
            Tensor db = Tensor::zeros({w.rows()});
            for (int64_t i = 0; i < n; ++i) {
                const float* dr = delta.row(i);
                for (int64_t j = 0; j < w.rows(); ++j)
                    db.data[static_cast<size_t>(j)] += dr[j];
            }
            dparams->dweights[l] = std::move(dw);
            dparams->dbiases[l] = std::move(db);
        }
        if (l == 0 && !dinput) break;
        Tensor dx = Tensor::zeros({n, w.cols()});
        if (n > 0)
            kern::gemm_nn(delta.data.data(), n, w.rows(), w.data.data(), w.cols(), dx.data.data());
        if (l > 0) {
            // Chain through the activation of the previous layer.
            const Tensor& a = tr.acts[l];  // post-activation output of layer l-1
            if (activation == Activation::relu) {
                for (size_t i = 0; i < dx.data.size(); ++i)
                    if (a.data[i] <= 0.0f) dx.data[i] = 0.0f;
            } else {
                for (size_t i = 0; i < dx.data.size(); ++i) {
                    double t = a.data[i];
                    dx.data[i] = static_cast<float>(dx.data[i] * (1.0 - t * t));
                }
            }
        }
        delta = std::move(dx);
    }
    if (dinput) *dinput = std::move(delta);
}

Tensor EncoderNet::grad_wrt_input(const Tensor& batch, const Tensor& upstream) const {
    Tensor dx;
    backward(batch, upstream, &dx, nullptr);
    return dx;
}

ParamGrads EncoderNet::grad_wrt_params(const Tensor& batch, const Tensor& upstream) const {
    ParamGrads pg;
    backward(batch, upstream, nullptr, &pg);
    return pg;
}

double cosine_similarity(const float* u, const float* v, int64_t d) {
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (int64_t i = 0; i < d; ++i) {
        uv += static_cast<double>(u[i]) * v[i];
        uu += static_cast<double>(u[i]) * u[i];
        vv += static_cast<double>(v[i]) * v[i];
    }
    if (uu == 0.0 || vv == 0.0)
        throw DegenerateInputError("cosine_similarity: zero vector has no direction");
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

double cosine_similarity(const Tensor& u, const Tensor& v) {
    if (!u.same_shape(v))
        throw ContractError("cosine_similarity: shapes " + shape_str(u.shape) + " vs " +
                            shape_str(v.shape));
    return cosine_similarity(u.data.data(), v.data.data(), u.size());
}

}  // namespace encscan
