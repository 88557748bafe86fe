#include "encscan/optimizer.hpp"

#include <cmath>

namespace encscan {

void OptimizerState::step(const std::vector<ParamRef>& params) {
    if (slot1.empty()) {
        for (const ParamRef& p : params) {
            slot1.push_back(Tensor::zeros(p.value->shape));
            if (cfg.kind == OptKind::adam) slot2.push_back(Tensor::zeros(p.value->shape));
        }
    }
    if (slot1.size() != params.size())
        throw ContractError("optimizer step: parameter list length changed from " +
                            std::to_string(slot1.size()) + " to " + std::to_string(params.size()));
    ++step_count;

    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& value = *params[pi].value;
        const Tensor& grad = *params[pi].grad;
        if (!value.same_shape(grad))
            throw ContractError("optimizer step: grad shape " + shape_str(grad.shape) +
                                " does not match parameter " + params[pi].path + " " +
                                shape_str(value.shape));
        for (size_t i = 0; i < value.data.size(); ++i) {
            double g = grad.data[i];
            if (!std::isfinite(g))
                throw NonFiniteError("non-finite gradient in " + params[pi].path, params[pi].path);
            double updated;
            if (cfg.kind == OptKind::sgd_momentum) {
                double v = cfg.momentum * slot1[pi].data[i] + g;
                slot1[pi].data[i] = static_cast<float>(v);
                updated = value.data[i] - cfg.lr * v;
            } else {
                double m = cfg.beta1 * slot1[pi].data[i] + (1.0 - cfg.beta1) * g;
                double v = cfg.beta2 * slot2[pi].data[i] + (1.0 - cfg.beta2) * g * g;
                slot1[pi].data[i] = static_cast<float>(m);
                slot2[pi].data[i] = static_cast<float>(v);
                double mhat = m / (1.0 - std::pow(cfg.beta1, static_cast<double>(step_count)));
                double vhat = v / (1.0 - std::pow(cfg.beta2, static_cast<double>(step_count)));
                updated = value.data[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
            if (!std::isfinite(updated))
                throw NonFiniteError("update produced non-finite value in " + params[pi].path,
                                     params[pi].path);
            value.data[i] = static_cast<float>(updated);
        }
    }
}

}  // namespace encscan
