#pragma once

#include <cstdint>
#include <vector>

#include "encscan/encoder.hpp"
#include "encscan/optimizer.hpp"
#include "encscan/rng.hpp"

namespace encscan::invert {

// A candidate trigger is parameterized by unconstrained logits; the blend
// mask m and the pattern delta are their logistic squashes, so both always
// stay strictly inside (0, 1).
struct TriggerParams {
    Tensor mask_logits;   // [d]
    Tensor delta_logits;  // [d]
    Tensor mask() const;
    Tensor delta() const;
};

// Both logit tensors start ~ Normal(0, 0.1): mask and values open at 0.5,
// and the penalty schedule decides how much of the blend survives.
TriggerParams init_trigger_params(int64_t dim, RngStream& rng);

// Blend x toward delta under mask m, elementwise: (1 - m) * x + m * delta.
// Accepts a [n x d] batch or a flat [d] sample; m and delta are [d].
Tensor apply_trigger(const Tensor& x, const Tensor& mask, const Tensor& delta);

enum class Variant : uint8_t { size_oriented = 0, norm_oriented = 1 };

const char* variant_name(Variant v);

// Penalty-weight schedule, adjusted from the per-step attack rate (fraction
// of the batch whose triggered representation reaches cosine >= tau_sim with
// its anchor). `patience` consecutive successful steps multiply lambda by
// `multiplier` (capped); the same count of failures divides it (floored).
struct SchedulerConfig {
    double tau_sim = 0.9;
    double rate_threshold = 0.5;  // a step succeeds when attack_rate >= this
    int patience = 5;
    double multiplier = 1.5;
    double lambda_floor = 1e-8;
    double lambda_cap = 1e2;
};

struct LambdaScheduler {
    double lambda;
    SchedulerConfig cfg;
    int up_streak = 0;
    int down_streak = 0;
    LambdaScheduler(double lambda0, SchedulerConfig c) : lambda(lambda0), cfg(c) {}
    void update(double attack_rate);
};

struct InvertConfig {
    int steps = 1000;  // optimization steps per cluster
    int batch = 32;    // anchor/foreign pairs per step
    double lambda0 = 0.01;
    SchedulerConfig sched;
    OptimizerConfig opt;  // adam, lr 1e-2 by default
};

struct LossEval {
    double loss = 0.0;
    double mean_cos = 0.0;
    double attack_rate = 0.0;  // fraction of pairs with cos >= tau_sim
    Tensor d_mask_logits;      // filled when want_grads
    Tensor d_delta_logits;
};

// Shared evaluation of both loss variants over a batch of B (anchor, foreign)
// pairs. The anchors' representations are constants; gradients flow through
// the triggered samples into the two logit tensors.
//   size_oriented: -mean cos(f(x_i), f(x~_j)) + lambda * sum(m)
//   norm_oriented: -mean cos(f(x_i), f(x~_j)) + lambda * sum(m . delta)
LossEval loss_eval(const EncoderNet& f, const Tensor& xi, const Tensor& xj,
                   const TriggerParams& params, double lambda, Variant variant,
                   double tau_sim, bool want_grads);

double loss_size(const EncoderNet& f, const Tensor& xi, const Tensor& xj,
                 const TriggerParams& params, double lambda);
double loss_norm(const EncoderNet& f, const Tensor& xi, const Tensor& xj,
                 const TriggerParams& params, double lambda);

struct ReversedTrigger {
    int64_t cluster_id = 0;
    Variant variant = Variant::size_oriented;
    Tensor mask;        // squashed, [d]
    Tensor delta;       // squashed, [d]
    double size = 0.0;  // sum(m)
    double norm = 0.0;  // sum(m . delta)
    double final_loss = 0.0;
};

struct ClusterTriggers {
    ReversedTrigger size_oriented;
    ReversedTrigger norm_oriented;
};

// Recovers both trigger variants for one target cluster: each step draws B
// anchors from the target cluster and B samples from the other clusters
// (uniform, with replacement), then updates the two trigger sets in lockstep
// with independent optimizers and schedulers.
ClusterTriggers reverse_cluster(const EncoderNet& f, const Tensor& samples,
                                const std::vector<std::vector<int64_t>>& clusters,
                                int64_t target, const InvertConfig& cfg, RngStream stream);

// All clusters; cluster i uses the derived stream (master stream, i), so the
// per-cluster results are independent of evaluation order.
std::vector<ClusterTriggers> reverse_all(const EncoderNet& f, const Tensor& samples,
                                         const std::vector<std::vector<int64_t>>& clusters,
                                         const InvertConfig& cfg, RngStream stream);

}  // namespace encscan::invert
