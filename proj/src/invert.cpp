#include "encscan/invert.hpp"

#include <cmath>

namespace encscan::invert {

namespace {

inline float squash(float logit) {
    return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(logit))));
}

Tensor squash_tensor(const Tensor& logits) {
    Tensor out = logits;
    for (float& v : out.data) v = squash(v);
    return out;
}

Tensor gather_rows(const Tensor& samples, const std::vector<int64_t>& all,
                   const std::vector<int64_t>& picks) {
    Tensor out = Tensor::zeros({static_cast<int64_t>(picks.size()), samples.cols()});
    for (size_t i = 0; i < picks.size(); ++i)
        std::copy_n(samples.row(all[static_cast<size_t>(picks[i])]), samples.cols(),
                    out.row(static_cast<int64_t>(i)));
    return out;
}

}  // namespace

Tensor TriggerParams::mask() const { return squash_tensor(mask_logits); }
Tensor TriggerParams::delta() const { return squash_tensor(delta_logits); }

TriggerParams init_trigger_params(int64_t dim, RngStream& rng) {
    if (dim < 1) throw ContractError("trigger dim must be >= 1, got " + std::to_string(dim));
    TriggerParams p;
    p.mask_logits = Tensor::zeros({dim});
    p.delta_logits = Tensor::zeros({dim});
    for (float& v : p.mask_logits.data) v = static_cast<float>(rng.next_normal(0.1));
    for (float& v : p.delta_logits.data) v = static_cast<float>(rng.next_normal(0.1));
    return p;
}

Tensor apply_trigger(const Tensor& x, const Tensor& mask, const Tensor& delta) {
    if (!mask.same_shape(delta))
        throw ContractError("apply_trigger: mask " + shape_str(mask.shape) + " vs delta " +
                            shape_str(delta.shape));
    int64_t d = mask.size();
    for (float v : mask.data)
        if (v < 0.0f || v > 1.0f) throw ContractError("apply_trigger: mask value outside [0,1]");
    auto blend_row = [&](const float* src, float* dst) {
        for (int64_t j = 0; j < d; ++j) {
            double m = mask.data[static_cast<size_t>(j)];
            dst[j] = static_cast<float>((1.0 - m) * src[j] + m * delta.data[static_cast<size_t>(j)]);
        }
    };
    if (x.shape.size() == 1) {
        if (x.size() != d)
            throw ContractError("apply_trigger: sample dim " + std::to_string(x.size()) +
                                " vs trigger dim " + std::to_string(d));
        Tensor out = Tensor::zeros(x.shape);
        blend_row(x.data.data(), out.data.data());
        return out;
    }
    if (x.shape.size() != 2 || x.cols() != d)
        throw ContractError("apply_trigger: batch " + shape_str(x.shape) + " vs trigger dim " +
                            std::to_string(d));
    Tensor out = Tensor::zeros(x.shape);
    for (int64_t i = 0; i < x.rows(); ++i) blend_row(x.row(i), out.row(i));
    return out;
}

const char* variant_name(Variant v) {
    return v == Variant::size_oriented ? "size_oriented" : "norm_oriented";
}

void LambdaScheduler::update(double attack_rate) {
    if (attack_rate < 0.0 || attack_rate > 1.0)
        throw ContractError("attack rate " + std::to_string(attack_rate) + " outside [0,1]");
    if (attack_rate >= cfg.rate_threshold) {
        ++up_streak;
        down_streak = 0;
        if (up_streak >= cfg.patience) {
            lambda = std::min(lambda * cfg.multiplier, cfg.lambda_cap);
            up_streak = 0;
        }
    } else {
        ++down_streak;
        up_streak = 0;
        if (down_streak >= cfg.patience) {
            lambda = std::max(lambda / cfg.multiplier, cfg.lambda_floor);
            down_streak = 0;
        }
    }
}

LossEval loss_eval(const EncoderNet& f, const Tensor& xi, const Tensor& xj,
                   const TriggerParams& params, double lambda, Variant variant,
                   double tau_sim, bool want_grads) {
    if (xi.shape.size() != 2 || xj.shape.size() != 2 || xi.rows() != xj.rows() ||
        xi.cols() != xj.cols())
        throw ContractError("loss_eval: anchor batch " + shape_str(xi.shape) +
                            " and foreign batch " + shape_str(xj.shape) + " must match");
    if (xi.rows() == 0) throw ContractError("loss_eval: empty batch");
    if (params.mask_logits.size() != xi.cols())
        throw ContractError("loss_eval: trigger dim " + std::to_string(params.mask_logits.size()) +
                            " vs sample dim " + std::to_string(xi.cols()));
    if (!params.mask_logits.all_finite() || !params.delta_logits.all_finite())
        throw ContractError("loss_eval: non-finite trigger logits");

    int64_t B = xi.rows(), d = xi.cols();
    Tensor m = params.mask();
    Tensor delta = params.delta();
    Tensor triggered = apply_trigger(xj, m, delta);

    Tensor zi = f.forward(xi);
    Tensor zt = f.forward(triggered);
    int64_t e = zi.cols();

    double cos_sum = 0.0;
    int64_t hits = 0;
    std::vector<double> cos_p(static_cast<size_t>(B));
    std::vector<double> nu(static_cast<size_t>(B)), nv(static_cast<size_t>(B));
    for (int64_t p = 0; p < B; ++p) {
        const float* u = zi.row(p);
        const float* v = zt.row(p);
        double uv = 0.0, uu = 0.0, vv = 0.0;
        for (int64_t j = 0; j < e; ++j) {
            uv += static_cast<double>(u[j]) * v[j];
            uu += static_cast<double>(u[j]) * u[j];
            vv += static_cast<double>(v[j]) * v[j];
        }
        if (uu == 0.0 || vv == 0.0)
            throw DegenerateInputError("loss_eval: zero representation vector in pair " +
                                       std::to_string(p));
        nu[static_cast<size_t>(p)] = std::sqrt(uu);
        nv[static_cast<size_t>(p)] = std::sqrt(vv);
        double c = uv / (nu[static_cast<size_t>(p)] * nv[static_cast<size_t>(p)]);
        cos_p[static_cast<size_t>(p)] = c;
        cos_sum += c;
        if (c >= tau_sim) ++hits;
    }

    double penalty = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        double mj = m.data[static_cast<size_t>(j)];
        penalty += variant == Variant::size_oriented
                       ? mj
                       : mj * static_cast<double>(delta.data[static_cast<size_t>(j)]);
    }

    LossEval ev;
    ev.mean_cos = cos_sum / static_cast<double>(B);
    ev.attack_rate = static_cast<double>(hits) / static_cast<double>(B);
    ev.loss = -ev.mean_cos + lambda * penalty;
    if (!want_grads) return ev;

    // d(-mean cos)/d zt_p = -(1/B) (u / (|u||v|) - cos * v / |v|^2)
    Tensor upstream = Tensor::zeros({B, e});
    for (int64_t p = 0; p < B; ++p) {
        const float* u = zi.row(p);
        const float* v = zt.row(p);
        float* g = upstream.row(p);
        double inv_uv = 1.0 / (nu[static_cast<size_t>(p)] * nv[static_cast<size_t>(p)]);
        double c_over_v2 = cos_p[static_cast<size_t>(p)] / (nv[static_cast<size_t>(p)] * nv[static_cast<size_t>(p)]);
        for (int64_t j = 0; j < e; ++j)
            g[j] = static_cast<float>(-(u[j] * inv_uv - c_over_v2 * v[j]) / static_cast<double>(B));
    }
    Tensor dtrig = f.grad_wrt_input(triggered, upstream);

    // Chain into the blend, the penalty, then the logistic squash.
    ev.d_mask_logits = Tensor::zeros({d});
    ev.d_delta_logits = Tensor::zeros({d});
    for (int64_t j = 0; j < d; ++j) {
        double dm = 0.0, dd = 0.0;
        double mj = m.data[static_cast<size_t>(j)];
        double dj = delta.data[static_cast<size_t>(j)];
        for (int64_t p = 0; p < B; ++p) {
            double g = dtrig.at(p, j);
            dm += g * (dj - static_cast<double>(xj.at(p, j)));
            dd += g * mj;
        }
        if (variant == Variant::size_oriented) {
            dm += lambda;
        } else {
            dm += lambda * dj;
            dd += lambda * mj;
        }
        ev.d_mask_logits.data[static_cast<size_t>(j)] = static_cast<float>(dm * mj * (1.0 - mj));
        ev.d_delta_logits.data[static_cast<size_t>(j)] = static_cast<float>(dd * dj * (1.0 - dj));
    }
    return ev;
}

double loss_size(const EncoderNet& f, const Tensor& xi, const Tensor& xj,
                 const TriggerParams& params, double lambda) {
    return loss_eval(f, xi, xj, params, lambda, Variant::size_oriented, 0.9, false).loss;
}

double loss_norm(const EncoderNet& f, const Tensor& xi, const Tensor& xj,
                 const TriggerParams& params, double lambda) {
    return loss_eval(f, xi, xj, params, lambda, Variant::norm_oriented, 0.9, false).loss;
}

namespace {

ReversedTrigger finish_trigger(int64_t cluster_id, Variant variant, const TriggerParams& p,
                               double final_loss) {
    ReversedTrigger t;
    t.cluster_id = cluster_id;
    t.variant = variant;
    t.mask = p.mask();
    t.delta = p.delta();
    double size = 0.0, norm = 0.0;
    for (int64_t j = 0; j < t.mask.size(); ++j) {
        double mj = t.mask.data[static_cast<size_t>(j)];
        size += mj;
        norm += mj * static_cast<double>(t.delta.data[static_cast<size_t>(j)]);
    }
    t.size = size;
    t.norm = norm;
    t.final_loss = final_loss;
    return t;
}

}  // namespace

ClusterTriggers reverse_cluster(const EncoderNet& f, const Tensor& samples,
                                const std::vector<std::vector<int64_t>>& clusters,
                                int64_t target, const InvertConfig& cfg, RngStream stream) {
    if (samples.shape.size() != 2)
        throw ContractError("reverse_cluster: samples must be 2-D");
    if (target < 0 || target >= static_cast<int64_t>(clusters.size()))
        throw ContractError("reverse_cluster: target cluster " + std::to_string(target) +
                            " outside [0, " + std::to_string(clusters.size()) + ")");
    if (clusters.size() < 2)
        throw ContractError("reverse_cluster: needs at least 2 clusters");
    if (cfg.steps < 1 || cfg.batch < 1)
        throw ContractError("reverse_cluster: steps and batch must be >= 1");

    const std::vector<int64_t>& own = clusters[static_cast<size_t>(target)];
    std::vector<int64_t> foreign;
    for (size_t c = 0; c < clusters.size(); ++c) {
        for (int64_t idx : clusters[c]) {
            if (idx < 0 || idx >= samples.rows())
                throw ContractError("reverse_cluster: sample index " + std::to_string(idx) +
                                    " out of range");
            if (static_cast<int64_t>(c) != target) foreign.push_back(idx);
        }
    }
    if (own.empty()) throw ContractError("reverse_cluster: target cluster is empty");
    if (foreign.empty()) throw ContractError("reverse_cluster: no samples outside target cluster");

    int64_t d = samples.cols();
    TriggerParams p_size = init_trigger_params(d, stream);
    TriggerParams p_norm = init_trigger_params(d, stream);
    OptimizerState opt_size(cfg.opt), opt_norm(cfg.opt);
    LambdaScheduler sched_size(cfg.lambda0, cfg.sched), sched_norm(cfg.lambda0, cfg.sched);

    double last_loss_size = 0.0, last_loss_norm = 0.0;
    std::vector<int64_t> anchor_picks(static_cast<size_t>(cfg.batch));
    std::vector<int64_t> foreign_picks(static_cast<size_t>(cfg.batch));

    for (int step = 0; step < cfg.steps; ++step) {
        for (int64_t& v : anchor_picks)
            v = static_cast<int64_t>(stream.next_below(own.size()));
        for (int64_t& v : foreign_picks)
            v = static_cast<int64_t>(stream.next_below(foreign.size()));
        Tensor xi = gather_rows(samples, own, anchor_picks);
        Tensor xj = gather_rows(samples, foreign, foreign_picks);

        LossEval ev1 = loss_eval(f, xi, xj, p_size, sched_size.lambda, Variant::size_oriented,
                                 cfg.sched.tau_sim, true);
        opt_size.step({{&p_size.mask_logits, &ev1.d_mask_logits, "size.mask_logits"},
                       {&p_size.delta_logits, &ev1.d_delta_logits, "size.delta_logits"}});
        sched_size.update(ev1.attack_rate);
        last_loss_size = ev1.loss;

        LossEval ev2 = loss_eval(f, xi, xj, p_norm, sched_norm.lambda, Variant::norm_oriented,
                                 cfg.sched.tau_sim, true);
        opt_norm.step({{&p_norm.mask_logits, &ev2.d_mask_logits, "norm.mask_logits"},
                       {&p_norm.delta_logits, &ev2.d_delta_logits, "norm.delta_logits"}});
        sched_norm.update(ev2.attack_rate);
        last_loss_norm = ev2.loss;
    }

    ClusterTriggers out;
    out.size_oriented = finish_trigger(target, Variant::size_oriented, p_size, last_loss_size);
    out.norm_oriented = finish_trigger(target, Variant::norm_oriented, p_norm, last_loss_norm);
    return out;
}

std::vector<ClusterTriggers> reverse_all(const EncoderNet& f, const Tensor& samples,
                                         const std::vector<std::vector<int64_t>>& clusters,
                                         const InvertConfig& cfg, RngStream stream) {
    std::vector<ClusterTriggers> out(clusters.size());
    for (size_t i = 0; i < clusters.size(); ++i)
        out[i] = reverse_cluster(f, samples, clusters, static_cast<int64_t>(i), cfg,
                                 stream.derived(static_cast<uint64_t>(i)));
    return out;
}

}  // namespace encscan::invert
