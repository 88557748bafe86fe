#include "encscan/unlearn.hpp"

#include <cmath>

#include "encscan/invert.hpp"

namespace encscan::unlearn {

AugmentationSpec AugmentationSpec::standard() {
    AugmentationSpec s;
    s.ops = {{AugOp::Kind::translate, 2.0},
             {AugOp::Kind::hflip, 0.5},
             {AugOp::Kind::noise, 0.05},
             {AugOp::Kind::brightness, 0.1}};
    return s;
}

AugmentationSpec AugmentationSpec::identity() { return {}; }

namespace {

void clip01(Tensor& t) {
    for (float& v : t.data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

void apply_translate(Tensor& img, const ImageGeom& g, int max_shift, RngStream& rng) {
    int64_t span = 2 * max_shift + 1;
    int dr = static_cast<int>(rng.next_below(static_cast<uint64_t>(span))) - max_shift;
    int dc = static_cast<int>(rng.next_below(static_cast<uint64_t>(span))) - max_shift;
    if (dr == 0 && dc == 0) return;
    Tensor out = Tensor::zeros(img.shape);  // vacated pixels stay 0
    for (int64_t r = 0; r < g.height; ++r) {
        int64_t sr = r - dr;
        if (sr < 0 || sr >= g.height) continue;
        for (int64_t c = 0; c < g.width; ++c) {
            int64_t sc = c - dc;
            if (sc < 0 || sc >= g.width) continue;
            for (int64_t ch = 0; ch < g.channels; ++ch)
                out.data[static_cast<size_t>((r * g.width + c) * g.channels + ch)] =
                    img.data[static_cast<size_t>((sr * g.width + sc) * g.channels + ch)];
        }
    }
    img = std::move(out);
}

void apply_hflip(Tensor& img, const ImageGeom& g, double prob, RngStream& rng) {
    double coin = rng.next_double();
    if (coin >= prob) return;
    for (int64_t r = 0; r < g.height; ++r)
        for (int64_t c = 0; c < g.width / 2; ++c)
            for (int64_t ch = 0; ch < g.channels; ++ch)
                std::swap(img.data[static_cast<size_t>((r * g.width + c) * g.channels + ch)],
                          img.data[static_cast<size_t>((r * g.width + (g.width - 1 - c)) * g.channels + ch)]);
}

}  // namespace

Tensor augment(const float* x, const ImageGeom& geom, const AugmentationSpec& spec,
               RngStream& rng) {
    Tensor img = Tensor::zeros({geom.dim()});
    std::copy_n(x, geom.dim(), img.data.data());
    for (const AugOp& op : spec.ops) {
        switch (op.kind) {
            case AugOp::Kind::translate:
                apply_translate(img, geom, static_cast<int>(op.a), rng);
                break;
            case AugOp::Kind::hflip:
                apply_hflip(img, geom, op.a, rng);
                break;
            case AugOp::Kind::noise:
                for (float& v : img.data) v = static_cast<float>(v + rng.next_normal(op.a));
                clip01(img);
                break;
            case AugOp::Kind::brightness: {
                double shift = (2.0 * rng.next_double() - 1.0) * op.a;
                for (float& v : img.data) v = static_cast<float>(v + shift);
                clip01(img);
                break;
            }
        }
    }
    return img;
}

Tensor augment(const Tensor& x, const ImageGeom& geom, const AugmentationSpec& spec,
               RngStream& rng) {
    if (x.size() != geom.dim())
        throw ContractError("augment: sample dim " + std::to_string(x.size()) +
                            " does not match geometry dim " + std::to_string(geom.dim()));
    return augment(x.data.data(), geom, spec, rng);
}

Tensor equal_sample(const float* x, const ImageGeom& geom, const std::optional<TriggerRef>& t,
                    const AugmentationSpec& aug, double attach_prob, RngStream& rng) {
    if (!t.has_value()) return augment(x, geom, aug, rng);
    double coin = rng.next_double();
    if (coin < attach_prob) {
        Tensor sample = Tensor::zeros({geom.dim()});
        std::copy_n(x, geom.dim(), sample.data.data());
        Tensor blended = invert::apply_trigger(sample, *t->mask, *t->delta);
        return augment(blended.data.data(), geom, aug, rng);
    }
    return augment(x, geom, aug, rng);
}

EncoderNet unlearn(const EncoderNet& f, const SampleSet& data,
                   const std::vector<std::vector<int64_t>>& clusters,
                   const outlier::ScanVerdict& verdict, const UnlearnConfig& cfg,
                   RngStream stream, MitigationStats* stats) {
    f.validate();
    data.validate();
    if (verdict.table.empty())
        throw ContractError("unlearn: flagged trigger table is empty, nothing to unlearn");
    if (cfg.passes < 1 || cfg.batch < 1)
        throw ContractError("unlearn: passes and batch must be >= 1");
    if (cfg.attach_prob < 0.0 || cfg.attach_prob > 1.0)
        throw ContractError("unlearn: attach_prob outside [0,1]");
    if (data.geom.dim() != f.input_dim())
        throw ContractError("unlearn: data dim " + std::to_string(data.geom.dim()) +
                            " does not match encoder input " + std::to_string(f.input_dim()));

    // Flatten the table (map is ordered, so this order is deterministic).
    struct Entry {
        int64_t cluster_id;
        const Tensor* mask;
        const Tensor* delta;
    };
    std::vector<Entry> entries;
    for (const auto& [cid, flagged] : verdict.table)
        for (const outlier::FlaggedTrigger& ft : flagged) entries.push_back({cid, &ft.mask, &ft.delta});

    EncoderNet student = f;
    OptimizerState opt(cfg.opt);
    std::vector<ParamRef> params;

    if (stats) {
        stats->loss_curve.clear();
        stats->passes = cfg.passes;
    }

    int64_t emb = f.embedding_dim();
    for (int pass = 0; pass < cfg.passes; ++pass) {
        double pass_loss = 0.0;
        int64_t pass_batches = 0;
        for (size_t ci = 0; ci < clusters.size(); ++ci) {
            const std::vector<int64_t>& members = clusters[ci];
            std::vector<const Entry*> candidates;
            for (const Entry& e : entries)
                if (e.cluster_id != static_cast<int64_t>(ci)) candidates.push_back(&e);

            for (size_t start = 0; start < members.size(); start += static_cast<size_t>(cfg.batch)) {
                size_t stop = std::min(members.size(), start + static_cast<size_t>(cfg.batch));
                int64_t b = static_cast<int64_t>(stop - start);
                Tensor x1 = Tensor::zeros({b, data.geom.dim()});
                Tensor x2 = Tensor::zeros({b, data.geom.dim()});
                for (int64_t p = 0; p < b; ++p) {
                    int64_t idx = members[start + static_cast<size_t>(p)];
                    if (idx < 0 || idx >= data.count())
                        throw ContractError("unlearn: cluster index " + std::to_string(idx) +
                                            " out of range");
                    const float* x = data.samples.row(idx);
                    Tensor v1 = augment(x, data.geom, cfg.aug_teacher, stream);
                    std::copy_n(v1.data.data(), data.geom.dim(), x1.row(p));
                    std::optional<TriggerRef> pick;
                    if (!candidates.empty()) {
                        const Entry* e = candidates[stream.next_below(candidates.size())];
                        pick = TriggerRef{e->mask, e->delta};
                    }
                    Tensor v2 = equal_sample(x, data.geom, pick, cfg.aug_student,
                                             cfg.attach_prob, stream);
                    std::copy_n(v2.data.data(), data.geom.dim(), x2.row(p));
                }

                Tensor z = f.forward(x1);  // teacher stays frozen
                Tensor zp = student.forward(x2);
                Tensor upstream = Tensor::zeros({b, emb});
                double batch_loss = 0.0;
                for (int64_t p = 0; p < b; ++p) {
                    const float* u = z.row(p);
                    const float* v = zp.row(p);
                    double uv = 0.0, uu = 0.0, vv = 0.0;
                    for (int64_t j = 0; j < emb; ++j) {
                        uv += static_cast<double>(u[j]) * v[j];
                        uu += static_cast<double>(u[j]) * u[j];
                        vv += static_cast<double>(v[j]) * v[j];
                    }
                    if (uu == 0.0 || vv == 0.0)
                        throw DegenerateInputError("unlearn: zero representation in alignment pair");
                    double nu = std::sqrt(uu), nv = std::sqrt(vv);
                    double c = uv / (nu * nv);
                    batch_loss -= c / static_cast<double>(b);
                    float* g = upstream.row(p);
                    for (int64_t j = 0; j < emb; ++j)
                        g[j] = static_cast<float>(-(u[j] / (nu * nv) - c * v[j] / (nv * nv)) /
                                                  static_cast<double>(b));
                }
                ParamGrads grads = student.grad_wrt_params(x2, upstream);
                params.clear();
                for (size_t l = 0; l < student.layer_count(); ++l) {
                    params.push_back({&student.weights[l], &grads.dweights[l],
                                      "layer" + std::to_string(l) + ".weight"});
                    params.push_back({&student.biases[l], &grads.dbiases[l],
                                      "layer" + std::to_string(l) + ".bias"});
                }
                opt.step(params);
                pass_loss += batch_loss;
                ++pass_batches;
            }
        }
        if (stats)
            stats->loss_curve.push_back(pass_batches > 0 ? pass_loss / static_cast<double>(pass_batches)
                                                         : 0.0);
    }
    return student;
}

}  // namespace encscan::unlearn
