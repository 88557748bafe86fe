#include "encscan/pipeline.hpp"

#include <chrono>
#include <cmath>

namespace encscan::pipeline {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor gather(const Tensor& samples, const std::vector<int64_t>& rows) {
    Tensor out = Tensor::zeros({static_cast<int64_t>(rows.size()), samples.cols()});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(samples.row(rows[i]), samples.cols(), out.row(static_cast<int64_t>(i)));
    return out;
}

}  // namespace

RngStream subsample_stream(RngStream master) { return master.derived(RngStream::tag("subsample")); }
RngStream estimate_stream(RngStream master) { return master.derived(RngStream::tag("estimate")); }
RngStream invert_stream(RngStream master) { return master.derived(RngStream::tag("invert")); }

std::vector<int64_t> pick_subsample(int64_t n, double ratio, RngStream stream) {
    if (ratio <= 0.0 || ratio > 1.0)
        throw ContractError("data ratio must be in (0, 1], got " + std::to_string(ratio));
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    if (ratio >= 1.0) return idx;
    int64_t keep = std::max<int64_t>(1, static_cast<int64_t>(std::llround(ratio * static_cast<double>(n))));
    for (int64_t i = 0; i < keep; ++i) {
        int64_t j = i + static_cast<int64_t>(stream.next_below(static_cast<uint64_t>(n - i)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(keep));
    std::sort(idx.begin(), idx.end());
    return idx;
}

ScanOutcome run_scan(const EncoderNet& enc, const SampleSet& data, const ScanConfig& cfg,
                     RngStream stream) {
    enc.validate();
    data.validate();
    if (data.geom.dim() != enc.input_dim())
        throw ContractError("scan: data dim " + std::to_string(data.geom.dim()) +
                            " does not match encoder input " + std::to_string(enc.input_dim()));
    if (data.count() < 1) throw ContractError("scan: empty dataset");

    ScanOutcome out;
    out.scanned_rows = pick_subsample(data.count(), cfg.data_ratio, subsample_stream(stream));
    Tensor pixels = gather(data.samples, out.scanned_rows);

    auto t0 = std::chrono::steady_clock::now();
    Tensor reps = enc.forward(pixels);
    out.secs_embed = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    cluster::KneeConfig kc;
    kc.k_list = cfg.k_list;
    kc.window = cfg.window;
    kc.restarts = cfg.restarts;
    kc.max_iter = cfg.max_iter;
    kc.score_cap = cfg.score_cap;
    RngStream est = estimate_stream(stream);
    out.knee = cluster::estimate_k(reps, kc, est);
    // Same derivation as the winning candidate inside estimate_k, so this
    // partition is the one the estimate was scored on.
    cluster::ClusterModel model =
        cluster::kmeans(reps, out.knee.k_chosen, est.derived(static_cast<uint64_t>(out.knee.k_chosen)),
                        cfg.restarts, cfg.max_iter);
    out.assignments = model.assignments;
    std::vector<std::vector<int64_t>> groups = cluster::group_by_cluster(model.assignments, model.k);
    for (const auto& g : groups) out.cluster_sizes.push_back(static_cast<int64_t>(g.size()));
    out.secs_estimate = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    out.triggers = invert::reverse_all(enc, pixels, groups, cfg.invert, invert_stream(stream));
    out.secs_invert = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    out.verdict = outlier::scan_triggers(out.triggers, cfg.anomaly);
    out.secs_test = seconds_since(t0);
    return out;
}

MitigationOutcome run_mitigation(const EncoderNet& enc, const SampleSet& data,
                                 const ScanConfig& cfg, const outlier::ScanVerdict& verdict,
                                 int64_t k_chosen, const unlearn::UnlearnConfig& ucfg,
                                 RngStream stream, RngStream unlearn_stream) {
    enc.validate();
    data.validate();
    if (verdict.table.empty())
        throw ContractError("mitigation: verdict is benign, nothing to unlearn");

    std::vector<int64_t> rows = pick_subsample(data.count(), cfg.data_ratio, subsample_stream(stream));
    Tensor pixels = gather(data.samples, rows);
    Tensor reps = enc.forward(pixels);

    RngStream est = estimate_stream(stream);
    cluster::ClusterModel model =
        cluster::kmeans(reps, k_chosen, est.derived(static_cast<uint64_t>(k_chosen)),
                        cfg.restarts, cfg.max_iter);
    std::vector<std::vector<int64_t>> groups = cluster::group_by_cluster(model.assignments, model.k);

    SampleSet scan_set;
    scan_set.geom = data.geom;
    scan_set.samples = std::move(pixels);

    MitigationOutcome out;
    out.k_used = k_chosen;
    out.cleaned = unlearn::unlearn(enc, scan_set, groups, verdict, ucfg, unlearn_stream, &out.stats);

    Tensor reps_after = out.cleaned.forward(scan_set.samples);
    double acc = 0.0;
    for (int64_t i = 0; i < reps.rows(); ++i)
        acc += cosine_similarity(reps.row(i), reps_after.row(i), reps.cols());
    out.drift_cos = reps.rows() > 0 ? acc / static_cast<double>(reps.rows()) : 1.0;
    return out;
}

}  // namespace encscan::pipeline
