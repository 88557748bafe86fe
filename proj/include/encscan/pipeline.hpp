#pragma once

#include <cstdint>
#include <vector>

#include "encscan/cluster.hpp"
#include "encscan/dataset.hpp"
#include "encscan/encoder.hpp"
#include "encscan/invert.hpp"
#include "encscan/outlier.hpp"
#include "encscan/unlearn.hpp"

namespace encscan::pipeline {

// Detection pipeline: embed (an optional seeded subsample of) the data,
// estimate the cluster count, partition at the chosen K, recover a trigger
// pair per cluster, apply the deviation test.
struct ScanConfig {
    std::vector<int64_t> k_list = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    int window = 3;
    int restarts = 3;
    int max_iter = 100;
    int64_t score_cap = 2000;
    double data_ratio = 1.0;  // seeded subsample fraction of the input data
    invert::InvertConfig invert;
    outlier::AnomalyConfig anomaly;
};

struct ScanOutcome {
    std::vector<int64_t> scanned_rows;   // data rows that entered the scan
    std::vector<int32_t> assignments;    // cluster id per scanned row
    cluster::KneeTrace knee;
    std::vector<int64_t> cluster_sizes;
    std::vector<invert::ClusterTriggers> triggers;
    outlier::ScanVerdict verdict;
    double secs_embed = 0, secs_estimate = 0, secs_invert = 0, secs_test = 0;
};

ScanOutcome run_scan(const EncoderNet& enc, const SampleSet& data, const ScanConfig& cfg,
                     RngStream stream);

// Mitigation over a scan verdict. The clustering is rebuilt from the same
// stream derivation the scan used, so with the scan's seed the partition is
// reproduced bit for bit. `stream` itself must be the scan's master stream;
// `unlearn_stream` may differ (defaults to a derivation of the same).
struct MitigationOutcome {
    EncoderNet cleaned;
    unlearn::MitigationStats stats;
    double drift_cos = 1.0;  // mean cos(f, f') over the scanned clean samples
    int64_t k_used = 0;
};

MitigationOutcome run_mitigation(const EncoderNet& enc, const SampleSet& data,
                                 const ScanConfig& cfg, const outlier::ScanVerdict& verdict,
                                 int64_t k_chosen, const unlearn::UnlearnConfig& ucfg,
                                 RngStream stream, RngStream unlearn_stream);

// Shared derivations (scan and mitigation must agree on these).
RngStream subsample_stream(RngStream master);
RngStream estimate_stream(RngStream master);
RngStream invert_stream(RngStream master);

std::vector<int64_t> pick_subsample(int64_t n, double ratio, RngStream stream);

}  // namespace encscan::pipeline
