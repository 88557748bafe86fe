#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "encscan/invert.hpp"
#include "encscan/tensor.hpp"

namespace encscan::outlier {

struct AnomalyConfig {
    double consistency = 1.4826;  // Gaussian consistency constant for the MAD
    double threshold = 2.0;       // strict: flag only when index > threshold
};

// Median of a list (mean of the two central values for even length).
double median(std::vector<double> xs);

// Median absolute deviation around the median.
double mad(const std::vector<double>& xs);

// |x - median| / (consistency * MAD). Requires xs.size() >= 3 and x to be a
// member of xs. Zero MAD degenerates to 0 when x equals the median and to
// +infinity otherwise.
double anomaly_index(double x, const std::vector<double>& xs, const AnomalyConfig& cfg = {});

// True only for deviations BELOW the median whose index exceeds the
// threshold; large values are never flagged, however extreme.
bool is_outlier(double x, const std::vector<double>& xs, const AnomalyConfig& cfg = {});

struct FlaggedTrigger {
    int64_t cluster_id = 0;
    invert::Variant variant = invert::Variant::size_oriented;
    double anomaly = 0.0;  // directional index of the flagged statistic
    Tensor mask, delta;
};

struct ScanVerdict {
    bool trojaned = false;
    // cluster id -> flagged trigger(s); when both statistics flag the same
    // cluster the norm-oriented entry precedes the size-oriented one.
    std::map<int64_t, std::vector<FlaggedTrigger>> table;
    std::vector<double> size_values, norm_values;    // per-cluster statistics under test
    std::vector<double> size_anomaly, norm_anomaly;  // directional index (0 when above median)
    std::vector<double> size_index_raw, norm_index_raw;  // two-sided index, diagnostics only
};

// Applies the test to the per-cluster trigger sizes (size-oriented variant)
// and weighted norms (norm-oriented variant). Requires >= 3 clusters.
ScanVerdict scan_triggers(const std::vector<invert::ClusterTriggers>& triggers,
                          const AnomalyConfig& cfg = {});

}  // namespace encscan::outlier
