#include "encscan/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace encscan::outlier {

double median(std::vector<double> xs) {
    if (xs.empty()) throw ContractError("median of empty list");
    size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<ptrdiff_t>(mid), xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double mad(const std::vector<double>& xs) {
    double med = median(xs);
    std::vector<double> devs;
    devs.reserve(xs.size());
    for (double x : xs) devs.push_back(std::abs(x - med));
    return median(std::move(devs));
}

namespace {

void check_membership(double x, const std::vector<double>& xs, const char* who) {
    if (xs.size() < 3)
        throw ContractError(std::string(who) + ": need at least 3 values, got " +
                            std::to_string(xs.size()));
    for (double v : xs)
        if (v == x) return;
    throw ContractError(std::string(who) + ": value under test is not a member of the list");
}

}  // namespace

double anomaly_index(double x, const std::vector<double>& xs, const AnomalyConfig& cfg) {
    check_membership(x, xs, "anomaly_index");
    double med = median(xs);
    double spread = cfg.consistency * mad(xs);
    double dev = std::abs(x - med);
    if (spread == 0.0)
        return dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return dev / spread;
}

bool is_outlier(double x, const std::vector<double>& xs, const AnomalyConfig& cfg) {
    check_membership(x, xs, "is_outlier");
    if (x >= median(xs)) return false;
    return anomaly_index(x, xs, cfg) > cfg.threshold;
}

ScanVerdict scan_triggers(const std::vector<invert::ClusterTriggers>& triggers,
                          const AnomalyConfig& cfg) {
    if (triggers.size() < 3)
        throw ContractError("scan_triggers: got " + std::to_string(triggers.size()) +
                            " clusters, need at least 3; widen the candidate K list");

    ScanVerdict verdict;
    size_t k = triggers.size();
    verdict.size_values.reserve(k);
    verdict.norm_values.reserve(k);
    for (const invert::ClusterTriggers& ct : triggers) {
        verdict.size_values.push_back(ct.size_oriented.size);
        verdict.norm_values.push_back(ct.norm_oriented.norm);
    }

    double size_med = median(verdict.size_values);
    double norm_med = median(verdict.norm_values);
    for (size_t i = 0; i < k; ++i) {
        double s_idx = anomaly_index(verdict.size_values[i], verdict.size_values, cfg);
        double n_idx = anomaly_index(verdict.norm_values[i], verdict.norm_values, cfg);
        verdict.size_index_raw.push_back(s_idx);
        verdict.norm_index_raw.push_back(n_idx);
        verdict.size_anomaly.push_back(verdict.size_values[i] < size_med ? s_idx : 0.0);
        verdict.norm_anomaly.push_back(verdict.norm_values[i] < norm_med ? n_idx : 0.0);

        bool size_flag = is_outlier(verdict.size_values[i], verdict.size_values, cfg);
        bool norm_flag = is_outlier(verdict.norm_values[i], verdict.norm_values, cfg);
        if (!size_flag && !norm_flag) continue;

        int64_t cluster_id = triggers[i].size_oriented.cluster_id;
        std::vector<FlaggedTrigger>& entries = verdict.table[cluster_id];
        if (norm_flag) {
            FlaggedTrigger ft;
            ft.cluster_id = cluster_id;
            ft.variant = invert::Variant::norm_oriented;
            ft.anomaly = verdict.norm_anomaly[i];
            ft.mask = triggers[i].norm_oriented.mask;
            ft.delta = triggers[i].norm_oriented.delta;
            entries.push_back(std::move(ft));
        }
        if (size_flag) {
            FlaggedTrigger ft;
            ft.cluster_id = cluster_id;
            ft.variant = invert::Variant::size_oriented;
            ft.anomaly = verdict.size_anomaly[i];
            ft.mask = triggers[i].size_oriented.mask;
            ft.delta = triggers[i].size_oriented.delta;
            entries.push_back(std::move(ft));
        }
    }
    verdict.trojaned = !verdict.table.empty();
    return verdict;
}

}  // namespace encscan::outlier
