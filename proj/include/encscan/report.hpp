#pragma once

#include <string>
#include <utility>
#include <vector>

#include "encscan/lab.hpp"
#include "encscan/pipeline.hpp"

namespace encscan::report {

inline constexpr const char* kToolName = "encscan";
inline constexpr const char* kToolVersion = "1.0.0";

// The scan report is the authoritative record of one scan: tool identity,
// seed, input digests, the effective configuration, the full outcome (knee
// trace, per-cluster triggers with base64 float payloads, anomaly arrays,
// verdict and flagged table), and wall-clock timings. Everything volatile
// (timestamp, stage seconds) lives under the single "timings" key, which the
// canonical form strips, so equal seeds give equal canonical bytes.
struct ScanReportData {
    uint64_t seed = 0;
    std::string encoder_path, encoder_digest;
    std::string data_path, data_digest;
    pipeline::ScanConfig config;
    pipeline::ScanOutcome outcome;
    double total_seconds = 0.0;
    std::string written_at;  // RFC 3339 UTC; filled by to_json when empty
};

std::string to_json(const ScanReportData& r);
ScanReportData parse_scan_report(const std::string& text);  // FormatError on bad input
ScanReportData load_scan_report(const std::string& path);
void save_scan_report(const ScanReportData& r, const std::string& path);

// Mitigation summary written next to the cleaned encoder.
struct MitigationReportData {
    uint64_t seed = 0;
    std::string encoder_path, encoder_digest;
    std::string data_path, data_digest;
    std::string report_path, report_digest;  // canonical digest of the scan report
    std::string output_path, output_digest;
    unlearn::UnlearnConfig config;
    int64_t k_used = 0;
    std::vector<int64_t> flagged_clusters;
    std::vector<double> loss_curve;
    double drift_cos = 1.0;
    double total_seconds = 0.0;
    std::string written_at;
};

std::string to_json(const MitigationReportData& r);

// Benchmark report: one row per data ratio over a fixed encoder ensemble.
struct BenchReportData {
    uint64_t seed = 0;
    lab::BenchConfig config;
    lab::BenchReport result;
    double total_seconds = 0.0;
    std::string written_at;
};

std::string to_json(const BenchReportData& r);
BenchReportData parse_bench_report(const std::string& text);

// Canonical form: parsed, "timings" removed, compact dump with sorted keys.
// Two runs with the same seed produce identical canonical bytes.
std::string canonical_form(const std::string& json_text);   // FormatError on bad input
std::string canonical_digest(const std::string& json_text);

std::string now_rfc3339();

}  // namespace encscan::report
