#include "encscan/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "encscan/formats.hpp"

namespace encscan::report {

using nlohmann::json;

namespace {

// JSON has no infinities; anomaly indices can be +inf (zero deviation
// spread). Clamp at serialization so the report stays parseable and the
// threshold comparison (> 2) is unaffected.
double clamp_inf(double v) {
    if (std::isinf(v)) return v > 0 ? 1e15 : -1e15;
    return v;
}

json doubles(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(clamp_inf(x));
    return a;
}

json scan_config_json(const pipeline::ScanConfig& c) {
    json j;
    j["k_list"] = c.k_list;
    j["window"] = c.window;
    j["restarts"] = c.restarts;
    j["max_iter"] = c.max_iter;
    j["score_cap"] = c.score_cap;
    j["data_ratio"] = c.data_ratio;
    j["invert"] = {{"steps", c.invert.steps},
                   {"batch", c.invert.batch},
                   {"lambda0", c.invert.lambda0},
                   {"tau_sim", c.invert.sched.tau_sim},
                   {"rate_threshold", c.invert.sched.rate_threshold},
                   {"patience", c.invert.sched.patience},
                   {"multiplier", c.invert.sched.multiplier},
                   {"lambda_floor", c.invert.sched.lambda_floor},
                   {"lambda_cap", c.invert.sched.lambda_cap},
                   {"lr", c.invert.opt.lr}};
    j["anomaly"] = {{"consistency", c.anomaly.consistency},
                    {"threshold", c.anomaly.threshold}};
    return j;
}

pipeline::ScanConfig scan_config_from_json(const json& j) {
    pipeline::ScanConfig c;
    c.k_list = j.at("k_list").get<std::vector<int64_t>>();
    c.window = j.at("window").get<int>();
    c.restarts = j.at("restarts").get<int>();
    c.max_iter = j.at("max_iter").get<int>();
    c.score_cap = j.at("score_cap").get<int64_t>();
    c.data_ratio = j.at("data_ratio").get<double>();
    const json& iv = j.at("invert");
    c.invert.steps = iv.at("steps").get<int>();
    c.invert.batch = iv.at("batch").get<int>();
    c.invert.lambda0 = iv.at("lambda0").get<double>();
    c.invert.sched.tau_sim = iv.at("tau_sim").get<double>();
    c.invert.sched.rate_threshold = iv.at("rate_threshold").get<double>();
    c.invert.sched.patience = iv.at("patience").get<int>();
    c.invert.sched.multiplier = iv.at("multiplier").get<double>();
    c.invert.sched.lambda_floor = iv.at("lambda_floor").get<double>();
    c.invert.sched.lambda_cap = iv.at("lambda_cap").get<double>();
    c.invert.opt.lr = iv.at("lr").get<double>();
    const json& an = j.at("anomaly");
    c.anomaly.consistency = an.at("consistency").get<double>();
    c.anomaly.threshold = an.at("threshold").get<double>();
    return c;
}

json trigger_json(const invert::ReversedTrigger& t) {
    return {{"cluster_id", t.cluster_id},
            {"variant", invert::variant_name(t.variant)},
            {"size", t.size},
            {"norm", t.norm},
            {"final_loss", t.final_loss},
            {"mask_b64", base64_encode_floats(t.mask.data)},
            {"delta_b64", base64_encode_floats(t.delta.data)}};
}

invert::Variant variant_from_string(const std::string& s) {
    if (s == "size_oriented") return invert::Variant::size_oriented;
    if (s == "norm_oriented") return invert::Variant::norm_oriented;
    throw FormatError("unknown trigger variant \"" + s + "\"");
}

Tensor tensor_from_b64(const std::string& text) {
    std::vector<float> v = base64_decode_floats(text);
    Tensor t;
    t.shape = {static_cast<int64_t>(v.size())};
    t.data = std::move(v);
    return t;
}

json timings_json(const std::string& written_at, std::initializer_list<std::pair<const char*, double>> stages,
                  double total) {
    json st;
    for (const auto& [k, v] : stages) st[k] = v;
    return {{"written_at", written_at.empty() ? now_rfc3339() : written_at},
            {"stages", st},
            {"total_seconds", total}};
}

}  // namespace

std::string now_rfc3339() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string to_json(const ScanReportData& r) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = "scan";
    j["seed"] = r.seed;
    j["inputs"] = {{"encoder", {{"path", r.encoder_path}, {"digest", r.encoder_digest}}},
                   {"data", {{"path", r.data_path}, {"digest", r.data_digest}}}};
    j["config"] = scan_config_json(r.config);

    json scan;
    scan["scanned_rows"] = r.outcome.scanned_rows;
    scan["assignments"] = r.outcome.assignments;
    scan["knee"] = {{"k_list", r.outcome.knee.k_list},
                    {"s_list", doubles(r.outcome.knee.s_list)},
                    {"swk_s_list", doubles(r.outcome.knee.smoothed_s_list)},
                    {"d_list", doubles(r.outcome.knee.d_list)},
                    {"k_chosen", r.outcome.knee.k_chosen}};
    scan["cluster_sizes"] = r.outcome.cluster_sizes;
    json trig = json::array();
    for (const auto& ct : r.outcome.triggers) {
        trig.push_back(trigger_json(ct.size_oriented));
        trig.push_back(trigger_json(ct.norm_oriented));
    }
    scan["triggers"] = trig;
    const auto& v = r.outcome.verdict;
    scan["anomaly"] = {{"size_values", doubles(v.size_values)},
                       {"norm_values", doubles(v.norm_values)},
                       {"size_anomaly", doubles(v.size_anomaly)},
                       {"norm_anomaly", doubles(v.norm_anomaly)},
                       {"size_index_raw", doubles(v.size_index_raw)},
                       {"norm_index_raw", doubles(v.norm_index_raw)}};
    json flagged = json::array();
    for (const auto& [cid, entries] : v.table)
        for (const auto& f : entries)
            flagged.push_back({{"cluster_id", f.cluster_id},
                               {"variant", invert::variant_name(f.variant)},
                               {"anomaly", clamp_inf(f.anomaly)},
                               {"mask_b64", base64_encode_floats(f.mask.data)},
                               {"delta_b64", base64_encode_floats(f.delta.data)}});
    scan["verdict"] = {{"trojaned", v.trojaned}, {"flagged", flagged}};
    j["scan"] = scan;

    j["timings"] = timings_json(r.written_at,
                                {{"embed", r.outcome.secs_embed},
                                 {"estimate", r.outcome.secs_estimate},
                                 {"invert", r.outcome.secs_invert},
                                 {"test", r.outcome.secs_test}},
                                r.total_seconds);
    return j.dump(2) + "\n";
}

ScanReportData parse_scan_report(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("scan report: not valid JSON: ") + e.what());
    }
    ScanReportData r;
    try {
        if (j.at("tool").get<std::string>() != kToolName ||
            j.at("command").get<std::string>() != "scan")
            throw FormatError("scan report: not a scan report from this tool");
        r.seed = j.at("seed").get<uint64_t>();
        r.encoder_path = j.at("inputs").at("encoder").at("path").get<std::string>();
        r.encoder_digest = j.at("inputs").at("encoder").at("digest").get<std::string>();
        r.data_path = j.at("inputs").at("data").at("path").get<std::string>();
        r.data_digest = j.at("inputs").at("data").at("digest").get<std::string>();
        r.config = scan_config_from_json(j.at("config"));

        const json& scan = j.at("scan");
        r.outcome.scanned_rows = scan.at("scanned_rows").get<std::vector<int64_t>>();
        r.outcome.assignments = scan.at("assignments").get<std::vector<int32_t>>();
        if (r.outcome.assignments.size() != r.outcome.scanned_rows.size())
            throw FormatError("scan report: assignments length does not match scanned_rows");
        const json& knee = scan.at("knee");
        r.outcome.knee.k_list = knee.at("k_list").get<std::vector<int64_t>>();
        r.outcome.knee.s_list = knee.at("s_list").get<std::vector<double>>();
        r.outcome.knee.smoothed_s_list = knee.at("swk_s_list").get<std::vector<double>>();
        r.outcome.knee.d_list = knee.at("d_list").get<std::vector<double>>();
        r.outcome.knee.k_chosen = knee.at("k_chosen").get<int64_t>();
        size_t klen = r.outcome.knee.k_list.size();
        if (r.outcome.knee.s_list.size() != klen ||
            r.outcome.knee.smoothed_s_list.size() != klen ||
            r.outcome.knee.d_list.size() != klen)
            throw FormatError("scan report: knee arrays disagree on length");
        r.outcome.cluster_sizes = scan.at("cluster_sizes").get<std::vector<int64_t>>();

        for (const json& t : scan.at("triggers")) {
            invert::ReversedTrigger rt;
            rt.cluster_id = t.at("cluster_id").get<int64_t>();
            rt.variant = variant_from_string(t.at("variant").get<std::string>());
            rt.size = t.at("size").get<double>();
            rt.norm = t.at("norm").get<double>();
            rt.final_loss = t.at("final_loss").get<double>();
            rt.mask = tensor_from_b64(t.at("mask_b64").get<std::string>());
            rt.delta = tensor_from_b64(t.at("delta_b64").get<std::string>());
            int64_t cid = rt.cluster_id;
            if (static_cast<int64_t>(r.outcome.triggers.size()) <= cid)
                r.outcome.triggers.resize(static_cast<size_t>(cid) + 1);
            auto& slot = r.outcome.triggers[static_cast<size_t>(cid)];
            (rt.variant == invert::Variant::size_oriented ? slot.size_oriented
                                                          : slot.norm_oriented) = std::move(rt);
        }

        const json& an = scan.at("anomaly");
        auto& v = r.outcome.verdict;
        v.size_values = an.at("size_values").get<std::vector<double>>();
        v.norm_values = an.at("norm_values").get<std::vector<double>>();
        v.size_anomaly = an.at("size_anomaly").get<std::vector<double>>();
        v.norm_anomaly = an.at("norm_anomaly").get<std::vector<double>>();
        v.size_index_raw = an.at("size_index_raw").get<std::vector<double>>();
        v.norm_index_raw = an.at("norm_index_raw").get<std::vector<double>>();

        const json& verdict = scan.at("verdict");
        v.trojaned = verdict.at("trojaned").get<bool>();
        for (const json& f : verdict.at("flagged")) {
            outlier::FlaggedTrigger ft;
            ft.cluster_id = f.at("cluster_id").get<int64_t>();
            ft.variant = variant_from_string(f.at("variant").get<std::string>());
            ft.anomaly = f.at("anomaly").get<double>();
            ft.mask = tensor_from_b64(f.at("mask_b64").get<std::string>());
            ft.delta = tensor_from_b64(f.at("delta_b64").get<std::string>());
            v.table[ft.cluster_id].push_back(std::move(ft));
        }
        if (v.trojaned != !v.table.empty())
            throw FormatError("scan report: verdict flag contradicts the flagged table");

        if (j.contains("timings")) {
            const json& tm = j.at("timings");
            r.written_at = tm.value("written_at", "");
            r.total_seconds = tm.value("total_seconds", 0.0);
            if (tm.contains("stages")) {
                const json& st = tm.at("stages");
                r.outcome.secs_embed = st.value("embed", 0.0);
                r.outcome.secs_estimate = st.value("estimate", 0.0);
                r.outcome.secs_invert = st.value("invert", 0.0);
                r.outcome.secs_test = st.value("test", 0.0);
            }
        }
    } catch (const FormatError&) {
        throw;
    } catch (const json::exception& e) {
        throw FormatError(std::string("scan report: bad structure: ") + e.what());
    }
    return r;
}

ScanReportData load_scan_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::ostringstream body;
    body << in.rdbuf();
    return parse_scan_report(body.str());
}

void save_scan_report(const ScanReportData& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out << to_json(r);
    if (!out) throw FormatError("failed writing " + path);
}

std::string to_json(const MitigationReportData& r) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = "mitigate";
    j["seed"] = r.seed;
    j["inputs"] = {{"encoder", {{"path", r.encoder_path}, {"digest", r.encoder_digest}}},
                   {"data", {{"path", r.data_path}, {"digest", r.data_digest}}},
                   {"report", {{"path", r.report_path}, {"digest", r.report_digest}}}};
    j["config"] = {{"passes", r.config.passes},
                   {"batch", r.config.batch},
                   {"attach_prob", r.config.attach_prob},
                   {"lr", r.config.opt.lr}};
    j["mitigation"] = {{"k_used", r.k_used},
                       {"flagged_clusters", r.flagged_clusters},
                       {"loss_curve", doubles(r.loss_curve)},
                       {"drift_cos", clamp_inf(r.drift_cos)},
                       {"output", {{"path", r.output_path}, {"digest", r.output_digest}}}};
    j["timings"] = timings_json(r.written_at, {}, r.total_seconds);
    return j.dump(2) + "\n";
}

std::string to_json(const BenchReportData& r) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = "bench";
    j["seed"] = r.seed;
    const auto& fx = r.config.fixture;
    j["config"] = {{"n_clean", r.config.n_clean},
                   {"n_trojan", r.config.n_trojan},
                   {"ratios", doubles(r.config.ratios)},
                   {"fixture",
                    {{"classes", fx.classes},
                     {"per_class", fx.per_class},
                     {"height", fx.geom.height},
                     {"width", fx.geom.width},
                     {"channels", fx.geom.channels},
                     {"noise_sigma", fx.noise_sigma},
                     {"poison_rate", fx.poison_rate},
                     {"epochs", fx.train.epochs},
                     {"batch", fx.train.batch},
                     {"embedding", fx.train.embedding},
                     {"temperature", fx.train.temperature}}},
                   {"scan", scan_config_json(r.config.scan)}};
    json rows = json::array();
    for (const auto& row : r.result.rows) {
        json truth = json::array(), verdict = json::array();
        for (uint8_t t : row.truth) truth.push_back(static_cast<int>(t));
        for (uint8_t t : row.verdict) verdict.push_back(static_cast<int>(t));
        rows.push_back({{"ratio", row.ratio},
                        {"tp", row.tp},
                        {"fp", row.fp},
                        {"dacc", row.dacc},
                        {"truth", truth},
                        {"verdict", verdict}});
    }
    j["rows"] = rows;
    j["n_clean"] = r.result.n_clean;
    j["n_trojan"] = r.result.n_trojan;
    j["timings"] = timings_json(r.written_at, {}, r.total_seconds);
    return j.dump(2) + "\n";
}

BenchReportData parse_bench_report(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bench report: not valid JSON: ") + e.what());
    }
    BenchReportData r;
    try {
        if (j.at("command").get<std::string>() != "bench")
            throw FormatError("bench report: wrong command field");
        r.seed = j.at("seed").get<uint64_t>();
        r.result.n_clean = j.at("n_clean").get<int>();
        r.result.n_trojan = j.at("n_trojan").get<int>();
        for (const json& row : j.at("rows")) {
            lab::BenchRow br;
            br.ratio = row.at("ratio").get<double>();
            br.tp = row.at("tp").get<int>();
            br.fp = row.at("fp").get<int>();
            br.dacc = row.at("dacc").get<double>();
            for (const json& t : row.at("truth")) br.truth.push_back(t.get<uint8_t>());
            for (const json& t : row.at("verdict")) br.verdict.push_back(t.get<uint8_t>());
            r.result.rows.push_back(std::move(br));
        }
    } catch (const FormatError&) {
        throw;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bench report: bad structure: ") + e.what());
    }
    return r;
}

std::string canonical_form(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("report: not valid JSON: ") + e.what());
    }
    j.erase("timings");
    return j.dump();
}

std::string canonical_digest(const std::string& json_text) {
    return digest_string(canonical_form(json_text));
}

}  // namespace encscan::report
