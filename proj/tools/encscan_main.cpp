// encscan: detect and remove representation-space backdoors in small
// self-supervised image encoders.
//
// Subcommands: gen-data, train, scan, mitigate, eval, bench, export-plot.
// Exit codes: 0 success / benign verdict, 2 usage or validation error,
// 3 trojaned verdict, 4 malformed file, 5 unmet precondition.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "encscan/common.hpp"
#include "encscan/formats.hpp"
#include "encscan/kernels.hpp"
#include "encscan/lab.hpp"
#include "encscan/pipeline.hpp"
#include "encscan/report.hpp"

using namespace encscan;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int64_t> parse_k_list(const std::string& arg) {
    std::vector<int64_t> out;
    auto dots = arg.find("..");
    try {
        if (dots != std::string::npos) {
            int64_t a = std::stoll(arg.substr(0, dots));
            int64_t b = std::stoll(arg.substr(dots + 2));
            if (b < a) throw ContractError("--k-list range " + arg + " is empty");
            for (int64_t k = a; k <= b; ++k) out.push_back(k);
        } else {
            std::string item;
            std::istringstream ss(arg);
            while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
        }
    } catch (const std::logic_error&) {
        throw ContractError("--k-list expects A..B or a comma list, got \"" + arg + "\"");
    }
    cluster::validate_k_list(out);
    return out;
}

lab::TriggerSpec resolve_trigger(const std::string& arg) {
    if (arg == "patch") return lab::default_patch_trigger();
    if (arg == "global") return lab::default_global_trigger();
    return lab::load_trigger_spec(arg);
}

// Flags shared by `scan` and `bench`. Defaults mirror pipeline::ScanConfig.
struct ScanFlags {
    std::string k_list = "2..16";
    int window = 3;
    int restarts = 3;
    int max_iter = 100;
    int64_t score_cap = 2000;
    double data_ratio = 1.0;
    int steps = 1000;
    int batch = 32;
    double lambda0 = 0.01;
    double lr = 0.01;
    double threshold = 2.0;
};

void add_scan_flags(CLI::App* sub, ScanFlags& f) {
    sub->add_option("--k-list", f.k_list, "candidate cluster counts, A..B or comma list");
    sub->add_option("--window", f.window, "smoothing window (odd)");
    sub->add_option("--restarts", f.restarts, "k-means restarts");
    sub->add_option("--max-iter", f.max_iter, "k-means iteration cap");
    sub->add_option("--score-cap", f.score_cap, "silhouette scoring subsample bound");
    sub->add_option("--steps", f.steps, "trigger recovery steps per cluster");
    sub->add_option("--batch", f.batch, "trigger recovery batch size");
    sub->add_option("--lambda0", f.lambda0, "initial penalty weight");
    sub->add_option("--lr", f.lr, "trigger recovery learning rate");
    sub->add_option("--threshold", f.threshold, "anomaly index threshold");
}

void apply_scan_flags(const CLI::App* sub, const ScanFlags& f, pipeline::ScanConfig& cfg) {
    if (sub->count("--k-list")) cfg.k_list = parse_k_list(f.k_list);
    if (sub->count("--window")) cfg.window = f.window;
    if (sub->count("--restarts")) cfg.restarts = f.restarts;
    if (sub->count("--max-iter")) cfg.max_iter = f.max_iter;
    if (sub->count("--score-cap")) cfg.score_cap = f.score_cap;
    if (sub->count("--steps")) cfg.invert.steps = f.steps;
    if (sub->count("--batch")) cfg.invert.batch = f.batch;
    if (sub->count("--lambda0")) cfg.invert.lambda0 = f.lambda0;
    if (sub->count("--lr")) cfg.invert.opt.lr = f.lr;
    if (sub->count("--threshold")) cfg.anomaly.threshold = f.threshold;
}

// Optional JSON config file; recognized keys only, flags override.
void apply_config_file(const std::string& path, pipeline::ScanConfig& cfg, uint64_t& seed) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": not valid JSON: " + e.what());
    }
    static const std::set<std::string> top = {"seed",      "k_list",    "window",
                                              "restarts",  "max_iter",  "score_cap",
                                              "data_ratio", "invert",   "anomaly"};
    static const std::set<std::string> inv = {"steps",          "batch",      "lambda0",
                                              "tau_sim",        "rate_threshold", "patience",
                                              "multiplier",     "lambda_floor",   "lambda_cap",
                                              "lr"};
    static const std::set<std::string> ano = {"consistency", "threshold"};
    try {
        for (const auto& [k, v] : j.items())
            if (!top.count(k)) throw ContractError(path + ": unknown config key \"" + k + "\"");
        if (j.contains("seed")) seed = j["seed"].get<uint64_t>();
        if (j.contains("k_list")) cfg.k_list = j["k_list"].get<std::vector<int64_t>>();
        if (j.contains("window")) cfg.window = j["window"].get<int>();
        if (j.contains("restarts")) cfg.restarts = j["restarts"].get<int>();
        if (j.contains("max_iter")) cfg.max_iter = j["max_iter"].get<int>();
        if (j.contains("score_cap")) cfg.score_cap = j["score_cap"].get<int64_t>();
        if (j.contains("data_ratio")) cfg.data_ratio = j["data_ratio"].get<double>();
        if (j.contains("invert")) {
            for (const auto& [k, v] : j["invert"].items())
                if (!inv.count(k)) throw ContractError(path + ": unknown config key \"invert." + k + "\"");
            const json& iv = j["invert"];
            if (iv.contains("steps")) cfg.invert.steps = iv["steps"].get<int>();
            if (iv.contains("batch")) cfg.invert.batch = iv["batch"].get<int>();
            if (iv.contains("lambda0")) cfg.invert.lambda0 = iv["lambda0"].get<double>();
            if (iv.contains("tau_sim")) cfg.invert.sched.tau_sim = iv["tau_sim"].get<double>();
            if (iv.contains("rate_threshold"))
                cfg.invert.sched.rate_threshold = iv["rate_threshold"].get<double>();
            if (iv.contains("patience")) cfg.invert.sched.patience = iv["patience"].get<int>();
            if (iv.contains("multiplier")) cfg.invert.sched.multiplier = iv["multiplier"].get<double>();
            if (iv.contains("lambda_floor"))
                cfg.invert.sched.lambda_floor = iv["lambda_floor"].get<double>();
            if (iv.contains("lambda_cap")) cfg.invert.sched.lambda_cap = iv["lambda_cap"].get<double>();
            if (iv.contains("lr")) cfg.invert.opt.lr = iv["lr"].get<double>();
        }
        if (j.contains("anomaly")) {
            for (const auto& [k, v] : j["anomaly"].items())
                if (!ano.count(k)) throw ContractError(path + ": unknown config key \"anomaly." + k + "\"");
            const json& an = j["anomaly"];
            if (an.contains("consistency")) cfg.anomaly.consistency = an["consistency"].get<double>();
            if (an.contains("threshold")) cfg.anomaly.threshold = an["threshold"].get<double>();
        }
    } catch (const json::exception& e) {
        throw ContractError(path + ": bad config value: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw FormatError("failed writing " + path);
}

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"encscan: backdoor trigger detection and removal for small self-supervised image encoders"};
    app.set_version_flag("--version", report::kToolVersion);
    app.require_subcommand(1);
    bool serial = false;
    app.add_flag("--serial", serial, "force the serial kernel variants");

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a labeled procedural image dataset");
    int64_t g_classes = 8, g_per_class = 100, g_height = 16, g_width = 16, g_channels = 1;
    double g_noise = 0.08;
    uint64_t g_seed = 0;
    std::string g_out;
    gen->add_option("--classes", g_classes, "number of pattern classes (2..16)")->required();
    gen->add_option("--per-class", g_per_class, "samples per class")->required();
    gen->add_option("--height", g_height, "image height");
    gen->add_option("--width", g_width, "image width");
    gen->add_option("--channels", g_channels, "image channels");
    gen->add_option("--noise", g_noise, "per-pixel gaussian noise sigma");
    gen->add_option("--seed", g_seed, "rng seed");
    gen->add_option("--out", g_out, "output dataset path")->required();

    // ---- train ----
    auto* train = app.add_subcommand("train", "contrastive-train an encoder, optionally planting a trigger");
    std::string t_data, t_out, t_poison;
    int t_epochs = 30, t_batch = 128;
    int64_t t_embedding = 32;
    std::vector<int64_t> t_hidden = {128};
    double t_temperature = 0.5, t_lr = 0.01, t_rate = 0.5;
    int32_t t_target = 0;
    uint64_t t_seed = 0;
    train->add_option("--data", t_data, "training dataset (DSET)")->required();
    train->add_option("--epochs", t_epochs, "training epochs");
    train->add_option("--batch", t_batch, "batch size");
    train->add_option("--hidden", t_hidden, "hidden layer widths");
    train->add_option("--embedding", t_embedding, "embedding dimension");
    train->add_option("--temperature", t_temperature, "contrastive temperature");
    train->add_option("--lr", t_lr, "learning rate");
    train->add_option("--seed", t_seed, "rng seed");
    train->add_option("--out", t_out, "output encoder path")->required();
    auto* t_poison_opt =
        train->add_option("--poison", t_poison, "plant a trigger: patch | global | spec file");
    auto* t_target_opt =
        train->add_option("--target-class", t_target, "class the trigger should pull samples to");
    train->add_option("--poison-rate", t_rate, "fraction of the target class poisoned");
    t_poison_opt->needs(t_target_opt);
    t_target_opt->needs(t_poison_opt);

    // ---- scan ----
    auto* scan = app.add_subcommand("scan", "scan an encoder for backdoor triggers");
    std::string s_encoder, s_data, s_out, s_config;
    double s_ratio = 1.0;
    uint64_t s_seed = 0;
    ScanFlags s_flags;
    scan->add_option("--encoder", s_encoder, "encoder under test (ENCW)")->required();
    scan->add_option("--data", s_data, "unlabeled scan data (DSET)")->required();
    scan->add_option("--data-ratio", s_ratio, "seeded subsample fraction of the data");
    scan->add_option("--seed", s_seed, "rng seed");
    scan->add_option("--out", s_out, "write the scan report here");
    scan->add_option("--config", s_config, "JSON config file (flags override)");
    add_scan_flags(scan, s_flags);

    // ---- mitigate ----
    auto* mit = app.add_subcommand("mitigate", "unlearn the triggers recorded in a scan report");
    std::string m_encoder, m_report, m_data, m_out;
    int m_passes = 1, m_batch = 32;
    double m_attach = 0.5, m_lr = 1e-3;
    uint64_t m_seed = 0;
    mit->add_option("--encoder", m_encoder, "encoder to clean (ENCW)")->required();
    mit->add_option("--report", m_report, "scan report with a trojaned verdict")->required();
    mit->add_option("--data", m_data, "clean data used for unlearning (DSET)")->required();
    mit->add_option("--passes", m_passes, "unlearning passes");
    mit->add_option("--batch", m_batch, "unlearning batch size");
    mit->add_option("--attach-prob", m_attach, "probability a student view carries a trigger");
    mit->add_option("--lr", m_lr, "unlearning learning rate");
    mit->add_option("--seed", m_seed, "rng seed for the unlearning draws");
    mit->add_option("--out", m_out, "output cleaned encoder path")->required();

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "linear-probe accuracy and, with a trigger, attack success rate");
    std::string e_encoder, e_data, e_trigger, e_out;
    int32_t e_target = 0;
    ev->add_option("--encoder", e_encoder, "encoder (ENCW)")->required();
    ev->add_option("--data", e_data, "labeled test dataset (DSET)")->required();
    auto* e_trigger_opt =
        ev->add_option("--trigger", e_trigger, "trigger for ASR: patch | global | spec file");
    auto* e_target_opt = ev->add_option("--target-class", e_target, "trigger's target class");
    ev->add_option("--out", e_out, "also write the metrics JSON here");
    e_trigger_opt->needs(e_target_opt);
    e_target_opt->needs(e_trigger_opt);

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "detection accuracy over a clean/trojaned encoder ensemble");
    int b_clean = 10, b_trojan = 10;
    std::vector<double> b_ratios;
    int64_t b_classes = 8, b_per_class = 100;
    double b_noise = 0.08, b_poison_rate = 0.5;
    int b_epochs = 30;
    uint64_t b_seed = 0;
    std::string b_out;
    ScanFlags b_flags;
    bench->add_option("--n-clean", b_clean, "clean encoders in the ensemble");
    bench->add_option("--n-trojan", b_trojan, "trojaned encoders (half patch, half global)");
    bench->add_option("--data-ratio", b_ratios, "scan data ratio; repeat for a sweep");
    bench->add_option("--classes", b_classes, "fixture classes");
    bench->add_option("--per-class", b_per_class, "fixture samples per class");
    bench->add_option("--noise", b_noise, "fixture noise sigma");
    bench->add_option("--poison-rate", b_poison_rate, "fixture poison rate");
    bench->add_option("--epochs", b_epochs, "fixture training epochs");
    bench->add_option("--seed", b_seed, "rng seed");
    bench->add_option("--out", b_out, "write the benchmark report here");
    add_scan_flags(bench, b_flags);

    // ---- export-plot ----
    auto* exp = app.add_subcommand("export-plot", "export report arrays as CSV plot data");
    std::string x_report, x_dir;
    exp->add_option("--report", x_report, "scan report path")->required();
    exp->add_option("--out", x_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (serial) kern::set_default_mode(kern::ExecMode::serial);

    try {
        if (gen->parsed()) {
            SampleSet set = lab::gen_dataset(g_classes, g_per_class,
                                             ImageGeom{g_height, g_width, g_channels}, g_noise,
                                             RngStream(g_seed, 0));
            save_dataset(set, g_out);
            std::cout << "wrote " << set.count() << " samples (" << g_classes << " classes, "
                      << g_height << "x" << g_width << "x" << g_channels << ") to " << g_out
                      << "\n";
            return 0;
        }

        if (train->parsed()) {
            SampleSet data = load_dataset(t_data);
            lab::TrainConfig tc;
            tc.hidden = t_hidden;
            tc.embedding = t_embedding;
            tc.epochs = t_epochs;
            tc.batch = t_batch;
            tc.temperature = t_temperature;
            tc.opt.lr = t_lr;
            RngStream master(t_seed, 0);
            if (t_poison_opt->count()) {
                lab::TriggerSpec spec = resolve_trigger(t_poison);
                data = lab::poison_dataset(data, spec, t_target, t_rate,
                                           master.derived(RngStream::tag("poison")));
                lab::save_trigger_spec(spec, t_out + ".trigger.json");
                std::cout << "planted " << (spec.kind == lab::TriggerSpec::Kind::patch
                                                ? "patch"
                                                : "global_dct")
                          << " trigger targeting class " << t_target << " (rate " << t_rate
                          << "); ground truth in " << t_out << ".trigger.json\n";
            }
            auto t0 = std::chrono::steady_clock::now();
            EncoderNet net = lab::ssl_train(data, tc, master.derived(RngStream::tag("train")));
            save_encoder(net, t_out);
            std::cout << "trained " << data.count() << " samples, " << t_epochs << " epochs in "
                      << fmt_full(seconds_since(t0)) << " s; encoder written to " << t_out << "\n";
            return 0;
        }

        if (scan->parsed()) {
            pipeline::ScanConfig cfg;
            if (!s_config.empty()) apply_config_file(s_config, cfg, s_seed);
            apply_scan_flags(scan, s_flags, cfg);
            if (scan->count("--data-ratio")) cfg.data_ratio = s_ratio;
            EncoderNet enc = load_encoder(s_encoder);
            SampleSet data = load_dataset(s_data);
            auto t0 = std::chrono::steady_clock::now();
            pipeline::ScanOutcome out = pipeline::run_scan(enc, data, cfg, RngStream(s_seed, 0));

            report::ScanReportData rep;
            rep.seed = s_seed;
            rep.encoder_path = s_encoder;
            rep.encoder_digest = digest_file(s_encoder);
            rep.data_path = s_data;
            rep.data_digest = digest_file(s_data);
            rep.config = cfg;
            rep.outcome = out;
            rep.total_seconds = seconds_since(t0);
            if (!s_out.empty()) report::save_scan_report(rep, s_out);

            std::cout << "scanned " << out.scanned_rows.size() << " rows, chose k="
                      << out.knee.k_chosen << "\n";
            if (out.verdict.trojaned) {
                std::cout << "verdict: trojaned (" << out.verdict.table.size()
                          << " flagged cluster" << (out.verdict.table.size() == 1 ? "" : "s");
                for (const auto& [cid, entries] : out.verdict.table)
                    std::cout << "; cluster " << cid << " " << invert::variant_name(entries.front().variant)
                              << " index " << entries.front().anomaly;
                std::cout << ")\n";
            } else {
                std::cout << "verdict: benign\n";
            }
            if (!s_out.empty()) std::cout << "report written to " << s_out << "\n";
            return out.verdict.trojaned ? 3 : 0;
        }

        if (mit->parsed()) {
            report::ScanReportData rep = report::load_scan_report(m_report);
            if (!rep.outcome.verdict.trojaned) {
                std::cerr << "nothing to mitigate: the scan report's verdict is benign\n";
                return 5;
            }
            EncoderNet enc = load_encoder(m_encoder);
            SampleSet data = load_dataset(m_data);
            if (digest_file(m_encoder) != rep.encoder_digest) {
                std::cerr << "encoder does not match the scan report (digest mismatch)\n";
                return 5;
            }
            if (digest_file(m_data) != rep.data_digest) {
                std::cerr << "data does not match the scan report (digest mismatch)\n";
                return 5;
            }
            unlearn::UnlearnConfig ucfg;
            ucfg.passes = m_passes;
            ucfg.batch = m_batch;
            ucfg.attach_prob = m_attach;
            ucfg.opt.lr = m_lr;
            auto t0 = std::chrono::steady_clock::now();
            pipeline::MitigationOutcome mo = pipeline::run_mitigation(
                enc, data, rep.config, rep.outcome.verdict, rep.outcome.knee.k_chosen, ucfg,
                RngStream(rep.seed, 0), RngStream(m_seed, 0).derived(RngStream::tag("unlearn")));
            save_encoder(mo.cleaned, m_out);

            report::MitigationReportData mrep;
            mrep.seed = m_seed;
            mrep.encoder_path = m_encoder;
            mrep.encoder_digest = rep.encoder_digest;
            mrep.data_path = m_data;
            mrep.data_digest = rep.data_digest;
            mrep.report_path = m_report;
            {
                std::ifstream in(m_report, std::ios::binary);
                std::ostringstream body;
                body << in.rdbuf();
                mrep.report_digest = report::canonical_digest(body.str());
            }
            mrep.output_path = m_out;
            mrep.output_digest = digest_file(m_out);
            mrep.config = ucfg;
            mrep.k_used = mo.k_used;
            for (const auto& [cid, entries] : rep.outcome.verdict.table)
                mrep.flagged_clusters.push_back(cid);
            mrep.loss_curve = mo.stats.loss_curve;
            mrep.drift_cos = mo.drift_cos;
            mrep.total_seconds = seconds_since(t0);
            write_text(m_out + ".report.json", report::to_json(mrep));

            std::cout << "unlearned " << mrep.flagged_clusters.size() << " flagged cluster"
                      << (mrep.flagged_clusters.size() == 1 ? "" : "s") << " over k="
                      << mo.k_used << "; clean-representation drift cos = "
                      << fmt_full(mo.drift_cos) << "\n";
            std::cout << "cleaned encoder written to " << m_out << "\n";
            return 0;
        }

        if (ev->parsed()) {
            EncoderNet enc = load_encoder(e_encoder);
            SampleSet test = load_dataset(e_data);
            if (!test.labeled()) {
                std::cerr << "labels required for evaluation\n";
                return 5;
            }
            json out;
            out["acc"] = lab::eval_acc(enc, test);
            if (e_trigger_opt->count()) {
                lab::TriggerSpec spec = resolve_trigger(e_trigger);
                out["asr"] = lab::eval_asr(enc, test, spec, e_target);
                out["target_class"] = e_target;
            }
            std::string text = out.dump(2) + "\n";
            std::cout << text;
            if (!e_out.empty()) write_text(e_out, text);
            return 0;
        }

        if (bench->parsed()) {
            lab::BenchConfig cfg;
            cfg.n_clean = b_clean;
            cfg.n_trojan = b_trojan;
            if (!b_ratios.empty()) cfg.ratios = b_ratios;
            cfg.fixture.classes = b_classes;
            cfg.fixture.per_class = b_per_class;
            cfg.fixture.noise_sigma = b_noise;
            cfg.fixture.poison_rate = b_poison_rate;
            cfg.fixture.train.epochs = b_epochs;
            apply_scan_flags(bench, b_flags, cfg.scan);
            auto t0 = std::chrono::steady_clock::now();
            lab::BenchReport result = lab::bench_dacc(cfg, RngStream(b_seed, 0));

            report::BenchReportData rep;
            rep.seed = b_seed;
            rep.config = cfg;
            rep.result = result;
            rep.total_seconds = seconds_since(t0);
            if (!b_out.empty()) write_text(b_out, report::to_json(rep));

            std::printf("%-8s %4s %4s %8s\n", "ratio", "tp", "fp", "dacc");
            for (const auto& row : result.rows)
                std::printf("%-8.3f %4d %4d %8.3f\n", row.ratio, row.tp, row.fp, row.dacc);
            if (!b_out.empty()) std::cout << "report written to " << b_out << "\n";
            return 0;
        }

        if (exp->parsed()) {
            report::ScanReportData rep = report::load_scan_report(x_report);
            std::filesystem::create_directories(x_dir);

            std::string curve = "k,s,swk_s,d\n";
            const auto& knee = rep.outcome.knee;
            for (size_t i = 0; i < knee.k_list.size(); ++i)
                curve += std::to_string(knee.k_list[i]) + "," + fmt_full(knee.s_list[i]) + "," +
                         fmt_full(knee.smoothed_s_list[i]) + "," + fmt_full(knee.d_list[i]) + "\n";
            write_text(x_dir + "/swk_curve.csv", curve);

            std::string stats = "cluster,size,norm,size_anom,norm_anom\n";
            const auto& v = rep.outcome.verdict;
            for (size_t i = 0; i < v.size_values.size(); ++i)
                stats += std::to_string(i) + "," + fmt_full(v.size_values[i]) + "," +
                         fmt_full(v.norm_values[i]) + "," + fmt_full(v.size_anomaly[i]) + "," +
                         fmt_full(v.norm_anomaly[i]) + "\n";
            write_text(x_dir + "/trigger_stats.csv", stats);

            std::cout << "wrote " << x_dir << "/swk_curve.csv and " << x_dir
                      << "/trigger_stats.csv\n";
            return 0;
        }
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const DegenerateInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
