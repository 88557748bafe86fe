#include "encscan/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>

#include <json.hpp>

#include "encscan/formats.hpp"
#include "encscan/kernels.hpp"

namespace encscan::lab {

using nlohmann::json;

// ---- procedural class patterns ----

namespace {

// One pixel of the class pattern. The library holds oriented bars (ids 0, 1,
// 4, 8, 9, 12, 14, 15), blobs (3, 5, 7, 11, 13) and checkers (2, 6, 10),
// each parameterized by class id. Two constraints shape the choices:
//   * class identity rests on many redundant pixels, so moving one class's
//     representation onto another's requires repainting a large region, and
//   * the standard augmentations keep classes apart: translations only shift
//     a pattern's phase, and no pattern's mirror image coincides with a
//     different class's pattern.
float pattern_value(int64_t class_id, int64_t r, int64_t c, const ImageGeom& g) {
    const float lo = 0.35f, hi = 0.65f;
    const int64_t fine = std::max<int64_t>(2, g.height / 8);  // bar half-period (px)
    const int64_t wide = 2 * fine;
    const double yc = (static_cast<double>(g.height) - 1.0) / 2.0;
    const double xc = (static_cast<double>(g.width) - 1.0) / 2.0;
    const double dy = static_cast<double>(r) - yc, dx = static_cast<double>(c) - xc;
    const double rad = std::sqrt(dy * dy + dx * dx);
    const double R = static_cast<double>(g.height) / 4.0;
    // Twin discs sit at one quarter / three quarters of the width, mirror
    // images of each other, so a horizontal flip maps the pair to itself.
    auto twin = [&](double row_frac) {
        double ty = row_frac * (static_cast<double>(g.height) - 1.0);
        double tx1 = 0.25 * (static_cast<double>(g.width) - 1.0);
        double tx2 = 0.75 * (static_cast<double>(g.width) - 1.0);
        double d1 = std::hypot(static_cast<double>(r) - ty, static_cast<double>(c) - tx1);
        double d2 = std::hypot(static_cast<double>(r) - ty, static_cast<double>(c) - tx2);
        return std::min(d1, d2) <= R * 0.7 ? hi : lo;
    };
    switch (class_id) {
        case 0: return (r / fine) % 2 ? hi : lo;                        // horizontal bars
        case 1: return (c / fine) % 2 ? hi : lo;                        // vertical bars
        case 2: return ((r / fine) + (c / fine)) % 2 ? hi : lo;         // fine checker
        case 3: return rad <= R ? hi : lo;                              // centered disc
        case 4: return ((r + c) / fine) % 2 ? hi : lo;                  // diagonal bars
        case 5: return rad >= R && rad <= R + static_cast<double>(fine) ? hi : lo;  // ring
        case 6: return ((r / wide) + (c / wide)) % 2 ? hi : lo;         // coarse checker
        case 7: return twin(0.25);                                      // twin discs, top
        case 8: return (r / wide) % 2 ? hi : lo;                        // wide horizontal bars
        case 9: return (c / wide) % 2 ? hi : lo;                        // wide vertical bars
        case 10: return ((r / (2 * wide)) + (c / (2 * wide))) % 2 ? hi : lo;  // quadrant checker
        case 11: return twin(0.75);                                     // twin discs, bottom
        case 12: return ((r + c) / wide) % 2 ? hi : lo;                 // wide diagonal bars
        case 13: return std::abs(dy) <= static_cast<double>(fine) ||
                                std::abs(dx) <= static_cast<double>(fine)
                            ? hi
                            : lo;                                       // thick cross
        case 14: return r % 2 ? hi : lo;                                // finest horizontal bars
        default: return c % 2 ? hi : lo;                                // finest vertical bars
    }
}

}  // namespace

Tensor class_pattern(int64_t class_id, ImageGeom geom) {
    if (class_id < 0 || class_id > 15)
        throw ContractError("class_pattern: pattern library covers class ids 0..15, got " +
                            std::to_string(class_id));
    if (geom.height < 12 || geom.width < 12)
        throw ContractError("class_pattern: geometry " + std::to_string(geom.height) + "x" +
                            std::to_string(geom.width) + " too small for the patterns (need >= 12x12)");
    Tensor img = Tensor::zeros({geom.dim()});
    for (int64_t r = 0; r < geom.height; ++r)
        for (int64_t c = 0; c < geom.width; ++c) {
            float v = pattern_value(class_id, r, c, geom);
            for (int64_t ch = 0; ch < geom.channels; ++ch)
                img.data[static_cast<size_t>((r * geom.width + c) * geom.channels + ch)] = v;
        }
    return img;
}

SampleSet gen_dataset(int64_t classes, int64_t per_class, ImageGeom geom,
                      double noise_sigma, RngStream stream) {
    if (classes < 2)
        throw ContractError("gen_dataset: need at least 2 classes, got " + std::to_string(classes));
    if (classes > 16)
        throw ContractError("gen_dataset: pattern library supports at most 16 classes");
    if (per_class < 1) throw ContractError("gen_dataset: per_class must be >= 1");
    if (noise_sigma < 0.0) throw ContractError("gen_dataset: noise sigma must be >= 0");

    SampleSet set;
    set.geom = geom;
    set.samples = Tensor::zeros({classes * per_class, geom.dim()});
    std::vector<int32_t> labels(static_cast<size_t>(classes * per_class));

    int64_t row = 0;
    for (int64_t c = 0; c < classes; ++c) {
        Tensor base = class_pattern(c, geom);
        for (int64_t s = 0; s < per_class; ++s, ++row) {
            float* dst = set.samples.row(row);
            for (int64_t j = 0; j < geom.dim(); ++j) {
                double v = base.data[static_cast<size_t>(j)];
                if (noise_sigma > 0.0) v += stream.next_normal(noise_sigma);
                dst[j] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
            }
            labels[static_cast<size_t>(row)] = static_cast<int32_t>(c);
        }
    }
    set.labels = std::move(labels);
    return set;
}

// ---- triggers ----

TriggerSpec default_patch_trigger() {
    TriggerSpec spec;
    spec.kind = TriggerSpec::Kind::patch;
    spec.row = 10;
    spec.col = 10;
    spec.side = 3;
    spec.pattern.assign(9, 1.0f);
    return spec;
}

TriggerSpec default_global_trigger() {
    TriggerSpec spec;
    spec.kind = TriggerSpec::Kind::global_dct;
    spec.coeffs = {{0, 1}, {1, 0}, {1, 1}, {2, 0}};
    spec.amplitude = 0.08;
    return spec;
}

void dct2(const float* img, int64_t h, int64_t w, double* coeffs) {
    std::vector<double> tmp(static_cast<size_t>(h * w));
    const double pi = std::numbers::pi;
    for (int64_t u = 0; u < h; ++u) {
        double au = std::sqrt((u == 0 ? 1.0 : 2.0) / static_cast<double>(h));
        for (int64_t y = 0; y < w; ++y) {
            double acc = 0.0;
            for (int64_t x = 0; x < h; ++x)
                acc += static_cast<double>(img[x * w + y]) *
                       std::cos(pi * (2.0 * static_cast<double>(x) + 1.0) * static_cast<double>(u) /
                                (2.0 * static_cast<double>(h)));
            tmp[static_cast<size_t>(u * w + y)] = au * acc;
        }
    }
    for (int64_t u = 0; u < h; ++u) {
        for (int64_t v = 0; v < w; ++v) {
            double av = std::sqrt((v == 0 ? 1.0 : 2.0) / static_cast<double>(w));
            double acc = 0.0;
            for (int64_t y = 0; y < w; ++y)
                acc += tmp[static_cast<size_t>(u * w + y)] *
                       std::cos(pi * (2.0 * static_cast<double>(y) + 1.0) * static_cast<double>(v) /
                                (2.0 * static_cast<double>(w)));
            coeffs[u * w + v] = av * acc;
        }
    }
}

void idct2(const double* coeffs, int64_t h, int64_t w, float* img) {
    std::vector<double> tmp(static_cast<size_t>(h * w));
    const double pi = std::numbers::pi;
    for (int64_t u = 0; u < h; ++u) {
        for (int64_t y = 0; y < w; ++y) {
            double acc = 0.0;
            for (int64_t v = 0; v < w; ++v) {
                double av = std::sqrt((v == 0 ? 1.0 : 2.0) / static_cast<double>(w));
                acc += av * coeffs[u * w + v] *
                       std::cos(pi * (2.0 * static_cast<double>(y) + 1.0) * static_cast<double>(v) /
                                (2.0 * static_cast<double>(w)));
            }
            tmp[static_cast<size_t>(u * w + y)] = acc;
        }
    }
    for (int64_t x = 0; x < h; ++x) {
        for (int64_t y = 0; y < w; ++y) {
            double acc = 0.0;
            for (int64_t u = 0; u < h; ++u) {
                double au = std::sqrt((u == 0 ? 1.0 : 2.0) / static_cast<double>(h));
                acc += au * tmp[static_cast<size_t>(u * w + y)] *
                       std::cos(pi * (2.0 * static_cast<double>(x) + 1.0) * static_cast<double>(u) /
                                (2.0 * static_cast<double>(h)));
            }
            img[x * w + y] = static_cast<float>(acc);
        }
    }
}

namespace {

void validate_trigger_spec(const TriggerSpec& spec, const ImageGeom& geom) {
    if (spec.kind == TriggerSpec::Kind::patch) {
        if (spec.side < 1) throw ContractError("trigger patch side must be >= 1");
        if (spec.row < 0 || spec.col < 0 || spec.row + spec.side > geom.height ||
            spec.col + spec.side > geom.width)
            throw ContractError("trigger patch at (" + std::to_string(spec.row) + "," +
                                std::to_string(spec.col) + ") side " + std::to_string(spec.side) +
                                " leaves the " + std::to_string(geom.height) + "x" +
                                std::to_string(geom.width) + " image");
        if (static_cast<int64_t>(spec.pattern.size()) != spec.side * spec.side)
            throw ContractError("trigger patch pattern has " + std::to_string(spec.pattern.size()) +
                                " values, expected " + std::to_string(spec.side * spec.side));
        for (float v : spec.pattern)
            if (!(v >= 0.0f && v <= 1.0f))
                throw ContractError("trigger patch pattern value outside [0,1]");
    } else {
        if (spec.coeffs.empty()) throw ContractError("global trigger needs at least one coefficient");
        for (auto [u, v] : spec.coeffs)
            if (u < 0 || v < 0 || u >= geom.height || v >= geom.width)
                throw ContractError("global trigger coefficient (" + std::to_string(u) + "," +
                                    std::to_string(v) + ") outside the spectrum");
        if (!std::isfinite(spec.amplitude))
            throw ContractError("global trigger amplitude must be finite");
    }
}

}  // namespace

Tensor apply_trigger_spec(const float* x, const ImageGeom& geom, const TriggerSpec& spec) {
    validate_trigger_spec(spec, geom);
    Tensor out = Tensor::zeros({geom.dim()});
    std::copy_n(x, geom.dim(), out.data.data());
    if (spec.kind == TriggerSpec::Kind::patch) {
        for (int64_t i = 0; i < spec.side; ++i)
            for (int64_t j = 0; j < spec.side; ++j) {
                float v = spec.pattern[static_cast<size_t>(i * spec.side + j)];
                for (int64_t ch = 0; ch < geom.channels; ++ch)
                    out.data[static_cast<size_t>(((spec.row + i) * geom.width + spec.col + j) *
                                                     geom.channels +
                                                 ch)] = v;
            }
        return out;
    }
    // Frequency-domain trigger, applied per channel.
    std::vector<float> plane(static_cast<size_t>(geom.height * geom.width));
    std::vector<double> coeffs(plane.size());
    for (int64_t ch = 0; ch < geom.channels; ++ch) {
        for (int64_t p = 0; p < geom.height * geom.width; ++p)
            plane[static_cast<size_t>(p)] = out.data[static_cast<size_t>(p * geom.channels + ch)];
        dct2(plane.data(), geom.height, geom.width, coeffs.data());
        for (auto [u, v] : spec.coeffs) coeffs[static_cast<size_t>(u * geom.width + v)] += spec.amplitude;
        idct2(coeffs.data(), geom.height, geom.width, plane.data());
        for (int64_t p = 0; p < geom.height * geom.width; ++p) {
            float v = plane[static_cast<size_t>(p)];
            out.data[static_cast<size_t>(p * geom.channels + ch)] =
                v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        }
    }
    return out;
}

Tensor apply_trigger_spec(const Tensor& x, const ImageGeom& geom, const TriggerSpec& spec) {
    if (x.size() != geom.dim())
        throw ContractError("apply_trigger_spec: sample dim " + std::to_string(x.size()) +
                            " does not match geometry dim " + std::to_string(geom.dim()));
    return apply_trigger_spec(x.data.data(), geom, spec);
}

void save_trigger_spec(const TriggerSpec& spec, const std::string& path) {
    json j;
    if (spec.kind == TriggerSpec::Kind::patch) {
        j["kind"] = "patch";
        j["row"] = spec.row;
        j["col"] = spec.col;
        j["side"] = spec.side;
        j["pattern"] = spec.pattern;
    } else {
        j["kind"] = "global_dct";
        json cs = json::array();
        for (auto [u, v] : spec.coeffs) cs.push_back({u, v});
        j["coeffs"] = cs;
        j["amplitude"] = spec.amplitude;
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

TriggerSpec load_trigger_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": not valid JSON: " + e.what());
    }
    TriggerSpec spec;
    try {
        std::string kind = j.at("kind").get<std::string>();
        if (kind == "patch") {
            spec.kind = TriggerSpec::Kind::patch;
            spec.row = j.at("row").get<int64_t>();
            spec.col = j.at("col").get<int64_t>();
            spec.side = j.at("side").get<int64_t>();
            spec.pattern = j.at("pattern").get<std::vector<float>>();
        } else if (kind == "global_dct") {
            spec.kind = TriggerSpec::Kind::global_dct;
            spec.coeffs.clear();
            for (const auto& c : j.at("coeffs"))
                spec.coeffs.emplace_back(c.at(0).get<int64_t>(), c.at(1).get<int64_t>());
            spec.amplitude = j.at("amplitude").get<double>();
        } else {
            throw FormatError(path + ": unknown trigger kind \"" + kind + "\"");
        }
    } catch (const json::exception& e) {
        throw FormatError(path + ": bad trigger spec: " + e.what());
    }
    return spec;
}

SampleSet poison_dataset(const SampleSet& data, const TriggerSpec& spec, int32_t target_class,
                         double rate, RngStream stream) {
    data.validate();
    if (!data.labeled()) throw ContractError("poison_dataset: dataset has no labels");
    if (rate <= 0.0 || rate > 1.0)
        throw ContractError("poison rate must be in (0, 1], got " + std::to_string(rate));
    validate_trigger_spec(spec, data.geom);

    std::vector<int64_t> targets;
    for (int64_t i = 0; i < data.count(); ++i)
        if ((*data.labels)[static_cast<size_t>(i)] == target_class) targets.push_back(i);
    if (targets.empty())
        throw ContractError("poison_dataset: no samples carry target class " +
                            std::to_string(target_class));

    int64_t count = static_cast<int64_t>(
        std::ceil(rate * static_cast<double>(targets.size()) - 1e-9));
    count = std::min<int64_t>(count, static_cast<int64_t>(targets.size()));

    for (int64_t i = 0; i < count; ++i) {
        int64_t j = i + static_cast<int64_t>(stream.next_below(targets.size() - static_cast<size_t>(i)));
        std::swap(targets[static_cast<size_t>(i)], targets[static_cast<size_t>(j)]);
    }
    targets.resize(static_cast<size_t>(count));
    std::sort(targets.begin(), targets.end());

    SampleSet out = data;
    for (int64_t idx : targets) {
        Tensor poisoned = apply_trigger_spec(out.samples.row(idx), out.geom, spec);
        std::copy_n(poisoned.data.data(), out.geom.dim(), out.samples.row(idx));
    }
    return out;
}

// ---- contrastive training ----

double ntxent_loss(const Tensor& embeddings, double temperature, Tensor* d_embeddings) {
    if (embeddings.shape.size() != 2)
        throw ContractError("ntxent_loss: embeddings must be 2-D");
    int64_t n = embeddings.rows(), e = embeddings.cols();
    if (n < 2 || n % 2 != 0)
        throw ContractError("ntxent_loss: needs an even stack of at least 2 views, got " +
                            std::to_string(n));
    if (temperature <= 0.0) throw ContractError("ntxent_loss: temperature must be positive");
    int64_t b = n / 2;

    Tensor sim = Tensor::zeros({n, n});
    kern::gemm_nt(embeddings.data.data(), n, e, embeddings.data.data(), n, sim.data.data());

    Tensor g = Tensor::zeros({n, n});
    double loss = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        int64_t partner = i < b ? i + b : i - b;
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t k = 0; k < n; ++k) {
            if (k == i) continue;
            mx = std::max(mx, static_cast<double>(sim.at(i, k)) / temperature);
        }
        double denom = 0.0;
        for (int64_t k = 0; k < n; ++k) {
            if (k == i) continue;
            denom += std::exp(static_cast<double>(sim.at(i, k)) / temperature - mx);
        }
        double s_pos = static_cast<double>(sim.at(i, partner)) / temperature;
        loss += (-s_pos + mx + std::log(denom)) / static_cast<double>(n);
        if (d_embeddings) {
            for (int64_t k = 0; k < n; ++k) {
                if (k == i) continue;
                double p = std::exp(static_cast<double>(sim.at(i, k)) / temperature - mx) / denom;
                double coeff = (p - (k == partner ? 1.0 : 0.0)) / static_cast<double>(n);
                g.at(i, k) = static_cast<float>(coeff / temperature);
            }
        }
    }
    if (d_embeddings) {
        // dZ = (G + G^T) Z; the 1/temperature factor is already folded into G.
        Tensor gs = Tensor::zeros({n, n});
        for (int64_t i = 0; i < n; ++i)
            for (int64_t k = 0; k < n; ++k) gs.at(i, k) = g.at(i, k) + g.at(k, i);
        *d_embeddings = Tensor::zeros({n, e});
        kern::gemm_nn(gs.data.data(), n, n, embeddings.data.data(), e, d_embeddings->data.data());
    }
    return loss;
}

EncoderNet ssl_train(const SampleSet& data, const TrainConfig& cfg, RngStream stream) {
    data.validate();
    if (data.count() < 2) throw ContractError("ssl_train: need at least 2 samples");
    if (cfg.epochs < 0) throw ContractError("ssl_train: epochs must be >= 0");
    if (cfg.batch < 2) throw ContractError("ssl_train: batch must be >= 2");
    if (cfg.temperature <= 0.0) throw ContractError("ssl_train: temperature must be positive");
    if (!cfg.normalize)
        throw ContractError("ssl_train: contrastive loss expects normalized embeddings");
    if (cfg.embedding < 1) throw ContractError("ssl_train: embedding dim must be >= 1");

    std::vector<int64_t> dims;
    dims.push_back(data.geom.dim());
    for (int64_t hdim : cfg.hidden) dims.push_back(hdim);
    dims.push_back(cfg.embedding);

    RngStream init_rng = stream.derived(RngStream::tag("init"));
    EncoderNet net = EncoderNet::random_init(dims, cfg.act, cfg.normalize, init_rng);
    if (cfg.epochs == 0) return net;

    RngStream tr = stream.derived(RngStream::tag("train"));
    OptimizerState opt(cfg.opt);
    int64_t n = data.count(), d = data.geom.dim();
    std::vector<int64_t> perm(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;

    long long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int64_t i = 0; i < n - 1; ++i) {
            int64_t j = i + static_cast<int64_t>(tr.next_below(static_cast<uint64_t>(n - i)));
            std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
        }
        for (int64_t start = 0; start < n; start += cfg.batch) {
            int64_t b = std::min<int64_t>(cfg.batch, n - start);
            if (b < 2) break;  // a lone sample has no contrastive partner
            Tensor views = Tensor::zeros({2 * b, d});
            for (int64_t p = 0; p < b; ++p) {
                const float* x = data.samples.row(perm[static_cast<size_t>(start + p)]);
                Tensor v1 = unlearn::augment(x, data.geom, cfg.aug, tr);
                Tensor v2 = unlearn::augment(x, data.geom, cfg.aug, tr);
                std::copy_n(v1.data.data(), d, views.row(p));
                std::copy_n(v2.data.data(), d, views.row(b + p));
            }
            Tensor z = net.forward(views);
            Tensor dz;
            double loss = ntxent_loss(z, cfg.temperature, &dz);
            ++step;
            if (!std::isfinite(loss))
                throw TrainingError("contrastive loss diverged at step " + std::to_string(step), step);
            ParamGrads grads = net.grad_wrt_params(views, dz);
            std::vector<ParamRef> params;
            for (size_t l = 0; l < net.layer_count(); ++l) {
                params.push_back({&net.weights[l], &grads.dweights[l],
                                  "layer" + std::to_string(l) + ".weight"});
                params.push_back({&net.biases[l], &grads.dbiases[l],
                                  "layer" + std::to_string(l) + ".bias"});
            }
            opt.step(params);
        }
    }
    return net;
}

// ---- probes ----

namespace {

struct ProbeSplit {
    std::vector<int64_t> fit, score;
};

ProbeSplit stratified_split(const std::vector<int32_t>& labels) {
    // Per class: even occurrences fit the centroids, odd ones get scored.
    ProbeSplit sp;
    std::map<int32_t, int64_t> seen;
    for (size_t i = 0; i < labels.size(); ++i) {
        int64_t k = seen[labels[i]]++;
        (k % 2 == 0 ? sp.fit : sp.score).push_back(static_cast<int64_t>(i));
    }
    return sp;
}

struct Centroids {
    int64_t classes = 0;
    std::vector<double> mean;        // [classes x e]
    std::vector<char> defined;       // class had at least one fit sample
};

Centroids fit_centroids(const Tensor& reps, const std::vector<int32_t>& labels,
                        const std::vector<int64_t>& fit_rows) {
    Centroids c;
    for (int64_t i : fit_rows) c.classes = std::max<int64_t>(c.classes, labels[static_cast<size_t>(i)] + 1);
    int64_t e = reps.cols();
    c.mean.assign(static_cast<size_t>(c.classes * e), 0.0);
    c.defined.assign(static_cast<size_t>(c.classes), 0);
    std::vector<int64_t> counts(static_cast<size_t>(c.classes), 0);
    for (int64_t i : fit_rows) {
        int32_t lab = labels[static_cast<size_t>(i)];
        const float* r = reps.row(i);
        double* m = c.mean.data() + static_cast<int64_t>(lab) * e;
        for (int64_t j = 0; j < e; ++j) m[j] += r[j];
        ++counts[static_cast<size_t>(lab)];
    }
    for (int64_t k = 0; k < c.classes; ++k) {
        if (counts[static_cast<size_t>(k)] == 0) continue;
        c.defined[static_cast<size_t>(k)] = 1;
        double* m = c.mean.data() + k * e;
        for (int64_t j = 0; j < e; ++j) m[j] /= static_cast<double>(counts[static_cast<size_t>(k)]);
    }
    return c;
}

int32_t nearest_class(const Centroids& c, const float* rep, int64_t e) {
    int32_t best = -1;
    double best_d = 0.0;
    for (int64_t k = 0; k < c.classes; ++k) {
        if (!c.defined[static_cast<size_t>(k)]) continue;
        const double* m = c.mean.data() + k * e;
        double acc = 0.0;
        for (int64_t j = 0; j < e; ++j) {
            double t = static_cast<double>(rep[j]) - m[j];
            acc += t * t;
        }
        if (best < 0 || acc < best_d) {  // strict: ties stay with the smaller class id
            best = static_cast<int32_t>(k);
            best_d = acc;
        }
    }
    return best;
}

}  // namespace

double eval_acc(const EncoderNet& enc, const SampleSet& test) {
    test.validate();
    if (!test.labeled()) throw ContractError("eval_acc: labels required for evaluation");
    ProbeSplit sp = stratified_split(*test.labels);
    if (sp.score.empty())
        throw DegenerateInputError("eval_acc: evaluation split is empty (need >= 2 samples per class)");
    Tensor reps = enc.forward(test.samples);
    Centroids cent = fit_centroids(reps, *test.labels, sp.fit);
    int64_t hits = 0;
    for (int64_t i : sp.score) {
        int32_t pred = nearest_class(cent, reps.row(i), reps.cols());
        if (pred == (*test.labels)[static_cast<size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sp.score.size());
}

double eval_asr(const EncoderNet& enc, const SampleSet& test, const TriggerSpec& spec,
                int32_t target_class) {
    test.validate();
    if (!test.labeled()) throw ContractError("eval_asr: labels required for evaluation");
    validate_trigger_spec(spec, test.geom);
    ProbeSplit sp = stratified_split(*test.labels);
    Tensor reps = enc.forward(test.samples);
    Centroids cent = fit_centroids(reps, *test.labels, sp.fit);

    std::vector<int64_t> victims;
    for (int64_t i : sp.score)
        if ((*test.labels)[static_cast<size_t>(i)] != target_class) victims.push_back(i);
    if (victims.empty())
        throw ContractError("eval_asr: no non-target samples to attack");

    Tensor attacked = Tensor::zeros({static_cast<int64_t>(victims.size()), test.geom.dim()});
    for (size_t i = 0; i < victims.size(); ++i) {
        Tensor t = apply_trigger_spec(test.samples.row(victims[i]), test.geom, spec);
        std::copy_n(t.data.data(), test.geom.dim(), attacked.row(static_cast<int64_t>(i)));
    }
    Tensor areps = enc.forward(attacked);
    int64_t hits = 0;
    for (int64_t i = 0; i < areps.rows(); ++i)
        if (nearest_class(cent, areps.row(i), areps.cols()) == target_class) ++hits;
    return static_cast<double>(hits) / static_cast<double>(victims.size());
}

// ---- detection benchmark ----

BenchReport bench_dacc(const BenchConfig& cfg, RngStream stream) {
    if (cfg.n_clean < 0 || cfg.n_trojan < 0 || cfg.n_clean + cfg.n_trojan < 2)
        throw ContractError("bench_dacc: ensemble needs at least 2 encoders");
    if (cfg.ratios.empty()) throw ContractError("bench_dacc: no data ratios given");
    for (double r : cfg.ratios)
        if (r <= 0.0 || r > 1.0)
            throw ContractError("bench_dacc: data ratio " + std::to_string(r) + " outside (0,1]");

    int total = cfg.n_clean + cfg.n_trojan;
    int patch_count = (cfg.n_trojan + 1) / 2;  // odd counts give the extra to the patch kind

    std::vector<EncoderNet> members;
    std::vector<SampleSet> member_data;
    std::vector<uint8_t> truth;
    members.reserve(static_cast<size_t>(total));
    for (int m = 0; m < total; ++m) {
        RngStream ms = stream.derived(static_cast<uint64_t>(m));
        SampleSet data = gen_dataset(cfg.fixture.classes, cfg.fixture.per_class, cfg.fixture.geom,
                                     cfg.fixture.noise_sigma, ms.derived(RngStream::tag("data")));
        bool trojaned = m >= cfg.n_clean;
        if (trojaned) {
            const TriggerSpec& spec =
                (m - cfg.n_clean) < patch_count ? cfg.fixture.patch : cfg.fixture.global;
            int32_t target = static_cast<int32_t>(
                ms.derived(RngStream::tag("target")).next_below(static_cast<uint64_t>(cfg.fixture.classes)));
            data = poison_dataset(data, spec, target, cfg.fixture.poison_rate,
                                  ms.derived(RngStream::tag("poison")));
        }
        EncoderNet enc = ssl_train(data, cfg.fixture.train, ms.derived(RngStream::tag("train")));
        SampleSet unlabeled;
        unlabeled.geom = data.geom;
        unlabeled.samples = std::move(data.samples);
        members.push_back(std::move(enc));
        member_data.push_back(std::move(unlabeled));
        truth.push_back(trojaned ? 1 : 0);
    }

    BenchReport report;
    report.n_clean = cfg.n_clean;
    report.n_trojan = cfg.n_trojan;
    for (size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
        BenchRow row;
        row.ratio = cfg.ratios[ri];
        row.truth = truth;
        for (int m = 0; m < total; ++m) {
            pipeline::ScanConfig sc = cfg.scan;
            sc.data_ratio = cfg.ratios[ri];
            RngStream scan_rng =
                stream.derived(static_cast<uint64_t>(m)).derived(RngStream::tag("scan")).derived(ri);
            pipeline::ScanOutcome outcome =
                pipeline::run_scan(members[static_cast<size_t>(m)],
                                   member_data[static_cast<size_t>(m)], sc, scan_rng);
            bool flagged = outcome.verdict.trojaned;
            row.verdict.push_back(flagged ? 1 : 0);
            if (flagged && truth[static_cast<size_t>(m)]) ++row.tp;
            if (flagged && !truth[static_cast<size_t>(m)]) ++row.fp;
        }
        row.dacc = (static_cast<double>(row.tp) + static_cast<double>(cfg.n_clean - row.fp)) /
                   static_cast<double>(total);
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace encscan::lab
