#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "encscan/dataset.hpp"
#include "encscan/encoder.hpp"
#include "encscan/pipeline.hpp"
#include "encscan/rng.hpp"
#include "encscan/unlearn.hpp"

namespace encscan::lab {

// ---- data generation ----
//
// Toy grayscale images in [0,1]. Each class is a distinct procedural pattern
// (oriented bars, blobs or checkers, parameterized by class id) plus
// per-pixel Gaussian noise. Patterns spread class identity over many pixels
// and are chosen so the standard augmentations (small translations,
// horizontal flips) never map one class's pattern onto another's. Up to 16
// classes stay pairwise distinct at 16x16.
SampleSet gen_dataset(int64_t classes, int64_t per_class, ImageGeom geom,
                      double noise_sigma, RngStream stream);

Tensor class_pattern(int64_t class_id, ImageGeom geom);  // noise-free base image

// ---- planted triggers ----

struct TriggerSpec {
    enum class Kind : uint8_t { patch, global_dct };
    Kind kind = Kind::patch;
    // patch: overwrite a side x side square at (row, col) with `pattern`
    // (side*side values, applied to every channel).
    int64_t row = 10, col = 10, side = 3;
    std::vector<float> pattern;
    // global_dct: add `amplitude` to the listed (u, v) coefficients of the
    // orthonormal type-II DCT, invert, clip to [0,1].
    std::vector<std::pair<int64_t, int64_t>> coeffs;
    double amplitude = 0.08;
};

TriggerSpec default_patch_trigger();    // solid 3x3 patch at (10,10)
TriggerSpec default_global_trigger();   // coefficients (0,1),(1,0),(1,1),(2,0), amplitude 0.08

void save_trigger_spec(const TriggerSpec& spec, const std::string& path);
TriggerSpec load_trigger_spec(const std::string& path);

Tensor apply_trigger_spec(const float* x, const ImageGeom& geom, const TriggerSpec& spec);
Tensor apply_trigger_spec(const Tensor& x, const ImageGeom& geom, const TriggerSpec& spec);

// Orthonormal 2-D type-II DCT and its inverse (exact round-trip), one channel.
void dct2(const float* img, int64_t h, int64_t w, double* coeffs);
void idct2(const double* coeffs, int64_t h, int64_t w, float* img);

// Applies the trigger to ceil(rate * |target class|) seeded-chosen samples of
// the target class; everything else is copied bit for bit.
SampleSet poison_dataset(const SampleSet& data, const TriggerSpec& spec, int32_t target_class,
                         double rate, RngStream stream);

// ---- self-supervised training ----

struct TrainConfig {
    std::vector<int64_t> hidden = {128};  // layer widths between input and embedding
    int64_t embedding = 32;
    Activation act = Activation::relu;
    bool normalize = true;
    int epochs = 40;
    int batch = 128;
    double temperature = 0.5;
    OptimizerConfig opt;  // adam, lr 1e-2
    unlearn::AugmentationSpec aug = unlearn::AugmentationSpec::standard();
};

// Contrastive training: two augmented views per sample, normalized-temperature
// cross entropy over the 2B x 2B cosine similarities. Deterministic in the
// stream; throws TrainingError (with the step index) if the loss leaves the
// finite range. epochs = 0 returns the seeded init untouched.
EncoderNet ssl_train(const SampleSet& data, const TrainConfig& cfg, RngStream stream);

// Loss and embedding gradient for one batch of 2B stacked views (first all
// view-1 rows, then all view-2 rows). Exposed for gradient checking.
double ntxent_loss(const Tensor& embeddings, double temperature, Tensor* d_embeddings);

// ---- probes ----
//
// Both probes fit per-class centroids on a deterministic stratified half of
// the labeled test set (even occurrence per class) and score the other half.
// eval_asr applies the trigger to every scored non-target sample and reports
// the fraction pulled to the target class.
double eval_acc(const EncoderNet& enc, const SampleSet& test);
double eval_asr(const EncoderNet& enc, const SampleSet& test, const TriggerSpec& spec,
                int32_t target_class);

// ---- detection benchmark ----

struct FixtureParams {
    int64_t classes = 8;
    int64_t per_class = 100;
    ImageGeom geom;
    double noise_sigma = 0.08;
    double poison_rate = 0.5;
    TrainConfig train;
    TriggerSpec patch = default_patch_trigger();
    TriggerSpec global = default_global_trigger();
};

struct BenchConfig {
    int n_clean = 10;
    int n_trojan = 10;  // first half planted with patch, second half with global_dct
    std::vector<double> ratios = {0.10};
    FixtureParams fixture;
    pipeline::ScanConfig scan;
};

struct BenchRow {
    double ratio = 0.0;
    int tp = 0, fp = 0;
    double dacc = 0.0;  // (tp + clean correctly passed) / total
    std::vector<uint8_t> truth;    // 1 = trojaned encoder
    std::vector<uint8_t> verdict;  // 1 = flagged by the scan
};

struct BenchReport {
    int n_clean = 0, n_trojan = 0;
    std::vector<BenchRow> rows;
};

// Trains the encoder ensemble once (derived stream per member), then scans
// every member at every ratio with a fresh unlabeled subsample.
BenchReport bench_dacc(const BenchConfig& cfg, RngStream stream);

}  // namespace encscan::lab
