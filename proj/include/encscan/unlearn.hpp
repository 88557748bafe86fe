#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "encscan/dataset.hpp"
#include "encscan/encoder.hpp"
#include "encscan/optimizer.hpp"
#include "encscan/outlier.hpp"
#include "encscan/rng.hpp"

namespace encscan::unlearn {

// An ordered list of image augmentation primitives, applied in sequence.
// Each primitive consumes a fixed number of stream draws per sample, so a
// given (spec, stream) pair always produces the same view.
struct AugOp {
    enum class Kind : uint8_t { translate, hflip, noise, brightness };
    Kind kind;
    double a = 0.0;  // translate: max shift (px); hflip: probability;
                     // noise: sigma; brightness: max absolute shift
};

struct AugmentationSpec {
    std::vector<AugOp> ops;
    // translate <= 2 px, horizontal flip p = 0.5, gaussian noise sigma = 0.05,
    // brightness jitter +-0.1; outputs clipped to [0,1].
    static AugmentationSpec standard();
    static AugmentationSpec identity();  // no ops
};

// Augments one flattened image (row of length geom.dim()).
Tensor augment(const float* x, const ImageGeom& geom, const AugmentationSpec& spec,
               RngStream& rng);
Tensor augment(const Tensor& x, const ImageGeom& geom, const AugmentationSpec& spec,
               RngStream& rng);

struct TriggerRef {
    const Tensor* mask;
    const Tensor* delta;
};

// Draws the student view: with probability attach_prob the trigger is
// blended in before augmenting, otherwise the clean sample is augmented.
// A missing trigger always takes the clean branch (no coin consumed).
Tensor equal_sample(const float* x, const ImageGeom& geom, const std::optional<TriggerRef>& t,
                    const AugmentationSpec& aug, double attach_prob, RngStream& rng);

struct UnlearnConfig {
    int passes = 1;
    int batch = 32;
    double attach_prob = 0.5;
    OptimizerConfig opt{OptKind::adam, 1e-3};
    AugmentationSpec aug_teacher = AugmentationSpec::standard();
    AugmentationSpec aug_student = AugmentationSpec::standard();
};

struct MitigationStats {
    std::vector<double> loss_curve;  // mean alignment loss per pass
    int passes = 0;
};

// Returns a copy of `f` fine-tuned so that representations of trigger-carrying
// views realign with the frozen teacher's clean-view representations:
//   z  = f(aug_teacher(x))          (teacher, never updated)
//   z' = f'(equal_sample(x, t))     (student)
//   loss = -mean cos(z, z')
// For samples of cluster i, candidate triggers are the flagged table entries
// of every OTHER cluster (uniform per sample); when that leaves no candidate
// the clean branch is used. Requires a non-empty flagged table.
EncoderNet unlearn(const EncoderNet& f, const SampleSet& data,
                   const std::vector<std::vector<int64_t>>& clusters,
                   const outlier::ScanVerdict& verdict, const UnlearnConfig& cfg,
                   RngStream stream, MitigationStats* stats = nullptr);

}  // namespace encscan::unlearn
