#pragma once

#include <cstdint>
#include <vector>

#include "encscan/rng.hpp"
#include "encscan/tensor.hpp"

namespace encscan::cluster {

struct ClusterModel {
    int64_t k = 0;
    Tensor centroids;                  // [k x d]
    std::vector<int32_t> assignments;  // per input row
    double inertia = 0.0;              // sum of squared distances to assigned centroid
};

// Lloyd's algorithm with k-means++ seeding, run `restarts` times (derived
// streams), keeping the lowest-inertia run. Iterations stop at an assignment
// fixpoint or after max_iter rounds. A cluster that empties is re-seeded at
// the point farthest from its assigned centroid. Internally points are
// processed in a canonical order (lexicographic row sort), which makes the
// result independent of input row order up to the assignment permutation.
ClusterModel kmeans(const Tensor& points, int64_t k, RngStream stream,
                    int restarts = 3, int max_iter = 100);

// Mean silhouette over all points, Euclidean metric. Singleton clusters
// score 0 for their lone member. Requires at least two distinct clusters.
double silhouette(const Tensor& points, const std::vector<int32_t>& assignments);

struct KneeConfig {
    std::vector<int64_t> k_list;  // strictly increasing, each >= 2, length >= 3
    int window = 3;               // odd, >= 1
    int restarts = 3;
    int max_iter = 100;
    int64_t score_cap = 2000;     // silhouette subsample bound
};

struct KneeTrace {
    std::vector<int64_t> k_list;
    std::vector<double> s_list;           // silhouette per candidate
    std::vector<double> smoothed_s_list;  // zero-padded window mean ("swk_s_list" on the wire)
    std::vector<double> d_list;           // norm(smoothed) - norm(k)
    int64_t k_chosen = 0;
};

// Candidate lists must hold >= 3 strictly increasing values, each >= 2.
void validate_k_list(const std::vector<int64_t>& k_list);

// Shifts/scales into [0,1]; a zero-range list maps to all zeros.
std::vector<double> min_max_normalize(const std::vector<double>& v);

// Curve logic alone: pad (window-1)/2 zeros on both ends, window-average,
// min-max normalize the smoothed scores and the K values, take the argmax of
// their difference. Ties resolve toward the smaller K.
KneeTrace knee_from_scores(const std::vector<double>& s_list,
                           const std::vector<int64_t>& k_list, int window);

// Largest vertical distance to the diagonal of the normalized curve; equals
// knee_from_scores with window 1. Requires at least 3 candidates.
int64_t knee_direct(const std::vector<double>& s_list, const std::vector<int64_t>& k_list);

// Full estimator: silhouette per candidate K (k-means on all points; scoring
// subsampled to score_cap points when larger, drawn once and reused across
// candidates), then knee_from_scores. Candidate K uses the derived stream
// (master stream, K), so evaluation order cannot change any result.
KneeTrace estimate_k(const Tensor& points, const KneeConfig& cfg, RngStream stream);

std::vector<std::vector<int64_t>> group_by_cluster(const std::vector<int32_t>& assignments, int64_t k);

}  // namespace encscan::cluster
