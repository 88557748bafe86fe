#include "encscan/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "encscan/kernels.hpp"

namespace encscan::cluster {

namespace {

// Lexicographic row order. All internal k-means work runs in this order so
// that permuting the input rows cannot change seeding, ties or reduction
// order; only the final assignment vector is mapped back.
std::vector<int64_t> canonical_order(const Tensor& points) {
    int64_t n = points.rows(), d = points.cols();
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        const float* ra = points.row(a);
        const float* rb = points.row(b);
        for (int64_t j = 0; j < d; ++j) {
            if (ra[j] != rb[j]) return ra[j] < rb[j];
        }
        return a < b;
    });
    return order;
}

double sqdist(const float* a, const float* b, int64_t d) {
    double acc = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        double t = static_cast<double>(a[j]) - b[j];
        acc += t * t;
    }
    return acc;
}

struct LloydResult {
    Tensor centroids;
    std::vector<int32_t> assign;  // canonical positions
    double inertia = 0.0;
};

LloydResult run_lloyd(const Tensor& pts, int64_t k, RngStream stream, int max_iter) {
    int64_t n = pts.rows(), d = pts.cols();

    // k-means++ seeding.
    Tensor centroids = Tensor::zeros({k, d});
    std::vector<double> d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<char> chosen(static_cast<size_t>(n), 0);
    int64_t first = static_cast<int64_t>(stream.next_below(static_cast<uint64_t>(n)));
    std::copy_n(pts.row(first), d, centroids.row(0));
    chosen[static_cast<size_t>(first)] = 1;
    for (int64_t c = 1; c < k; ++c) {
        const float* prev = centroids.row(c - 1);
        double total = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double dist = sqdist(pts.row(i), prev, d);
            if (dist < d2[static_cast<size_t>(i)]) d2[static_cast<size_t>(i)] = dist;
            total += d2[static_cast<size_t>(i)];
        }
        int64_t pick = -1;
        if (total > 0.0) {
            double threshold = stream.next_double() * total;
            double acc = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                acc += d2[static_cast<size_t>(i)];
                if (acc > threshold) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = n - 1;  // threshold == total up to rounding
        } else {
            // All remaining mass is on duplicates of chosen points; take the
            // first unchosen position to stay deterministic.
            for (int64_t i = 0; i < n; ++i)
                if (!chosen[static_cast<size_t>(i)]) {
                    pick = i;
                    break;
                }
            if (pick < 0) pick = 0;
        }
        std::copy_n(pts.row(pick), d, centroids.row(c));
        chosen[static_cast<size_t>(pick)] = 1;
    }

    std::vector<int32_t> assign(static_cast<size_t>(n), -1);
    std::vector<int32_t> prev_assign;
    std::vector<double> assigned_d2(static_cast<size_t>(n), 0.0);
    double inertia = 0.0;

    auto assign_pass = [&]() {
        double total = 0.0;
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) {
            const float* p = pts.row(i);
            int32_t best = 0;
            double best_d = sqdist(p, centroids.row(0), d);
            for (int64_t c = 1; c < k; ++c) {
                double dist = sqdist(p, centroids.row(c), d);
                if (dist < best_d) {  // strict: ties stay with the smaller id
                    best_d = dist;
                    best = static_cast<int32_t>(c);
                }
            }
            assign[static_cast<size_t>(i)] = best;
            assigned_d2[static_cast<size_t>(i)] = best_d;
        }
        for (int64_t i = 0; i < n; ++i) total += assigned_d2[static_cast<size_t>(i)];
        return total;
    };

    inertia = assign_pass();
    double prev_inertia = inertia;
    bool reseeded_last_round = false;

    for (int iter = 0; iter < max_iter; ++iter) {
        prev_assign = assign;

        // Means in canonical order.
        std::vector<double> sums(static_cast<size_t>(k * d), 0.0);
        std::vector<int64_t> counts(static_cast<size_t>(k), 0);
        for (int64_t i = 0; i < n; ++i) {
            int32_t c = assign[static_cast<size_t>(i)];
            const float* p = pts.row(i);
            double* s = sums.data() + static_cast<int64_t>(c) * d;
            for (int64_t j = 0; j < d; ++j) s[j] += p[j];
            ++counts[static_cast<size_t>(c)];
        }
        reseeded_last_round = false;
        std::vector<char> consumed(static_cast<size_t>(n), 0);
        for (int64_t c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] > 0) {
                const double* s = sums.data() + c * d;
                float* ctr = centroids.row(c);
                for (int64_t j = 0; j < d; ++j)
                    ctr[j] = static_cast<float>(s[j] / static_cast<double>(counts[static_cast<size_t>(c)]));
            } else {
                // Re-seed an empty cluster at the point farthest from its
                // assigned centroid; documented behavior, not an error.
                int64_t far_idx = -1;
                double far_d = -1.0;
                for (int64_t i = 0; i < n; ++i) {
                    if (consumed[static_cast<size_t>(i)]) continue;
                    if (assigned_d2[static_cast<size_t>(i)] > far_d) {
                        far_d = assigned_d2[static_cast<size_t>(i)];
                        far_idx = i;
                    }
                }
                std::copy_n(pts.row(far_idx), d, centroids.row(c));
                consumed[static_cast<size_t>(far_idx)] = 1;
                reseeded_last_round = true;
            }
        }

        double new_inertia = assign_pass();
        // Plain Lloyd rounds may never increase the objective; a re-seed is
        // allowed to reset the baseline.
        if (!reseeded_last_round &&
            new_inertia > prev_inertia + 1e-6 * std::max(1.0, std::abs(prev_inertia)))
            throw std::logic_error("k-means objective increased within a Lloyd round");
        inertia = new_inertia;
        prev_inertia = new_inertia;
        if (assign == prev_assign) break;
    }

    LloydResult res;
    res.centroids = std::move(centroids);
    res.assign = std::move(assign);
    res.inertia = inertia;
    return res;
}

}  // namespace

ClusterModel kmeans(const Tensor& points, int64_t k, RngStream stream, int restarts, int max_iter) {
    if (points.shape.size() != 2)
        throw ContractError("kmeans: points must be 2-D, got " + shape_str(points.shape));
    int64_t n = points.rows(), d = points.cols();
    if (k < 1) throw ContractError("kmeans: k must be >= 1, got " + std::to_string(k));
    if (n < k)
        throw ContractError("kmeans: " + std::to_string(n) + " points cannot form " +
                            std::to_string(k) + " clusters");
    if (restarts < 1) throw ContractError("kmeans: restarts must be >= 1");
    if (!points.all_finite()) throw ContractError("kmeans: points contain non-finite values");

    std::vector<int64_t> order = canonical_order(points);
    Tensor canon = Tensor::zeros({n, d});
    for (int64_t i = 0; i < n; ++i)
        std::copy_n(points.row(order[static_cast<size_t>(i)]), d, canon.row(i));

    LloydResult best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        LloydResult res = run_lloyd(canon, k, stream.derived(static_cast<uint64_t>(r)), max_iter);
        if (!have || res.inertia < best.inertia) {
            best = std::move(res);
            have = true;
        }
    }

    ClusterModel model;
    model.k = k;
    model.centroids = std::move(best.centroids);
    model.inertia = best.inertia;
    model.assignments.assign(static_cast<size_t>(n), -1);
    for (int64_t i = 0; i < n; ++i)
        model.assignments[static_cast<size_t>(order[static_cast<size_t>(i)])] = best.assign[static_cast<size_t>(i)];
    return model;
}

double silhouette(const Tensor& points, const std::vector<int32_t>& assignments) {
    if (points.shape.size() != 2)
        throw ContractError("silhouette: points must be 2-D, got " + shape_str(points.shape));
    int64_t n = points.rows(), d = points.cols();
    if (static_cast<int64_t>(assignments.size()) != n)
        throw ContractError("silhouette: " + std::to_string(assignments.size()) +
                            " assignments for " + std::to_string(n) + " points");
    if (n == 0) throw DegenerateInputError("silhouette: empty point set");

    int64_t k = 0;
    for (int32_t a : assignments) {
        if (a < 0) throw ContractError("silhouette: negative cluster label");
        k = std::max<int64_t>(k, a + 1);
    }
    std::vector<int64_t> counts(static_cast<size_t>(k), 0);
    for (int32_t a : assignments) ++counts[static_cast<size_t>(a)];
    int64_t nonempty = 0;
    for (int64_t c : counts) nonempty += c > 0 ? 1 : 0;
    if (nonempty < 2)
        throw DegenerateInputError("silhouette: needs at least two clusters, got " +
                                   std::to_string(nonempty));

    std::vector<double> scores(static_cast<size_t>(n), 0.0);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        std::vector<double> dsum(static_cast<size_t>(k), 0.0);
        const float* pi = points.row(i);
        for (int64_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dsum[static_cast<size_t>(assignments[static_cast<size_t>(j)])] +=
                std::sqrt(sqdist(pi, points.row(j), d));
        }
        int32_t own = assignments[static_cast<size_t>(i)];
        if (counts[static_cast<size_t>(own)] <= 1) {
            scores[static_cast<size_t>(i)] = 0.0;  // singleton
            continue;
        }
        double a = dsum[static_cast<size_t>(own)] / static_cast<double>(counts[static_cast<size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int64_t c = 0; c < k; ++c) {
            if (c == own || counts[static_cast<size_t>(c)] == 0) continue;
            b = std::min(b, dsum[static_cast<size_t>(c)] / static_cast<double>(counts[static_cast<size_t>(c)]));
        }
        double m = std::max(a, b);
        scores[static_cast<size_t>(i)] = m > 0.0 ? (b - a) / m : 0.0;
    }
    double total = 0.0;
    for (double s : scores) total += s;
    return total / static_cast<double>(n);
}

void validate_k_list(const std::vector<int64_t>& k_list) {
    if (k_list.size() < 3)
        throw ContractError("candidate K list needs at least 3 entries, got " +
                            std::to_string(k_list.size()));
    for (size_t i = 0; i < k_list.size(); ++i) {
        if (k_list[i] < 2) throw ContractError("candidate K must be >= 2, got " + std::to_string(k_list[i]));
        if (i > 0 && k_list[i] <= k_list[i - 1])
            throw ContractError("candidate K list must be strictly increasing");
    }
}

std::vector<double> min_max_normalize(const std::vector<double>& v) {
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    std::vector<double> out(v.size(), 0.0);
    if (hi > lo)
        for (size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
    return out;
}

KneeTrace knee_from_scores(const std::vector<double>& s_list,
                           const std::vector<int64_t>& k_list, int window) {
    validate_k_list(k_list);
    if (s_list.size() != k_list.size())
        throw ContractError("score list length " + std::to_string(s_list.size()) +
                            " does not match K list length " + std::to_string(k_list.size()));
    if (window < 1 || window % 2 == 0)
        throw ContractError("window must be odd and >= 1, got " + std::to_string(window));

    int64_t len = static_cast<int64_t>(s_list.size());
    int64_t half = (window - 1) / 2;
    KneeTrace tr;
    tr.k_list = k_list;
    tr.s_list = s_list;
    // Binomial window weights (w=3 -> 1,2,1; w=5 -> 1,4,6,4,1). A flat mean
    // drags a peaked curve down faster than the unit diagonal rises and the
    // knee lands one candidate early; the center-heavy window keeps the local
    // gain at the peak. Edge taps renormalize over the in-range weights.
    std::vector<double> wts(static_cast<size_t>(window), 1.0);
    for (int64_t i = 1; i < window; ++i)
        for (int64_t j = i - 1; j >= 1; --j)
            wts[static_cast<size_t>(j)] += wts[static_cast<size_t>(j - 1)];
    tr.smoothed_s_list.resize(static_cast<size_t>(len));
    for (int64_t i = 0; i < len; ++i) {
        double acc = 0.0, norm = 0.0;
        for (int64_t j = i - half; j <= i + half; ++j) {
            if (j < 0 || j >= len) continue;
            double w = wts[static_cast<size_t>(j - (i - half))];
            acc += w * s_list[static_cast<size_t>(j)];
            norm += w;
        }
        tr.smoothed_s_list[static_cast<size_t>(i)] = acc / norm;
    }

    std::vector<double> ns = min_max_normalize(tr.smoothed_s_list);
    std::vector<double> kd(k_list.begin(), k_list.end());
    std::vector<double> nk = min_max_normalize(kd);
    tr.d_list.resize(static_cast<size_t>(len));
    int64_t best = 0;
    for (int64_t i = 0; i < len; ++i) {
        tr.d_list[static_cast<size_t>(i)] = ns[static_cast<size_t>(i)] - nk[static_cast<size_t>(i)];
        if (tr.d_list[static_cast<size_t>(i)] > tr.d_list[static_cast<size_t>(best)]) best = i;
    }
    tr.k_chosen = k_list[static_cast<size_t>(best)];
    return tr;
}

int64_t knee_direct(const std::vector<double>& s_list, const std::vector<int64_t>& k_list) {
    return knee_from_scores(s_list, k_list, 1).k_chosen;
}

KneeTrace estimate_k(const Tensor& points, const KneeConfig& cfg, RngStream stream) {
    validate_k_list(cfg.k_list);
    if (cfg.window < 1 || cfg.window % 2 == 0)
        throw ContractError("window must be odd and >= 1, got " + std::to_string(cfg.window));
    if (cfg.score_cap < 2) throw ContractError("score_cap must be >= 2");
    int64_t n = points.rows();
    int64_t k_max = cfg.k_list.back();
    if (n < k_max)
        throw ContractError("estimate_k: " + std::to_string(n) + " points but candidate K up to " +
                            std::to_string(k_max));

    // One scoring subsample shared by every candidate, drawn over canonical
    // positions so input order stays irrelevant.
    std::vector<int64_t> score_idx;
    if (n > cfg.score_cap) {
        std::vector<int64_t> order = canonical_order(points);
        RngStream sub = stream.derived(RngStream::tag("silhouette-subsample"));
        for (int64_t i = 0; i < cfg.score_cap; ++i) {
            int64_t j = i + static_cast<int64_t>(sub.next_below(static_cast<uint64_t>(n - i)));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
            score_idx.push_back(order[static_cast<size_t>(i)]);
        }
        std::sort(score_idx.begin(), score_idx.end());
    }

    std::vector<double> s_list(cfg.k_list.size(), 0.0);
    for (size_t ci = 0; ci < cfg.k_list.size(); ++ci) {
        int64_t k = cfg.k_list[ci];
        ClusterModel model = kmeans(points, k, stream.derived(static_cast<uint64_t>(k)),
                                    cfg.restarts, cfg.max_iter);
        if (score_idx.empty()) {
            s_list[ci] = silhouette(points, model.assignments);
        } else {
            Tensor sub_pts = Tensor::zeros({static_cast<int64_t>(score_idx.size()), points.cols()});
            std::vector<int32_t> sub_assign(score_idx.size());
            for (size_t i = 0; i < score_idx.size(); ++i) {
                std::copy_n(points.row(score_idx[i]), points.cols(), sub_pts.row(static_cast<int64_t>(i)));
                sub_assign[i] = model.assignments[static_cast<size_t>(score_idx[i])];
            }
            try {
                s_list[ci] = silhouette(sub_pts, sub_assign);
            } catch (const DegenerateInputError&) {
                // Subsample collapsed into one cluster; score the full set.
                s_list[ci] = silhouette(points, model.assignments);
            }
        }
    }
    return knee_from_scores(s_list, cfg.k_list, cfg.window);
}

std::vector<std::vector<int64_t>> group_by_cluster(const std::vector<int32_t>& assignments, int64_t k) {
    std::vector<std::vector<int64_t>> groups(static_cast<size_t>(k));
    for (size_t i = 0; i < assignments.size(); ++i) {
        int32_t c = assignments[i];
        if (c < 0 || c >= k)
            throw ContractError("assignment " + std::to_string(c) + " outside [0, " +
                                std::to_string(k) + ")");
        groups[static_cast<size_t>(c)].push_back(static_cast<int64_t>(i));
    }
    return groups;
}

}  // namespace encscan::cluster
