// Copyright 2026-present the quire project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <queue>
#include <random>
#include <unordered_set>
#include <utility>
#include <vector>

#include "quire/dataset.hpp"

namespace quire {

// Squared Euclidean distance is the comparison key everywhere: rank-equivalent
// to the true metric and square-root free. 8-bit kernels accumulate in int32
// (safe through dim 4096: 255^2 * 4096 < 2^31); float kernels in double.

inline Distance squared_l2(const uint8_t* a, const uint8_t* b, size_t dim) {
    int32_t acc = 0;
    for (size_t d = 0; d < dim; ++d) {
        int32_t diff = int32_t(a[d]) - int32_t(b[d]);
        acc += diff * diff;
    }
    return Distance(acc);
}

inline Distance squared_l2(const int8_t* a, const int8_t* b, size_t dim) {
    int32_t acc = 0;
    for (size_t d = 0; d < dim; ++d) {
        int32_t diff = int32_t(a[d]) - int32_t(b[d]);
        acc += diff * diff;
    }
    return Distance(acc);
}

inline Distance squared_l2(const float* a, const float* b, size_t dim) {
    double acc = 0.0;
    for (size_t d = 0; d < dim; ++d) {
        double diff = double(a[d]) - double(b[d]);
        acc += diff * diff;
    }
    return acc;
}

template <typename T>
Distance exact_distance(std::span<const T> a, std::span<const T> b) {
    detail::require(a.size() == b.size(), "exact_distance: dimension mismatch");
    return squared_l2(a.data(), b.data(), a.size());
}

/// Distance between rows of a dataset.
inline Distance exact_distance(const Dataset& ds, VectorId a, VectorId b) {
    return dispatch_elem(ds.elem(), [&](auto tag) {
        using T = decltype(tag);
        return squared_l2(ds.row<T>(a), ds.row<T>(b), ds.dim());
    });
}

struct Neighbor {
    VectorId id = kInvalidId;
    Distance dist = 0.0;

    friend bool operator<(const Neighbor& x, const Neighbor& y) {
        if (x.dist != y.dist) return x.dist < y.dist;
        return x.id < y.id;
    }
    friend bool operator==(const Neighbor& x, const Neighbor& y) {
        return x.id == y.id && x.dist == y.dist;
    }
};

/// Exact k nearest neighbors of q by full scan; ties broken by smaller id.
/// k = 0 yields an empty list. The oracle behind every recall figure.
template <typename T>
std::vector<Neighbor> brute_force_knn(const Dataset& ds, const T* q, size_t k) {
    detail::require(k <= ds.count(), "brute_force_knn: k exceeds dataset count");
    if (k == 0) {
        return {};
    }
    // max-heap on (dist, id); worst on top.
    std::priority_queue<Neighbor> heap;
    for (size_t i = 0; i < ds.count(); ++i) {
        Neighbor n{VectorId(i), squared_l2(ds.row<T>(VectorId(i)), q, ds.dim())};
        if (heap.size() < k) {
            heap.push(n);
        } else if (n < heap.top()) {
            heap.pop();
            heap.push(n);
        }
    }
    std::vector<Neighbor> out(heap.size());
    for (size_t i = out.size(); i-- > 0;) {
        out[i] = heap.top();
        heap.pop();
    }
    return out;
}

inline std::vector<Neighbor> brute_force_knn(const Dataset& ds, const char* q_raw, size_t k) {
    return dispatch_elem(ds.elem(), [&](auto tag) {
        using T = decltype(tag);
        return brute_force_knn(ds, reinterpret_cast<const T*>(q_raw), k);
    });
}

/// Plain recall@k: |result[0..k) ∩ truth[0..k)| / k, membership by id.
inline double recall_at_k(std::span<const VectorId> result, std::span<const VectorId> truth, size_t k) {
    detail::require(result.size() >= k, "recall_at_k: result shorter than k");
    detail::require(truth.size() >= k, "recall_at_k: truth shorter than k");
    std::unordered_set<VectorId> t(truth.begin(), truth.begin() + k);
    size_t hits = 0;
    for (size_t i = 0; i < k; ++i) {
        hits += t.count(result[i]);
    }
    return double(hits) / double(k);
}

/// Tie-tolerant recall@k: a returned id also counts as a hit when its exact
/// distance equals the k-th true distance (standard treatment of ground-truth
/// ties at the cut).
inline double recall_at_k(std::span<const VectorId> result_ids, std::span<const Distance> result_dists,
                          std::span<const VectorId> truth_ids, std::span<const Distance> truth_dists,
                          size_t k) {
    detail::require(result_ids.size() >= k && result_dists.size() >= k, "recall_at_k: result shorter than k");
    detail::require(truth_ids.size() >= k && truth_dists.size() >= k, "recall_at_k: truth shorter than k");
    std::unordered_set<VectorId> t(truth_ids.begin(), truth_ids.begin() + k);
    const Distance cut = truth_dists[k - 1];
    size_t hits = 0;
    for (size_t i = 0; i < k; ++i) {
        if (t.count(result_ids[i]) || result_dists[i] == cut) {
            ++hits;
        }
    }
    return double(hits) / double(k);
}

/// Index of the vector closest to the dataset mean. Exact at desk scale;
/// beyond 1M points a seeded 100K sample stands in.
inline VectorId medoid(const Dataset& ds, uint64_t seed = 0) {
    const auto m = ds.mean();
    std::vector<VectorId> pool;
    if (ds.count() > 1'000'000) {
        std::mt19937_64 rng(seed);
        std::vector<VectorId> all(ds.count());
        for (size_t i = 0; i < all.size(); ++i) all[i] = VectorId(i);
        std::shuffle(all.begin(), all.end(), rng);
        pool.assign(all.begin(), all.begin() + 100'000);
        std::sort(pool.begin(), pool.end());
    } else {
        pool.resize(ds.count());
        for (size_t i = 0; i < pool.size(); ++i) pool[i] = VectorId(i);
    }
    VectorId best = pool.front();
    double best_d = std::numeric_limits<double>::infinity();
    dispatch_elem(ds.elem(), [&](auto tag) {
        using T = decltype(tag);
        for (VectorId id : pool) {
            const T* r = ds.row<T>(id);
            double acc = 0.0;
            for (size_t d = 0; d < ds.dim(); ++d) {
                double diff = double(r[d]) - m[d];
                acc += diff * diff;
            }
            if (acc < best_d) {
                best_d = acc;
                best = id;
            }
        }
    });
    return best;
}

} // namespace quire
