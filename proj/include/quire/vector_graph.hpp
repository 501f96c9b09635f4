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
#include <atomic>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_set>
#include <vector>

#include "quire/distance.hpp"

namespace quire {

/// Directed proximity graph over vectors: bounded out-degree, no self loops,
/// no duplicate edges. Immutable once built.
struct VectorGraph {
    std::vector<std::vector<VectorId>> adjacency;
    uint32_t max_degree = 0;
    VectorId entry_point = 0;

    size_t count() const { return adjacency.size(); }

    /// Vertices reachable from entry_point over out-edges.
    size_t reachable_from_entry() const {
        std::vector<char> seen(count(), 0);
        std::vector<VectorId> stack{entry_point};
        seen[entry_point] = 1;
        size_t n = 0;
        while (!stack.empty()) {
            VectorId v = stack.back();
            stack.pop_back();
            ++n;
            for (VectorId u : adjacency[v]) {
                if (!seen[u]) {
                    seen[u] = 1;
                    stack.push_back(u);
                }
            }
        }
        return n;
    }
};

struct GreedySearchResult {
    std::vector<Neighbor> top;     // best L visited-or-scored ids, ascending (dist, id)
    std::vector<Neighbor> visited; // expanded nodes in expansion order
};

/// Best-first expansion from the entry point with a pool of capacity L.
template <typename T>
GreedySearchResult greedy_search(const VectorGraph& g, const Dataset& ds, const T* q, size_t L) {
    detail::require(L >= 1, "greedy_search: L must be >= 1");
    GreedySearchResult res;
    std::vector<Neighbor> pool; // sorted ascending (dist, id)
    pool.reserve(L + 1);
    std::vector<char> in_pool_expanded; // parallel to pool
    std::unordered_set<VectorId> seen;
    seen.reserve(L * 8);

    auto insert = [&](Neighbor n) {
        auto it = std::lower_bound(pool.begin(), pool.end(), n);
        size_t idx = size_t(it - pool.begin());
        if (idx >= L) {
            return;
        }
        pool.insert(it, n);
        in_pool_expanded.insert(in_pool_expanded.begin() + idx, 0);
        if (pool.size() > L) {
            pool.pop_back();
            in_pool_expanded.pop_back();
        }
    };

    Neighbor entry{g.entry_point, squared_l2(ds.row<T>(g.entry_point), q, ds.dim())};
    seen.insert(entry.id);
    insert(entry);

    while (true) {
        size_t next = pool.size();
        for (size_t i = 0; i < pool.size(); ++i) {
            if (!in_pool_expanded[i]) {
                next = i;
                break;
            }
        }
        if (next == pool.size()) {
            break;
        }
        in_pool_expanded[next] = 1;
        Neighbor cur = pool[next];
        res.visited.push_back(cur);
        for (VectorId u : g.adjacency[cur.id]) {
            if (seen.insert(u).second) {
                insert({u, squared_l2(ds.row<T>(u), q, ds.dim())});
            }
        }
    }
    res.top = pool;
    return res;
}

/// Vamana pruning rule on squared distances: candidates are scanned ascending
/// by distance to v; c survives only while no kept p has alpha*d(p,c) <= d(v,c).
template <typename T>
std::vector<VectorId> robust_prune(const Dataset& ds, VectorId v, std::vector<Neighbor> candidates,
                                   uint32_t R, double alpha) {
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end(),
                                 [](const Neighbor& a, const Neighbor& b) { return a.id == b.id; }),
                     candidates.end());
    std::vector<VectorId> kept;
    kept.reserve(R);
    std::vector<char> dominated(candidates.size(), 0);
    for (size_t i = 0; i < candidates.size() && kept.size() < R; ++i) {
        if (dominated[i] || candidates[i].id == v) {
            continue;
        }
        kept.push_back(candidates[i].id);
        const T* kept_row = ds.row<T>(candidates[i].id);
        for (size_t j = i + 1; j < candidates.size(); ++j) {
            if (dominated[j] || candidates[j].id == v) {
                continue;
            }
            Distance d_pc = squared_l2(kept_row, ds.row<T>(candidates[j].id), ds.dim());
            if (alpha * d_pc <= candidates[j].dist) {
                dominated[j] = 1;
            }
        }
    }
    return kept;
}

struct BaseGraphParams {
    uint32_t R = 32;
    uint32_t L_build = 100;
    double alpha = 1.2;
    uint64_t seed = 42;
    uint32_t threads = 1; // >1 builds in parallel with per-node locking (non-deterministic order)
};

namespace detail {

template <typename T>
void insert_one(const Dataset& ds, VectorGraph& g, std::vector<std::mutex>& locks, VectorId v,
                uint32_t R, uint32_t L_build, double alpha) {
    GreedySearchResult sr = greedy_search(g, ds, ds.row<T>(v), L_build);
    std::vector<Neighbor> cands = std::move(sr.visited);
    {
        std::lock_guard<std::mutex> lk(locks[v]);
        for (VectorId u : g.adjacency[v]) {
            cands.push_back({u, squared_l2(ds.row<T>(u), ds.row<T>(v), ds.dim())});
        }
    }
    std::vector<VectorId> pruned = robust_prune<T>(ds, v, std::move(cands), R, alpha);
    {
        std::lock_guard<std::mutex> lk(locks[v]);
        g.adjacency[v] = pruned;
    }
    for (VectorId u : pruned) {
        std::lock_guard<std::mutex> lk(locks[u]);
        auto& adj = g.adjacency[u];
        if (std::find(adj.begin(), adj.end(), v) != adj.end()) {
            continue;
        }
        adj.push_back(v);
        if (adj.size() > R) {
            std::vector<Neighbor> uc;
            uc.reserve(adj.size());
            for (VectorId w : adj) {
                uc.push_back({w, squared_l2(ds.row<T>(w), ds.row<T>(u), ds.dim())});
            }
            adj = robust_prune<T>(ds, u, std::move(uc), R, alpha);
        }
    }
}

} // namespace detail

/// Two-pass Vamana construction (alpha = 1, then the requested alpha) over a
/// seeded-shuffle insertion order; entry point is the medoid.
template <typename T>
VectorGraph build_base_graph(const Dataset& ds, const BaseGraphParams& p) {
    detail::require(p.R >= 2, "build_base_graph: R must be >= 2");
    detail::require(p.L_build >= p.R, "build_base_graph: L_build must be >= R");
    if (ds.count() < 2) {
        detail::fail("dataset too small");
    }
    const size_t n = ds.count();
    VectorGraph g;
    g.max_degree = p.R;
    g.adjacency.resize(n);
    g.entry_point = medoid(ds, p.seed);

    // Random initial out-edges keep early greedy searches from dead-ending.
    std::mt19937_64 rng(p.seed);
    const uint32_t init_deg = uint32_t(std::min<size_t>(p.R, n - 1));
    std::uniform_int_distribution<VectorId> pick(0, VectorId(n - 1));
    for (size_t v = 0; v < n; ++v) {
        std::unordered_set<VectorId> chosen;
        while (chosen.size() < init_deg) {
            VectorId u = pick(rng);
            if (u != v) {
                chosen.insert(u);
            }
        }
        g.adjacency[v].assign(chosen.begin(), chosen.end());
        std::sort(g.adjacency[v].begin(), g.adjacency[v].end());
    }

    std::vector<VectorId> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = VectorId(i);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::mutex> locks(n);
    const double alphas[2] = {1.0, p.alpha};
    for (double alpha : alphas) {
        if (p.threads <= 1) {
            for (VectorId v : order) {
                detail::insert_one<T>(ds, g, locks, v, p.R, p.L_build, alpha);
            }
        } else {
            std::atomic<size_t> next{0};
            std::vector<std::thread> pool;
            for (uint32_t t = 0; t < p.threads; ++t) {
                pool.emplace_back([&] {
                    for (;;) {
                        size_t i = next.fetch_add(1);
                        if (i >= order.size()) {
                            return;
                        }
                        detail::insert_one<T>(ds, g, locks, order[i], p.R, p.L_build, alpha);
                    }
                });
            }
            for (auto& th : pool) {
                th.join();
            }
        }
    }
    return g;
}

inline VectorGraph build_base_graph(const Dataset& ds, const BaseGraphParams& p) {
    return dispatch_elem(ds.elem(), [&](auto tag) {
        using T = decltype(tag);
        return build_base_graph<T>(ds, p);
    });
}

// ---------------------------------------------------------------------------
// Serialized base-graph file: u32 count, u32 R, u32 entryPoint, then per
// vector a fixed-width row of u32 degree + R id slots (unused = 0xFFFFFFFF).
// Little-endian.

inline void save_graph(const std::string& path, const VectorGraph& g) {
    auto out = detail::open_out(path);
    detail::write_pod(out, uint32_t(g.count()));
    detail::write_pod(out, g.max_degree);
    detail::write_pod(out, g.entry_point);
    std::vector<VectorId> row(g.max_degree, kInvalidId);
    for (const auto& adj : g.adjacency) {
        detail::write_pod(out, uint32_t(adj.size()));
        std::fill(row.begin(), row.end(), kInvalidId);
        std::copy(adj.begin(), adj.end(), row.begin());
        detail::write_array(out, row.data(), row.size());
    }
    if (!out) {
        detail::io_fail("write failed: " + path);
    }
}

inline VectorGraph load_graph(const std::string& path) {
    auto in = detail::open_in(path);
    VectorGraph g;
    uint32_t count = detail::read_pod<uint32_t>(in);
    g.max_degree = detail::read_pod<uint32_t>(in);
    g.entry_point = detail::read_pod<uint32_t>(in);
    if (g.entry_point >= count) {
        detail::io_fail("graph entry point out of range: " + path);
    }
    g.adjacency.resize(count);
    std::vector<VectorId> row(g.max_degree);
    for (uint32_t v = 0; v < count; ++v) {
        uint32_t deg = detail::read_pod<uint32_t>(in);
        if (deg > g.max_degree) {
            detail::io_fail("degree exceeds R in graph file: " + path);
        }
        detail::read_array(in, row.data(), row.size());
        g.adjacency[v].assign(row.begin(), row.begin() + deg);
    }
    return g;
}

} // namespace quire
