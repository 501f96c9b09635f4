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
#include <unordered_set>
#include <vector>

#include "quire/page_plan.hpp"
#include "quire/quantizer.hpp"
#include "quire/vector_graph.hpp"

namespace quire {

/// One page under construction: member vector ids plus the deduplicated ids
/// of neighbors living outside the page. All ids are pre-reassignment.
struct PageNodeDraft {
    std::vector<VectorId> members;       // members[0] is the seed
    std::vector<VectorId> external_nbrs; // sorted by (distance to seed, id), truncated to budget
};

/// Groups vectors into pages of capacity n: each seed (smallest ungrouped id)
/// pulls the n-1 closest ungrouped vectors within h undirected hops; short
/// pages are padded from the ungrouped pool, so only the final page can be
/// underfull. Deterministic.
inline std::vector<std::vector<VectorId>> group_vectors(const VectorGraph& g0, const Dataset& ds,
                                                        uint32_t n, uint32_t h) {
    detail::require(n >= 1, "group_vectors: capacity must be >= 1");
    detail::require(h >= 1, "group_vectors: hop count must be >= 1");
    const size_t count = ds.count();

    // Undirected view: out-edges plus in-edges.
    std::vector<std::vector<VectorId>> undirected(count);
    for (size_t v = 0; v < count; ++v) {
        for (VectorId u : g0.adjacency[v]) {
            undirected[v].push_back(u);
            undirected[u].push_back(VectorId(v));
        }
    }
    for (auto& adj : undirected) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }

    std::vector<char> grouped(count, 0);
    size_t next_seed = 0;
    size_t remaining = count;

    // Reusable BFS scratch.
    std::vector<uint32_t> stamp(count, 0);
    uint32_t round = 0;
    std::vector<VectorId> frontier, next_frontier, reachable;

    auto extract_min_ungrouped = [&]() -> VectorId {
        while (grouped[next_seed]) {
            ++next_seed;
        }
        grouped[next_seed] = 1;
        --remaining;
        return VectorId(next_seed);
    };

    std::vector<std::vector<VectorId>> pages;
    pages.reserve((count + n - 1) / n);
    while (remaining > 0) {
        VectorId seed = extract_min_ungrouped();
        std::vector<VectorId> page{seed};

        if (n > 1) {
            // Ungrouped vectors within h hops of the seed (paths may pass
            // through grouped vectors).
            ++round;
            stamp[seed] = round;
            frontier.clear();
            frontier.push_back(seed);
            reachable.clear();
            for (uint32_t hop = 0; hop < h && !frontier.empty(); ++hop) {
                next_frontier.clear();
                for (VectorId v : frontier) {
                    for (VectorId u : undirected[v]) {
                        if (stamp[u] != round) {
                            stamp[u] = round;
                            next_frontier.push_back(u);
                            if (!grouped[u]) {
                                reachable.push_back(u);
                            }
                        }
                    }
                }
                std::swap(frontier, next_frontier);
            }

            std::vector<Neighbor> cands;
            cands.reserve(reachable.size());
            for (VectorId u : reachable) {
                cands.push_back({u, exact_distance(ds, seed, u)});
            }
            std::sort(cands.begin(), cands.end());
            const size_t take = std::min<size_t>(n - 1, cands.size());
            for (size_t i = 0; i < take; ++i) {
                page.push_back(cands[i].id);
                grouped[cands[i].id] = 1;
                --remaining;
            }
            while (page.size() < n && remaining > 0) {
                page.push_back(extract_min_ungrouped());
            }
        }
        pages.push_back(std::move(page));
    }
    return pages;
}

/// Per page: union of members' out-edges minus the members themselves,
/// duplicates merged. Unions larger than the budget keep the ids closest to
/// the page seed (ties by id).
inline std::vector<PageNodeDraft> aggregate_neighbors(const std::vector<std::vector<VectorId>>& partition,
                                                      const VectorGraph& g0, const Dataset& ds,
                                                      uint32_t n_nbrs_budget) {
    std::vector<PageNodeDraft> drafts;
    drafts.reserve(partition.size());
    for (const auto& members : partition) {
        PageNodeDraft draft;
        draft.members = members;
        std::unordered_set<VectorId> member_set(members.begin(), members.end());
        std::unordered_set<VectorId> uniq;
        for (VectorId v : members) {
            for (VectorId u : g0.adjacency[v]) {
                if (!member_set.count(u)) {
                    uniq.insert(u);
                }
            }
        }
        const VectorId seed = members.front();
        std::vector<Neighbor> ordered;
        ordered.reserve(uniq.size());
        for (VectorId u : uniq) {
            ordered.push_back({u, exact_distance(ds, seed, u)});
        }
        std::sort(ordered.begin(), ordered.end());
        if (ordered.size() > n_nbrs_budget) {
            ordered.resize(n_nbrs_budget);
        }
        draft.external_nbrs.reserve(ordered.size());
        for (const auto& nb : ordered) {
            draft.external_nbrs.push_back(nb.id);
        }
        drafts.push_back(std::move(draft));
    }
    return drafts;
}

/// Bijection between original ids and page-ordered ids
/// (new id = pageIndex * N_nodes + slot).
struct Remap {
    std::vector<VectorId> old_to_new;
    std::vector<VectorId> new_to_old;
};

inline Remap reassign_ids(const std::vector<std::vector<VectorId>>& partition, uint32_t n_nodes) {
    size_t count = 0;
    for (const auto& p : partition) count += p.size();
    Remap remap;
    remap.old_to_new.assign(count, kInvalidId);
    remap.new_to_old.assign(count, kInvalidId);
    for (size_t p = 0; p < partition.size(); ++p) {
        for (size_t slot = 0; slot < partition[p].size(); ++slot) {
            VectorId old_id = partition[p][slot];
            VectorId new_id = VectorId(p * n_nodes + slot);
            remap.old_to_new[old_id] = new_id;
            remap.new_to_old[new_id] = old_id;
        }
    }
    for (VectorId v : remap.old_to_new) {
        if (v == kInvalidId) {
            detail::fail("reassign_ids: partition does not cover every vector");
        }
    }
    return remap;
}

inline void save_remap(const std::string& path, const Remap& remap) {
    auto out = detail::open_out(path);
    detail::write_pod(out, kMagicRemap);
    detail::write_pod(out, kFormatVersion);
    detail::write_pod(out, uint32_t(remap.old_to_new.size()));
    for (size_t old_id = 0; old_id < remap.old_to_new.size(); ++old_id) {
        detail::write_pod(out, uint32_t(old_id));
        detail::write_pod(out, remap.old_to_new[old_id]);
    }
    if (!out) {
        detail::io_fail("write failed: " + path);
    }
}

inline Remap load_remap(const std::string& path) {
    auto in = detail::open_in(path);
    detail::check_magic(in, kMagicRemap, kFormatVersion, path);
    uint32_t count = detail::read_pod<uint32_t>(in);
    Remap remap;
    remap.old_to_new.assign(count, kInvalidId);
    remap.new_to_old.assign(count, kInvalidId);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t old_id = detail::read_pod<uint32_t>(in);
        uint32_t new_id = detail::read_pod<uint32_t>(in);
        if (old_id >= count || new_id >= count) {
            detail::io_fail("remap entry out of range: " + path);
        }
        remap.old_to_new[old_id] = new_id;
        remap.new_to_old[new_id] = old_id;
    }
    return remap;
}

/// Global choice of which vectors keep their compressed form in memory.
/// Exactly one copy of each code exists: pages carry codes only for vectors
/// not in the memory set. The pass flags per-page overflow (the neighbors
/// farthest from the seed) so every page's on-disk coded count fits N_CV;
/// flagging only ever shrinks other pages' disk counts, so one sweep settles.
inline std::vector<char> plan_code_placement(const std::vector<PageNodeDraft>& drafts,
                                             const PagePlan& plan, size_t count) {
    std::vector<char> in_memory(count, 0);
    if (plan.placement == CodePlacement::InMemory) {
        std::fill(in_memory.begin(), in_memory.end(), 1);
        return in_memory;
    }
    if (plan.placement == CodePlacement::OnDisk) {
        return in_memory;
    }
    for (const auto& draft : drafts) {
        uint32_t disk_count = 0;
        for (VectorId u : draft.external_nbrs) {
            if (!in_memory[u]) {
                ++disk_count;
            }
        }
        if (disk_count <= plan.n_cv) {
            continue;
        }
        uint32_t to_flag = disk_count - plan.n_cv;
        // external_nbrs is sorted closest-first; flag from the far end.
        for (auto it = draft.external_nbrs.rbegin(); it != draft.external_nbrs.rend() && to_flag > 0; ++it) {
            if (!in_memory[*it]) {
                in_memory[*it] = 1;
                --to_flag;
            }
        }
    }
    return in_memory;
}

/// A page ready for serialization: member ids (original space, page order),
/// neighbor ids (reassigned space, disk-coded first), and the raw code bytes
/// for the first disk_coded neighbors.
struct FinalPage {
    std::vector<VectorId> members_old;
    std::vector<VectorId> nbrs_new;
    std::vector<uint8_t> nbr_codes; // disk_coded * S_CV bytes
    uint32_t disk_coded = 0;
};

/// Orders each page's neighbors disk-coded-first and attaches their codes.
/// Every neighbor must be resolvable to a code (in-page or in-memory);
/// anything else is a build error.
inline std::vector<FinalPage> attach_disk_codes(const std::vector<PageNodeDraft>& drafts,
                                                const std::vector<char>& in_memory, const Remap& remap,
                                                const CodeArray& disk_codes, const PagePlan& plan) {
    detail::require(disk_codes.chunks == plan.s_cv || plan.n_cv == 0,
                    "attach_disk_codes: code size does not match plan S_CV");
    std::vector<FinalPage> pages;
    pages.reserve(drafts.size());
    for (const auto& draft : drafts) {
        FinalPage page;
        page.members_old = draft.members;
        std::vector<VectorId> disk_group, mem_group;
        for (VectorId u : draft.external_nbrs) { // already (distance, id) ordered
            (in_memory[u] ? mem_group : disk_group).push_back(u);
        }
        if (disk_group.size() > plan.n_cv) {
            detail::fail("attach_disk_codes: neighbor lacking both in-page and in-memory code "
                         "(disk-coded neighbors exceed N_CV)");
        }
        page.disk_coded = uint32_t(disk_group.size());
        page.nbr_codes.resize(size_t(page.disk_coded) * plan.s_cv);
        for (size_t i = 0; i < disk_group.size(); ++i) {
            std::memcpy(page.nbr_codes.data() + i * plan.s_cv, disk_codes.code(disk_group[i]), plan.s_cv);
        }
        page.nbrs_new.reserve(draft.external_nbrs.size());
        for (VectorId u : disk_group) {
            page.nbrs_new.push_back(remap.old_to_new[u]);
        }
        for (VectorId u : mem_group) {
            page.nbrs_new.push_back(remap.old_to_new[u]);
        }
        pages.push_back(std::move(page));
    }
    return pages;
}

} // namespace quire
