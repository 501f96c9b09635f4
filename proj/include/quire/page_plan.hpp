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

#include <cmath>
#include <cstdint>

#include "quire/common.hpp"

namespace quire {

/// Where compressed neighbor vectors live, chosen from the memory budget.
///   OnDisk   — no memory for codes; every page carries codes for all of its
///              neighbors (N_CV = N_nbrs).
///   Hybrid   — codes split between memory and pages (0 < N_CV < N_nbrs).
///   InMemory — every code fits in memory; pages carry none (N_CV = 0),
///              maximizing vectors per page.
enum class CodePlacement : uint8_t { OnDisk = 0, Hybrid = 1, InMemory = 2 };

inline const char* placement_name(CodePlacement p) {
    switch (p) {
    case CodePlacement::OnDisk:
        return "on-disk";
    case CodePlacement::Hybrid:
        return "hybrid";
    case CodePlacement::InMemory:
        return "in-memory";
    }
    return "?";
}

/// Derived layout constants for one index build. The capacity equation:
///
///   N_nodes = floor( (S_page - 2*S_num_nbrs - S_nbrID*N_nbrs - S_CV*N_CV)
///                    / (D * S_dtype) )
///
/// On-page neighbor codes consume page bytes, hence the minus sign on the
/// S_CV*N_CV term.
struct PagePlan {
    uint32_t s_page = 4096;    // page bytes
    uint32_t s_num_nbrs = 2;   // bytes of one count field (two are stored)
    uint32_t s_nbr_id = 4;     // bytes per neighbor id
    uint32_t n_nbrs = 64;      // neighbor budget per page
    uint32_t s_cv = 0;         // bytes per on-disk compressed neighbor (M_disk)
    uint32_t n_cv = 0;         // neighbors whose codes live on the page
    uint32_t dim = 0;          // D
    uint32_t s_dtype = 1;      // bytes per element
    uint32_t n_nodes = 0;      // resulting vectors per page
    CodePlacement placement = CodePlacement::OnDisk;
    double mem_fraction = 0.0; // f: fraction of vectors whose codes fit in memory

    uint64_t fixed_bytes() const {
        return uint64_t(2) * s_num_nbrs + uint64_t(s_nbr_id) * n_nbrs + uint64_t(s_cv) * n_cv;
    }

    /// Exact serialized size of a page holding `vec_count` vectors and
    /// `nbr_count` neighbors (before zero padding to s_page).
    uint64_t page_payload_bytes(uint32_t vec_count, uint32_t nbr_count) const {
        uint64_t code_slots = std::min(nbr_count, n_cv);
        return uint64_t(2) * s_num_nbrs + uint64_t(vec_count) * dim * s_dtype +
               uint64_t(nbr_count) * s_nbr_id + code_slots * s_cv;
    }
};

struct PlanInputs {
    uint64_t count = 0;   // dataset vectors
    uint32_t dim = 0;     // D
    uint32_t s_dtype = 1; // element bytes
    uint32_t s_page = 4096;
    uint32_t n_nbrs = 64;
    uint32_t m_disk = 0; // S_CV: disk code bytes
    uint32_t m_mem = 0;  // memory code bytes per vector
};

/// Chooses N_CV from the memory budget available for the code table and
/// derives N_nodes. A vector's code is kept in exactly one place (memory or
/// page), so f < 1/N_nbrs degenerates to all-on-disk and f >= 1 to
/// all-in-memory.
inline PagePlan plan_pages(uint64_t code_budget_bytes, const PlanInputs& in) {
    detail::require(in.count >= 1 && in.dim >= 1, "plan_pages: empty dataset meta");
    detail::require(in.m_mem >= 1, "plan_pages: memory code size must be >= 1");
    PagePlan plan;
    plan.s_page = in.s_page;
    plan.n_nbrs = in.n_nbrs;
    plan.s_cv = in.m_disk;
    plan.dim = in.dim;
    plan.s_dtype = in.s_dtype;

    const double f = double(code_budget_bytes) / (double(in.count) * double(in.m_mem));
    plan.mem_fraction = std::min(f, 1.0);
    if (f >= 1.0) {
        plan.placement = CodePlacement::InMemory;
        plan.n_cv = 0;
    } else if (f < 1.0 / double(in.n_nbrs)) {
        plan.placement = CodePlacement::OnDisk;
        plan.n_cv = in.n_nbrs;
        plan.mem_fraction = 0.0;
    } else {
        plan.placement = CodePlacement::Hybrid;
        plan.n_cv = uint32_t(std::ceil(double(in.n_nbrs) * (1.0 - f)));
    }

    const int64_t numer = int64_t(in.s_page) - int64_t(plan.fixed_bytes());
    const int64_t row = int64_t(in.dim) * in.s_dtype;
    const int64_t n_nodes = numer / row;
    if (numer < 0 || n_nodes < 1) {
        detail::fail("page too small for one vector");
    }
    plan.n_nodes = uint32_t(n_nodes);
    return plan;
}

/// Vector-per-node baseline: one vector per page with all neighbor codes on
/// the page, approximating a classic vector-granularity disk layout.
inline PagePlan plan_vector_baseline(const PlanInputs& in) {
    PagePlan plan;
    plan.s_page = in.s_page;
    plan.n_nbrs = in.n_nbrs;
    plan.s_cv = in.m_disk;
    plan.n_cv = in.n_nbrs;
    plan.dim = in.dim;
    plan.s_dtype = in.s_dtype;
    plan.n_nodes = 1;
    plan.placement = CodePlacement::OnDisk;
    plan.mem_fraction = 0.0;
    if (plan.page_payload_bytes(1, in.n_nbrs) > in.s_page) {
        detail::fail("page too small for one vector");
    }
    return plan;
}

} // namespace quire
