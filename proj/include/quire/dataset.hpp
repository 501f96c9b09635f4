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
#include <span>
#include <string>
#include <vector>

#include "quire/common.hpp"

namespace quire {

/// Immutable row-major container of `count` vectors of dimension `dim`.
/// Safe for unsynchronized concurrent reads once constructed.
class Dataset {
  public:
    Dataset() = default;

    Dataset(size_t count, size_t dim, ElemKind elem, std::vector<char> data)
        : count_(count), dim_(dim), elem_(elem), data_(std::move(data)) {
        detail::require(count_ >= 1, "dataset count must be >= 1");
        detail::require(dim_ >= 1, "dataset dim must be >= 1");
        detail::require(data_.size() == count_ * dim_ * elem_size(elem_),
                        "dataset byte length does not match count*dim*elem_size");
    }

    size_t count() const { return count_; }
    size_t dim() const { return dim_; }
    ElemKind elem() const { return elem_; }
    size_t row_bytes() const { return dim_ * elem_size(elem_); }
    const char* raw() const { return data_.data(); }

    const char* row_raw(VectorId id) const { return data_.data() + size_t(id) * row_bytes(); }

    template <typename T>
    const T* row(VectorId id) const {
        return reinterpret_cast<const T*>(row_raw(id));
    }

    template <typename T>
    std::span<const T> row_span(VectorId id) const {
        return {row<T>(id), dim_};
    }

    /// Per-dimension mean over all vectors, in double.
    std::vector<double> mean() const {
        std::vector<double> m(dim_, 0.0);
        dispatch_elem(elem_, [&](auto tag) {
            using T = decltype(tag);
            for (size_t i = 0; i < count_; ++i) {
                const T* r = row<T>(VectorId(i));
                for (size_t d = 0; d < dim_; ++d) {
                    m[d] += double(r[d]);
                }
            }
        });
        for (auto& v : m) {
            v /= double(count_);
        }
        return m;
    }

    /// Dataset with rows permuted so that new row i = old row perm[i].
    Dataset reordered(const std::vector<VectorId>& perm) const {
        detail::require(perm.size() == count_, "permutation size mismatch");
        std::vector<char> out(data_.size());
        const size_t rb = row_bytes();
        for (size_t i = 0; i < count_; ++i) {
            std::memcpy(out.data() + i * rb, row_raw(perm[i]), rb);
        }
        return Dataset(count_, dim_, elem_, std::move(out));
    }

  private:
    size_t count_ = 0;
    size_t dim_ = 0;
    ElemKind elem_ = ElemKind::u8;
    std::vector<char> data_;
};

// ---------------------------------------------------------------------------
// Community vector file formats.
//
//   fvecs/bvecs/ivecs : per-vector u32 dim header, then dim elements
//                       (f32 / u8 / i32 respectively)
//   fbin/u8bin/i8bin  : u32 count, u32 dim header, then count*dim elements
//
// Extension decides the parser; payloads are validated against file size and
// a uniform dimension is enforced.

namespace formats {

inline std::string extension(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) {
        return "";
    }
    return path.substr(dot + 1);
}

namespace detail_fmt {

template <typename T>
Dataset load_vecs(const std::string& path, ElemKind kind) {
    auto in = quire::detail::open_in(path);
    uint64_t total = quire::detail::file_size(in);
    if (total == 0) {
        quire::detail::io_fail("empty vector file: " + path);
    }
    uint32_t dim = quire::detail::read_pod<uint32_t>(in);
    if (dim == 0) {
        quire::detail::io_fail("zero dimension in " + path);
    }
    const uint64_t rec = 4 + uint64_t(dim) * sizeof(T);
    if (total % rec != 0) {
        quire::detail::io_fail("truncated or misaligned vector file: " + path);
    }
    const uint64_t count = total / rec;
    std::vector<char> data(count * dim * sizeof(T));
    in.seekg(0);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t d = quire::detail::read_pod<uint32_t>(in);
        if (d != dim) {
            quire::detail::io_fail("dimension mismatch at record " + std::to_string(i) + " in " + path);
        }
        quire::detail::read_array(in, data.data() + i * dim * sizeof(T), dim * sizeof(T));
    }
    return Dataset(count, dim, kind, std::move(data));
}

template <typename T>
Dataset load_bin(const std::string& path, ElemKind kind) {
    auto in = quire::detail::open_in(path);
    uint64_t total = quire::detail::file_size(in);
    if (total < 8) {
        quire::detail::io_fail("empty or headerless bin file: " + path);
    }
    uint32_t count = quire::detail::read_pod<uint32_t>(in);
    uint32_t dim = quire::detail::read_pod<uint32_t>(in);
    if (count == 0 || dim == 0) {
        quire::detail::io_fail("zero count or dim in " + path);
    }
    const uint64_t want = 8 + uint64_t(count) * dim * sizeof(T);
    if (total != want) {
        quire::detail::io_fail("bin file size mismatch (" + std::to_string(total) + " vs expected " +
                               std::to_string(want) + "): " + path);
    }
    std::vector<char> data(size_t(count) * dim * sizeof(T));
    quire::detail::read_array(in, data.data(), data.size());
    return Dataset(count, dim, kind, std::move(data));
}

template <typename T>
void save_vecs(const std::string& path, const T* data, size_t count, size_t dim) {
    auto out = quire::detail::open_out(path);
    for (size_t i = 0; i < count; ++i) {
        quire::detail::write_pod(out, uint32_t(dim));
        quire::detail::write_array(out, data + i * dim, dim);
    }
    if (!out) {
        quire::detail::io_fail("write failed: " + path);
    }
}

template <typename T>
void save_bin(const std::string& path, const T* data, size_t count, size_t dim) {
    auto out = quire::detail::open_out(path);
    quire::detail::write_pod(out, uint32_t(count));
    quire::detail::write_pod(out, uint32_t(dim));
    quire::detail::write_array(out, data, count * dim);
    if (!out) {
        quire::detail::io_fail("write failed: " + path);
    }
}

} // namespace detail_fmt

/// Loads a dataset, picking the parser from the file extension.
inline Dataset load(const std::string& path) {
    const std::string ext = extension(path);
    if (ext == "fvecs") return detail_fmt::load_vecs<float>(path, ElemKind::f32);
    if (ext == "bvecs") return detail_fmt::load_vecs<uint8_t>(path, ElemKind::u8);
    if (ext == "fbin") return detail_fmt::load_bin<float>(path, ElemKind::f32);
    if (ext == "u8bin") return detail_fmt::load_bin<uint8_t>(path, ElemKind::u8);
    if (ext == "i8bin") return detail_fmt::load_bin<int8_t>(path, ElemKind::i8);
    quire::detail::io_fail("unknown dataset extension: ." + ext + " (" + path + ")");
}

/// Saves a dataset; format from extension, element kind must match.
inline void save(const std::string& path, const Dataset& ds) {
    const std::string ext = extension(path);
    if (ext == "fvecs") {
        quire::detail::require(ds.elem() == ElemKind::f32, "fvecs requires float32 data");
        detail_fmt::save_vecs(path, reinterpret_cast<const float*>(ds.raw()), ds.count(), ds.dim());
    } else if (ext == "bvecs") {
        quire::detail::require(ds.elem() == ElemKind::u8, "bvecs requires uint8 data");
        detail_fmt::save_vecs(path, reinterpret_cast<const uint8_t*>(ds.raw()), ds.count(), ds.dim());
    } else if (ext == "fbin") {
        quire::detail::require(ds.elem() == ElemKind::f32, "fbin requires float32 data");
        detail_fmt::save_bin(path, reinterpret_cast<const float*>(ds.raw()), ds.count(), ds.dim());
    } else if (ext == "u8bin") {
        quire::detail::require(ds.elem() == ElemKind::u8, "u8bin requires uint8 data");
        detail_fmt::save_bin(path, reinterpret_cast<const uint8_t*>(ds.raw()), ds.count(), ds.dim());
    } else if (ext == "i8bin") {
        quire::detail::require(ds.elem() == ElemKind::i8, "i8bin requires int8 data");
        detail_fmt::save_bin(path, reinterpret_cast<const int8_t*>(ds.raw()), ds.count(), ds.dim());
    } else {
        quire::detail::io_fail("unknown dataset extension: ." + ext);
    }
}

/// Integer id matrices (ground truth). ivecs or ibin by extension.
inline void save_ids(const std::string& path, const std::vector<uint32_t>& ids, size_t count, size_t k) {
    quire::detail::require(ids.size() == count * k, "id matrix size mismatch");
    const std::string ext = extension(path);
    if (ext == "ivecs") {
        detail_fmt::save_vecs(path, reinterpret_cast<const int32_t*>(ids.data()), count, k);
    } else if (ext == "ibin") {
        detail_fmt::save_bin(path, reinterpret_cast<const int32_t*>(ids.data()), count, k);
    } else {
        quire::detail::io_fail("unknown id-file extension: ." + ext);
    }
}

inline std::vector<uint32_t> load_ids(const std::string& path, size_t& count, size_t& k) {
    const std::string ext = extension(path);
    Dataset tmp = [&] {
        if (ext == "ivecs") return detail_fmt::load_vecs<int32_t>(path, ElemKind::f32);
        if (ext == "ibin") return detail_fmt::load_bin<int32_t>(path, ElemKind::f32);
        quire::detail::io_fail("unknown id-file extension: ." + ext);
    }();
    count = tmp.count();
    k = tmp.dim();
    const uint32_t* p = reinterpret_cast<const uint32_t*>(tmp.raw());
    return std::vector<uint32_t>(p, p + count * k);
}

/// Float matrices (ground-truth distances). fvecs or fbin by extension.
inline void save_dists(const std::string& path, const std::vector<float>& d, size_t count, size_t k) {
    quire::detail::require(d.size() == count * k, "distance matrix size mismatch");
    const std::string ext = extension(path);
    if (ext == "fvecs") {
        detail_fmt::save_vecs(path, d.data(), count, k);
    } else if (ext == "fbin") {
        detail_fmt::save_bin(path, d.data(), count, k);
    } else {
        quire::detail::io_fail("unknown distance-file extension: ." + ext);
    }
}

inline std::vector<float> load_dists(const std::string& path, size_t& count, size_t& k) {
    const std::string ext = extension(path);
    Dataset tmp = [&] {
        if (ext == "fvecs") return detail_fmt::load_vecs<float>(path, ElemKind::f32);
        if (ext == "fbin") return detail_fmt::load_bin<float>(path, ElemKind::f32);
        quire::detail::io_fail("unknown distance-file extension: ." + ext);
    }();
    count = tmp.count();
    k = tmp.dim();
    const float* p = reinterpret_cast<const float*>(tmp.raw());
    return std::vector<float>(p, p + count * k);
}

} // namespace formats

} // namespace quire
