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
#include <cmath>
#include <iostream>
#include <random>
#include <vector>

#include "quire/dataset.hpp"
#include "quire/distance.hpp"

namespace quire {

/// Product quantizer: M subspaces ("chunks"), 256 float centroids each, one
/// byte of code per chunk (so a code is exactly M bytes). Dimensions are
/// zero-padded up to a multiple of M. Immutable once trained.
class Quantizer {
  public:
    static constexpr uint32_t kCentroids = 256;

    Quantizer() = default;

    Quantizer(uint32_t chunks, uint32_t dim, std::vector<float> codebooks)
        : chunks_(chunks), dim_(dim), padded_dim_((dim + chunks - 1) / chunks * chunks),
          codebooks_(std::move(codebooks)) {
        detail::require(chunks_ >= 1, "quantizer needs at least one chunk");
        detail::require(codebooks_.size() == size_t(chunks_) * kCentroids * sub_dim(),
                        "codebook size mismatch");
    }

    uint32_t chunks() const { return chunks_; }
    uint32_t dim() const { return dim_; }
    uint32_t padded_dim() const { return padded_dim_; }
    uint32_t sub_dim() const { return padded_dim_ / chunks_; }
    uint32_t code_bytes() const { return chunks_; } // S_CV
    const std::vector<float>& codebooks() const { return codebooks_; }

    const float* centroid(uint32_t chunk, uint32_t j) const {
        return codebooks_.data() + (size_t(chunk) * kCentroids + j) * sub_dim();
    }

    /// Nearest centroid index per chunk; ties to the lowest index.
    template <typename T>
    void encode(const T* v, uint8_t* code) const {
        const uint32_t sd = sub_dim();
        std::vector<double> slice(sd);
        for (uint32_t c = 0; c < chunks_; ++c) {
            for (uint32_t d = 0; d < sd; ++d) {
                uint32_t src = c * sd + d;
                slice[d] = src < dim_ ? double(v[src]) : 0.0;
            }
            uint32_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (uint32_t j = 0; j < kCentroids; ++j) {
                const float* cent = centroid(c, j);
                double acc = 0.0;
                for (uint32_t d = 0; d < sd; ++d) {
                    double diff = slice[d] - double(cent[d]);
                    acc += diff * diff;
                }
                if (acc < best_d) {
                    best_d = acc;
                    best = j;
                }
            }
            code[c] = uint8_t(best);
        }
    }

    template <typename T>
    void decode(const uint8_t* code, T* out) const {
        const uint32_t sd = sub_dim();
        for (uint32_t c = 0; c < chunks_; ++c) {
            const float* cent = centroid(c, code[c]);
            for (uint32_t d = 0; d < sd; ++d) {
                uint32_t dst = c * sd + d;
                if (dst < dim_) {
                    out[dst] = T(cent[d]);
                }
            }
        }
    }

    /// Per-query table of squared distances from q's chunk slices to every
    /// centroid: M x 256 doubles, O(M * 256 * D/M) to build.
    template <typename T>
    std::vector<double> build_lut(const T* q) const {
        const uint32_t sd = sub_dim();
        std::vector<double> lut(size_t(chunks_) * kCentroids);
        std::vector<double> slice(sd);
        for (uint32_t c = 0; c < chunks_; ++c) {
            for (uint32_t d = 0; d < sd; ++d) {
                uint32_t src = c * sd + d;
                slice[d] = src < dim_ ? double(q[src]) : 0.0;
            }
            for (uint32_t j = 0; j < kCentroids; ++j) {
                const float* cent = centroid(c, j);
                double acc = 0.0;
                for (uint32_t d = 0; d < sd; ++d) {
                    double diff = slice[d] - double(cent[d]);
                    acc += diff * diff;
                }
                lut[size_t(c) * kCentroids + j] = acc;
            }
        }
        return lut;
    }

  private:
    uint32_t chunks_ = 0;
    uint32_t dim_ = 0;
    uint32_t padded_dim_ = 0;
    std::vector<float> codebooks_; // chunks x 256 x sub_dim
};

/// Asymmetric distance: sum of the query's per-chunk LUT entries at the code's
/// centroid indices.
inline Distance estimated_distance(const std::vector<double>& lut, const uint8_t* code, uint32_t chunks) {
    double acc = 0.0;
    for (uint32_t c = 0; c < chunks; ++c) {
        acc += lut[size_t(c) * Quantizer::kCentroids + code[c]];
    }
    return acc;
}

/// Codes for a whole dataset, row-major, M bytes per vector.
struct CodeArray {
    uint32_t count = 0;
    uint32_t chunks = 0;
    std::vector<uint8_t> codes;

    const uint8_t* code(VectorId id) const { return codes.data() + size_t(id) * chunks; }
};

struct TrainParams {
    uint32_t chunks = 8;
    uint32_t sample = 0; // 0 = whole dataset
    uint64_t seed = 42;
    uint32_t iterations = 25;
};

namespace detail {

// k-means++ seeding over one chunk's slices; deterministic for a fixed rng.
inline std::vector<float> kmeans_chunk(const std::vector<double>& points, uint32_t n, uint32_t sd,
                                       uint32_t k, uint32_t iterations, std::mt19937_64& rng,
                                       bool* degenerate) {
    auto sq = [&](const double* a, const float* b) {
        double acc = 0.0;
        for (uint32_t d = 0; d < sd; ++d) {
            double diff = a[d] - double(b[d]);
            acc += diff * diff;
        }
        return acc;
    };

    std::vector<float> centroids(size_t(k) * sd, 0.0f);
    std::uniform_int_distribution<uint32_t> first(0, n - 1);
    uint32_t c0 = first(rng);
    for (uint32_t d = 0; d < sd; ++d) {
        centroids[d] = float(points[size_t(c0) * sd + d]);
    }
    std::vector<double> best_d(n);
    for (uint32_t i = 0; i < n; ++i) {
        best_d[i] = sq(&points[size_t(i) * sd], &centroids[0]);
    }
    for (uint32_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (uint32_t i = 0; i < n; ++i) total += best_d[i];
        uint32_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            double run = 0.0;
            chosen = n - 1;
            for (uint32_t i = 0; i < n; ++i) {
                run += best_d[i];
                if (run >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // All sample points already coincide with a centroid.
            chosen = first(rng);
            if (degenerate) {
                *degenerate = true;
            }
        }
        float* cent = &centroids[size_t(c) * sd];
        for (uint32_t d = 0; d < sd; ++d) {
            cent[d] = float(points[size_t(chosen) * sd + d]);
        }
        for (uint32_t i = 0; i < n; ++i) {
            best_d[i] = std::min(best_d[i], sq(&points[size_t(i) * sd], cent));
        }
    }

    std::vector<uint32_t> assign(n, 0);
    std::vector<double> sums(size_t(k) * sd);
    std::vector<uint32_t> counts(k);
    for (uint32_t it = 0; it < iterations; ++it) {
        bool moved = false;
        for (uint32_t i = 0; i < n; ++i) {
            uint32_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (uint32_t c = 0; c < k; ++c) {
                double d = sq(&points[size_t(i) * sd], &centroids[size_t(c) * sd]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                moved = true;
            }
        }
        if (!moved && it > 0) {
            break;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0u);
        for (uint32_t i = 0; i < n; ++i) {
            counts[assign[i]]++;
            const double* p = &points[size_t(i) * sd];
            double* s = &sums[size_t(assign[i]) * sd];
            for (uint32_t d = 0; d < sd; ++d) {
                s[d] += p[d];
            }
        }
        for (uint32_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                continue; // empty cluster keeps its centroid
            }
            float* cent = &centroids[size_t(c) * sd];
            for (uint32_t d = 0; d < sd; ++d) {
                cent[d] = float(sums[size_t(c) * sd + d] / counts[c]);
            }
        }
    }
    return centroids;
}

} // namespace detail

/// Trains per-chunk k-means (k = 256, k-means++ init) on a seeded sample.
/// Deterministic for a fixed seed. Fewer than 256 distinct points in a chunk
/// leaves duplicate centroids and emits a warning.
inline Quantizer train_quantizer(const Dataset& ds, const TrainParams& p) {
    const uint32_t n_sample = p.sample == 0 ? uint32_t(ds.count())
                                            : uint32_t(std::min<size_t>(p.sample, ds.count()));
    detail::require(n_sample >= Quantizer::kCentroids, "quantizer training sample must be >= 256");
    const uint32_t dim = uint32_t(ds.dim());
    const uint32_t padded = (dim + p.chunks - 1) / p.chunks * p.chunks;
    const uint32_t sd = padded / p.chunks;

    std::mt19937_64 rng(p.seed);
    std::vector<VectorId> sample(ds.count());
    for (size_t i = 0; i < sample.size(); ++i) sample[i] = VectorId(i);
    if (n_sample < ds.count()) {
        std::shuffle(sample.begin(), sample.end(), rng);
        sample.resize(n_sample);
        std::sort(sample.begin(), sample.end());
    }

    std::vector<float> codebooks(size_t(p.chunks) * Quantizer::kCentroids * sd);
    bool degenerate = false;
    std::vector<double> points(size_t(n_sample) * sd);
    dispatch_elem(ds.elem(), [&](auto tag) {
        using T = decltype(tag);
        for (uint32_t c = 0; c < p.chunks; ++c) {
            for (uint32_t i = 0; i < n_sample; ++i) {
                const T* row = ds.row<T>(sample[i]);
                for (uint32_t d = 0; d < sd; ++d) {
                    uint32_t src = c * sd + d;
                    points[size_t(i) * sd + d] = src < dim ? double(row[src]) : 0.0;
                }
            }
            auto cent = detail::kmeans_chunk(points, n_sample, sd, Quantizer::kCentroids,
                                             p.iterations, rng, &degenerate);
            std::copy(cent.begin(), cent.end(),
                      codebooks.begin() + size_t(c) * Quantizer::kCentroids * sd);
        }
    });
    if (degenerate) {
        std::cerr << "warning: fewer than 256 distinct sample points in a chunk; "
                     "duplicate centroids retained\n";
    }
    return Quantizer(p.chunks, dim, std::move(codebooks));
}

inline CodeArray encode_all(const Quantizer& qz, const Dataset& ds) {
    CodeArray arr;
    arr.count = uint32_t(ds.count());
    arr.chunks = qz.chunks();
    arr.codes.resize(size_t(arr.count) * arr.chunks);
    dispatch_elem(ds.elem(), [&](auto tag) {
        using T = decltype(tag);
        for (size_t i = 0; i < ds.count(); ++i) {
            qz.encode(ds.row<T>(VectorId(i)), arr.codes.data() + i * arr.chunks);
        }
    });
    return arr;
}

// ---------------------------------------------------------------------------
// Sidecar formats (little-endian, magic + version first).
// Codebook: header (M, D, 256) + float32 centroids.
// Codes:    header (count, M) + raw codes.

inline void save_quantizer(const std::string& path, const Quantizer& qz) {
    auto out = detail::open_out(path);
    detail::write_pod(out, kMagicCodebook);
    detail::write_pod(out, kFormatVersion);
    detail::write_pod(out, qz.chunks());
    detail::write_pod(out, qz.dim());
    detail::write_pod(out, Quantizer::kCentroids);
    detail::write_array(out, qz.codebooks().data(), qz.codebooks().size());
    if (!out) {
        detail::io_fail("write failed: " + path);
    }
}

inline Quantizer load_quantizer(const std::string& path) {
    auto in = detail::open_in(path);
    detail::check_magic(in, kMagicCodebook, kFormatVersion, path);
    uint32_t chunks = detail::read_pod<uint32_t>(in);
    uint32_t dim = detail::read_pod<uint32_t>(in);
    uint32_t cents = detail::read_pod<uint32_t>(in);
    if (cents != Quantizer::kCentroids) {
        detail::io_fail("unexpected centroid count in " + path);
    }
    uint32_t padded = (dim + chunks - 1) / chunks * chunks;
    std::vector<float> cb(size_t(chunks) * cents * (padded / chunks));
    detail::read_array(in, cb.data(), cb.size());
    return Quantizer(chunks, dim, std::move(cb));
}

inline void save_codes(const std::string& path, const CodeArray& arr) {
    auto out = detail::open_out(path);
    detail::write_pod(out, kMagicCodes);
    detail::write_pod(out, kFormatVersion);
    detail::write_pod(out, arr.count);
    detail::write_pod(out, arr.chunks);
    detail::write_array(out, arr.codes.data(), arr.codes.size());
    if (!out) {
        detail::io_fail("write failed: " + path);
    }
}

inline CodeArray load_codes(const std::string& path) {
    auto in = detail::open_in(path);
    detail::check_magic(in, kMagicCodes, kFormatVersion, path);
    CodeArray arr;
    arr.count = detail::read_pod<uint32_t>(in);
    arr.chunks = detail::read_pod<uint32_t>(in);
    arr.codes.resize(size_t(arr.count) * arr.chunks);
    detail::read_array(in, arr.codes.data(), arr.codes.size());
    return arr;
}

} // namespace quire
