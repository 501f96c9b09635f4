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

#include <aio.h>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fcntl.h>
#include <thread>
#include <unistd.h>
#include <unordered_map>

#include "quire/dataset.hpp"
#include "quire/page_graph.hpp"
#include "quire/page_plan.hpp"

namespace quire {

// ---------------------------------------------------------------------------
// On-disk record, one per S_page-aligned slot:
//   u16 vecCount | u16 nbrCount | vectors (vecCount * D * S_dtype)
//   | neighbor ids (nbrCount * 4) | neighbor codes (min(nbrCount, N_CV) * S_CV)
//   | zero padding to S_page
// Page p lives at byte offset (1 + p) * S_page; slot 0 holds the header.

struct IndexHeader {
    uint32_t count = 0;
    uint32_t dim = 0;
    ElemKind elem = ElemKind::u8;
    uint32_t s_page = 4096;
    uint32_t n_nodes = 0;
    uint32_t n_nbrs = 0;
    uint32_t n_cv = 0;
    uint32_t s_cv = 0;
    uint32_t page_count = 0;
    uint32_t entry_page = 0;
    // Sidecar basenames, resolved relative to the index file's directory.
    std::string ref_disk_codebook;
    std::string ref_mem_codebook;
    std::string ref_mem_codes;
    std::string ref_routing;
    std::string ref_remap;

    uint32_t s_dtype() const { return uint32_t(elem_size(elem)); }

    uint32_t page_of(VectorId id) const { return id / n_nodes; }

    /// Member count of a page: every page is full except possibly the last.
    uint32_t vecs_in_page(uint32_t page_id) const {
        if (page_id + 1 < page_count) {
            return n_nodes;
        }
        uint32_t tail = count % n_nodes;
        return tail == 0 ? n_nodes : tail;
    }
};

namespace detail {

inline void put_bytes(char*& p, const void* src, size_t n) {
    std::memcpy(p, src, n);
    p += n;
}

template <typename T>
void put_pod(char*& p, const T& v) {
    put_bytes(p, &v, sizeof(T));
}

inline void put_string(char*& p, const std::string& s) {
    put_pod(p, uint32_t(s.size()));
    put_bytes(p, s.data(), s.size());
}

template <typename T>
T get_pod(const char*& p) {
    T v{};
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    return v;
}

inline std::string get_string(const char*& p, const char* end) {
    uint32_t len = get_pod<uint32_t>(p);
    if (p + len > end) {
        io_fail("corrupt header string");
    }
    std::string s(p, p + len);
    p += len;
    return s;
}

} // namespace detail

inline void serialize_header(const IndexHeader& h, char* buf) {
    std::memset(buf, 0, h.s_page);
    char* p = buf;
    detail::put_pod(p, kMagicIndex);
    detail::put_pod(p, kFormatVersion);
    detail::put_pod(p, h.count);
    detail::put_pod(p, h.dim);
    detail::put_pod(p, uint32_t(h.elem));
    detail::put_pod(p, h.s_page);
    detail::put_pod(p, h.n_nodes);
    detail::put_pod(p, h.n_nbrs);
    detail::put_pod(p, h.n_cv);
    detail::put_pod(p, h.s_cv);
    detail::put_pod(p, h.page_count);
    detail::put_pod(p, h.entry_page);
    detail::put_string(p, h.ref_disk_codebook);
    detail::put_string(p, h.ref_mem_codebook);
    detail::put_string(p, h.ref_mem_codes);
    detail::put_string(p, h.ref_routing);
    detail::put_string(p, h.ref_remap);
    if (p - buf > std::ptrdiff_t(h.s_page)) {
        detail::fail("header exceeds one page slot");
    }
}

inline IndexHeader parse_header(const char* buf, size_t len) {
    const char* p = buf;
    const char* end = buf + len;
    IndexHeader h;
    uint32_t magic = detail::get_pod<uint32_t>(p);
    uint32_t version = detail::get_pod<uint32_t>(p);
    if (magic != kMagicIndex) {
        detail::io_fail("not an index file (bad magic)");
    }
    if (version != kFormatVersion) {
        detail::io_fail("unsupported index version");
    }
    h.count = detail::get_pod<uint32_t>(p);
    h.dim = detail::get_pod<uint32_t>(p);
    h.elem = ElemKind(detail::get_pod<uint32_t>(p));
    h.s_page = detail::get_pod<uint32_t>(p);
    h.n_nodes = detail::get_pod<uint32_t>(p);
    h.n_nbrs = detail::get_pod<uint32_t>(p);
    h.n_cv = detail::get_pod<uint32_t>(p);
    h.s_cv = detail::get_pod<uint32_t>(p);
    h.page_count = detail::get_pod<uint32_t>(p);
    h.entry_page = detail::get_pod<uint32_t>(p);
    h.ref_disk_codebook = detail::get_string(p, end);
    h.ref_mem_codebook = detail::get_string(p, end);
    h.ref_mem_codes = detail::get_string(p, end);
    h.ref_routing = detail::get_string(p, end);
    h.ref_remap = detail::get_string(p, end);
    if (h.n_nodes == 0 || h.page_count != (h.count + h.n_nodes - 1) / h.n_nodes) {
        detail::io_fail("index header page count mismatch");
    }
    return h;
}

/// Read-only view over one page buffer.
struct PageView {
    uint32_t page_id = 0;
    const char* base = nullptr;
    const IndexHeader* header = nullptr;

    uint16_t vec_count() const {
        uint16_t v;
        std::memcpy(&v, base, 2);
        return v;
    }
    uint16_t nbr_count() const {
        uint16_t v;
        std::memcpy(&v, base + 2, 2);
        return v;
    }
    const char* member_raw(uint32_t slot) const {
        return base + 4 + size_t(slot) * header->dim * header->s_dtype();
    }
    VectorId member_id(uint32_t slot) const { return page_id * header->n_nodes + slot; }
    const char* nbr_id_base() const {
        return base + 4 + size_t(vec_count()) * header->dim * header->s_dtype();
    }
    VectorId nbr_id(uint32_t slot) const {
        VectorId v;
        std::memcpy(&v, nbr_id_base() + size_t(slot) * 4, 4);
        return v;
    }
    uint32_t code_slots() const { return std::min<uint32_t>(nbr_count(), header->n_cv); }
    const uint8_t* nbr_code(uint32_t slot) const {
        return reinterpret_cast<const uint8_t*>(nbr_id_base() + size_t(nbr_count()) * 4 +
                                                size_t(slot) * header->s_cv);
    }
};

/// Serializes one page into an S_page buffer. Throws if the payload would
/// overflow the slot (never truncates).
inline void serialize_page(const FinalPage& page, const Dataset& ds, const PagePlan& plan, char* buf) {
    const uint64_t payload =
        plan.page_payload_bytes(uint32_t(page.members_old.size()), uint32_t(page.nbrs_new.size()));
    if (payload > plan.s_page) {
        detail::fail("serialized page exceeds S_page (" + std::to_string(payload) + " > " +
                     std::to_string(plan.s_page) + " bytes)");
    }
    std::memset(buf, 0, plan.s_page);
    char* p = buf;
    detail::put_pod(p, uint16_t(page.members_old.size()));
    detail::put_pod(p, uint16_t(page.nbrs_new.size()));
    const size_t row = ds.row_bytes();
    for (VectorId old_id : page.members_old) {
        detail::put_bytes(p, ds.row_raw(old_id), row);
    }
    detail::put_bytes(p, page.nbrs_new.data(), page.nbrs_new.size() * 4);
    // Code slots past disk_coded belong to memory-resident codes; the memset
    // above already left them zeroed.
    detail::put_bytes(p, page.nbr_codes.data(), page.nbr_codes.size());
}

/// Writes header plus all pages; the file is exactly (1 + pageCount) * S_page
/// bytes.
inline void write_index(const std::string& path, const IndexHeader& header, const PagePlan& plan,
                        const std::vector<FinalPage>& pages, const Dataset& ds) {
    auto out = detail::open_out(path);
    std::vector<char> buf(plan.s_page);
    serialize_header(header, buf.data());
    out.write(buf.data(), buf.size());
    for (const auto& page : pages) {
        serialize_page(page, ds, plan, buf.data());
        out.write(buf.data(), buf.size());
    }
    out.flush();
    if (!out) {
        detail::io_fail("write failed: " + path);
    }
    out.close();
    auto in = detail::open_in(path);
    uint64_t size = detail::file_size(in);
    uint64_t want = uint64_t(1 + pages.size()) * plan.s_page;
    if (size != want) {
        detail::io_fail("index file size mismatch after write");
    }
}

// ---------------------------------------------------------------------------
// Batched asynchronous page reader. Reads are submitted in one POSIX AIO
// batch; completions may land in any order. The file is opened with O_DIRECT
// when the filesystem permits so the I/O counter sees real storage reads;
// otherwise it degrades to counted buffered reads.

class PageFile {
  public:
    explicit PageFile(const std::string& path, double inject_latency_ms = 0.0)
        : inject_latency_ms_(inject_latency_ms) {
        // Header first, via buffered I/O.
        {
            auto in = detail::open_in(path);
            std::vector<char> buf(4096);
            in.read(buf.data(), buf.size());
            if (in.gcount() < 64) {
                detail::io_fail("index file too short: " + path);
            }
            IndexHeader probe = parse_header(buf.data(), size_t(in.gcount()));
            if (probe.s_page > buf.size()) {
                buf.resize(probe.s_page);
                in.seekg(0);
                in.read(buf.data(), buf.size());
                if (uint64_t(in.gcount()) != probe.s_page) {
                    detail::io_fail("index file too short: " + path);
                }
                probe = parse_header(buf.data(), buf.size());
            }
            header_ = probe;
            uint64_t want = uint64_t(1 + header_.page_count) * header_.s_page;
            if (detail::file_size(in) != want) {
                detail::io_fail("index file size mismatch (corrupt or truncated): " + path);
            }
        }
        fd_ = ::open(path.c_str(), O_RDONLY | O_DIRECT);
        if (fd_ >= 0) {
            direct_ = true;
        } else {
            fd_ = ::open(path.c_str(), O_RDONLY);
            direct_ = false;
        }
        if (fd_ < 0) {
            detail::io_fail("cannot open index file: " + path);
        }
    }

    ~PageFile() {
        if (fd_ >= 0) {
            ::close(fd_);
        }
    }

    PageFile(const PageFile&) = delete;
    PageFile& operator=(const PageFile&) = delete;

    const IndexHeader& header() const { return header_; }
    bool direct_io() const { return direct_; }
    double inject_latency_ms() const { return inject_latency_ms_; }
    void set_inject_latency_ms(double ms) { inject_latency_ms_ = ms; }

    struct Batch {
        std::vector<uint32_t> page_ids;
        std::vector<aiocb> cbs;
        std::vector<char> done; // per-request: already satisfied synchronously
        char* buf = nullptr;
        std::chrono::steady_clock::time_point deadline{};
        uint64_t bytes = 0;
    };

    /// Submits one asynchronous batch; page i lands at buf + i * S_page.
    /// The buffer must be S_page-aligned and hold page_ids.size() pages.
    Batch submit(std::span<const uint32_t> page_ids, char* buf) const {
        Batch batch;
        batch.page_ids.assign(page_ids.begin(), page_ids.end());
        batch.buf = buf;
        if (inject_latency_ms_ > 0.0 && !page_ids.empty()) {
            batch.deadline = std::chrono::steady_clock::now() +
                             std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                 std::chrono::duration<double, std::milli>(inject_latency_ms_));
        }
        if (page_ids.empty()) {
            return batch;
        }
        batch.cbs.assign(page_ids.size(), aiocb{});
        std::vector<aiocb*> list(page_ids.size());
        for (size_t i = 0; i < page_ids.size(); ++i) {
            if (page_ids[i] >= header_.page_count) {
                detail::fail("page id out of range: " + std::to_string(page_ids[i]));
            }
            aiocb& cb = batch.cbs[i];
            cb.aio_fildes = fd_;
            cb.aio_offset = off_t(uint64_t(1 + page_ids[i]) * header_.s_page);
            cb.aio_buf = buf + i * size_t(header_.s_page);
            cb.aio_nbytes = header_.s_page;
            cb.aio_sigevent.sigev_notify = SIGEV_NONE;
            list[i] = &cb;
        }
        if (lio_listio(LIO_NOWAIT, list.data(), int(list.size()), nullptr) != 0 &&
            errno != EAGAIN && errno != EINTR && errno != EIO) {
            // AIO unavailable; fall back to synchronous positioned reads.
            batch.cbs.clear();
            batch.synchronous = true;
            for (size_t i = 0; i < batch.page_ids.size(); ++i) {
                read_one(batch.page_ids[i], buf + i * size_t(header_.s_page));
            }
            batch.bytes = batch.page_ids.size() * uint64_t(header_.s_page);
        }
        return batch;
    }

    /// Blocks until every read in the batch completed; throws on any failure
    /// or short read. Injected latency is honored here: the call returns no
    /// earlier than the deadline stamped at submission.
    void finish(Batch& batch) const {
        if (!batch.synchronous) {
            for (auto& cb : batch.cbs) {
                int err;
                while ((err = aio_error(&cb)) == EINPROGRESS) {
                    const aiocb* wait_list[1] = {&cb};
                    aio_suspend(wait_list, 1, nullptr);
                }
                if (err != 0) {
                    detail::io_fail(std::string("page read failed: ") + std::strerror(err));
                }
                ssize_t got = aio_return(&cb);
                if (got != ssize_t(header_.s_page)) {
                    detail::io_fail("short page read");
                }
                batch.bytes += uint64_t(got);
            }
            batch.cbs.clear();
        }
        if (batch.deadline.time_since_epoch().count() != 0) {
            std::this_thread::sleep_until(batch.deadline);
        }
    }

    /// Synchronous single-page read (header slot excluded).
    void read_one(uint32_t page_id, char* buf) const {
        if (page_id >= header_.page_count) {
            detail::fail("page id out of range: " + std::to_string(page_id));
        }
        ssize_t got = ::pread(fd_, buf, header_.s_page, off_t(uint64_t(1 + page_id) * header_.s_page));
        if (got != ssize_t(header_.s_page)) {
            detail::io_fail("short page read");
        }
    }

  private:
    IndexHeader header_;
    int fd_ = -1;
    bool direct_ = false;
    double inject_latency_ms_ = 0.0;
};

/// Frequency-pinned read-only page cache; contents fixed before queries run.
class PageCache {
  public:
    PageCache() = default;

    /// Pins the given pages (already ranked) into memory.
    PageCache(const PageFile& file, std::span<const uint32_t> page_ids) {
        const uint32_t s_page = file.header().s_page;
        data_.allocate(std::max<size_t>(size_t(page_ids.size()) * s_page, s_page), s_page);
        index_.reserve(page_ids.size());
        for (size_t i = 0; i < page_ids.size(); ++i) {
            char* dst = data_.data() + i * size_t(s_page);
            file.read_one(page_ids[i], dst);
            index_.emplace(page_ids[i], uint32_t(i));
        }
        s_page_ = s_page;
    }

    const char* find(uint32_t page_id) const {
        auto it = index_.find(page_id);
        if (it == index_.end()) {
            return nullptr;
        }
        return data_.data() + size_t(it->second) * s_page_;
    }

    size_t pages() const { return index_.size(); }
    size_t bytes() const { return index_.size() * size_t(s_page_); }

  private:
    AlignedBuffer data_;
    std::unordered_map<uint32_t, uint32_t> index_;
    uint32_t s_page_ = 0;
};

} // namespace quire
