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

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace quire {

using VectorId = uint32_t;
using Distance = double;

inline constexpr VectorId kInvalidId = 0xFFFFFFFFu;

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what) : Error(what) {}
};

namespace detail {

[[noreturn]] inline void fail(const std::string& msg) {
    throw Error(msg);
}

[[noreturn]] inline void io_fail(const std::string& msg) {
    throw IoError(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw std::invalid_argument(msg);
    }
}

} // namespace detail

enum class ElemKind : uint8_t {
    u8 = 0,
    i8 = 1,
    f32 = 2,
};

inline size_t elem_size(ElemKind k) {
    switch (k) {
    case ElemKind::u8:
    case ElemKind::i8:
        return 1;
    case ElemKind::f32:
        return 4;
    }
    detail::fail("unknown element kind");
}

inline const char* elem_name(ElemKind k) {
    switch (k) {
    case ElemKind::u8:
        return "uint8";
    case ElemKind::i8:
        return "int8";
    case ElemKind::f32:
        return "float32";
    }
    return "?";
}

inline ElemKind elem_from_name(const std::string& s) {
    if (s == "uint8" || s == "u8") return ElemKind::u8;
    if (s == "int8" || s == "i8") return ElemKind::i8;
    if (s == "float32" || s == "float" || s == "f32") return ElemKind::f32;
    detail::fail("unknown element kind: " + s);
}

// Calls f with a value of the matching element type; the one runtime->template
// dispatch point for the whole library.
template <typename F>
decltype(auto) dispatch_elem(ElemKind k, F&& f) {
    switch (k) {
    case ElemKind::u8:
        return f(uint8_t{});
    case ElemKind::i8:
        return f(int8_t{});
    case ElemKind::f32:
        return f(float{});
    }
    detail::fail("unknown element kind");
}

// ---------------------------------------------------------------------------
// Little-endian binary I/O. All on-disk formats are little-endian; the
// helpers below byte-copy, so they are exact on LE hosts (the only ones this
// project targets).

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        io_fail("unexpected end of file");
    }
    return v;
}

template <typename T>
void write_array(std::ostream& out, const T* data, size_t n) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void read_array(std::istream& in, T* data, size_t n) {
    static_assert(std::is_trivially_copyable_v<T>);
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in) {
        io_fail("unexpected end of file");
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        io_fail("cannot open for writing: " + path);
    }
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        io_fail("cannot open for reading: " + path);
    }
    return in;
}

inline uint64_t file_size(std::ifstream& in) {
    auto pos = in.tellg();
    in.seekg(0, std::ios::end);
    auto end = in.tellg();
    in.seekg(pos);
    return static_cast<uint64_t>(end);
}

inline void check_magic(std::istream& in, uint32_t magic, uint32_t version, const std::string& what) {
    uint32_t m = read_pod<uint32_t>(in);
    uint32_t v = read_pod<uint32_t>(in);
    if (m != magic) {
        io_fail("bad magic in " + what);
    }
    if (v != version) {
        io_fail("unsupported version in " + what);
    }
}

} // namespace detail

// Sidecar/file magics ('Q' 'x' 'x' 'x' read as LE u32).
inline constexpr uint32_t kMagicIndex = 0x58444951u;   // "QIDX"
inline constexpr uint32_t kMagicCodebook = 0x4B424351u; // "QCBK"
inline constexpr uint32_t kMagicCodes = 0x53444351u;    // "QCDS"
inline constexpr uint32_t kMagicRouting = 0x45545251u;  // "QRTE"
inline constexpr uint32_t kMagicRemap = 0x50414D51u;    // "QMAP"
inline constexpr uint32_t kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Page-aligned heap buffer for direct I/O.

class AlignedBuffer {
  public:
    AlignedBuffer() = default;

    AlignedBuffer(size_t bytes, size_t alignment) { allocate(bytes, alignment); }

    AlignedBuffer(AlignedBuffer&& other) noexcept
        : data_(other.data_), bytes_(other.bytes_) {
        other.data_ = nullptr;
        other.bytes_ = 0;
    }

    AlignedBuffer& operator=(AlignedBuffer&& other) noexcept {
        if (this != &other) {
            release();
            data_ = other.data_;
            bytes_ = other.bytes_;
            other.data_ = nullptr;
            other.bytes_ = 0;
        }
        return *this;
    }

    AlignedBuffer(const AlignedBuffer&) = delete;
    AlignedBuffer& operator=(const AlignedBuffer&) = delete;

    ~AlignedBuffer() { release(); }

    void allocate(size_t bytes, size_t alignment) {
        release();
        void* p = nullptr;
        if (posix_memalign(&p, alignment, bytes) != 0) {
            detail::fail("aligned allocation failed");
        }
        std::memset(p, 0, bytes);
        data_ = static_cast<char*>(p);
        bytes_ = bytes;
    }

    char* data() { return data_; }
    const char* data() const { return data_; }
    size_t size() const { return bytes_; }
    bool empty() const { return data_ == nullptr; }

  private:
    void release() {
        std::free(data_);
        data_ = nullptr;
        bytes_ = 0;
    }

    char* data_ = nullptr;
    size_t bytes_ = 0;
};

} // namespace quire
