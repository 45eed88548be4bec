#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "heaven/types.hpp"

namespace heaven {

// Embedding file layout, all integers little-endian:
//   magic "HVNE" | version u32 = 1 | dtype u8 = 1 (float32) | 3 reserved zero bytes
//   rows u64 | dim u64 | rows*dim float32 payload
inline constexpr char kEmbeddingMagic[4] = {'H', 'V', 'N', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::uint8_t kEmbeddingDtypeF32 = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 4 + 4 + 1 + 3 + 8 + 8;

static_assert(std::endian::native == std::endian::little,
              "embedding file I/O assumes a little-endian host");

inline void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
    m.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot open for write: " + path.string());
    out.write(kEmbeddingMagic, 4);
    std::uint32_t version = kEmbeddingVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    std::uint8_t dtype = kEmbeddingDtypeF32;
    out.write(reinterpret_cast<const char*>(&dtype), 1);
    const char zeros[3] = {0, 0, 0};
    out.write(zeros, 3);
    std::uint64_t rows = static_cast<std::uint64_t>(m.rows);
    std::uint64_t dim = static_cast<std::uint64_t>(m.dim);
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&dim), 8);
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::missing_file, "cannot open: " + path.string());

    char header[kEmbeddingHeaderSize];
    in.read(header, sizeof(header));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(header)))
        throw Error(Errc::truncated, "embedding file shorter than header: " + path.string());
    if (std::memcmp(header, kEmbeddingMagic, 4) != 0)
        throw Error(Errc::bad_magic, "bad magic in " + path.string());
    std::uint32_t version;
    std::memcpy(&version, header + 4, 4);
    if (version != kEmbeddingVersion)
        throw Error(Errc::bad_version,
                    "unsupported embedding file version " + std::to_string(version));
    if (static_cast<std::uint8_t>(header[8]) != kEmbeddingDtypeF32)
        throw Error(Errc::bad_dtype, "unsupported dtype in " + path.string());

    std::uint64_t rows, dim;
    std::memcpy(&rows, header + 12, 8);
    std::memcpy(&dim, header + 20, 8);
    if (rows < 1 || dim < 1)
        throw Error(Errc::bad_manifest, "embedding file declares empty matrix: " + path.string());

    EmbeddingMatrix m;
    m.rows = static_cast<std::int64_t>(rows);
    m.dim = static_cast<std::int64_t>(dim);
    m.data.resize(rows * dim);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(m.data.size() * sizeof(float)))
        throw Error(Errc::truncated, "embedding payload truncated: " + path.string());
    for (float v : m.data)
        if (!std::isfinite(v))
            throw Error(Errc::non_finite, "non-finite value in " + path.string());
    return m;
}

inline PooledVector load_pooled(const std::filesystem::path& path) {
    EmbeddingMatrix m = load_embeddings(path);
    if (m.rows != 1)
        throw Error(Errc::bad_manifest,
                    "pooled embedding file must have rows == 1: " + path.string());
    return PooledVector{std::move(m.data)};
}

inline void write_pooled(const PooledVector& v, const std::filesystem::path& path) {
    EmbeddingMatrix m;
    m.rows = 1;
    m.dim = v.dim();
    m.data = v.data;
    write_embeddings(m, path);
}

}  // namespace heaven
