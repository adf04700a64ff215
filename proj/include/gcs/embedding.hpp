#pragma once
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "gcs/error.hpp"
#include "gcs/matrix.hpp"

namespace gcs {

// Embedding file format "GCSE", version 1, little-endian:
//   magic   4 bytes  'G' 'C' 'S' 'E'
//   version u32      = 1
//   rows    u64
//   dim     u32
//   payload rows*dim f32, row-major
// Values are widened to doubles in memory; save narrows back to f32, so a
// load/save round trip is byte-identical.

namespace detail {

template <typename T>
void write_le(std::ofstream& out, T value) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool read_le(std::ifstream& in, T& value) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        return false;
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        acc |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    value = static_cast<T>(acc);
    return true;
}

} // namespace detail

inline constexpr char kEmbeddingMagic[4] = {'G', 'C', 'S', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

inline void save_embeddings(const EmbeddingMatrix& m, const std::string& path) {
    if (!m.all_finite())
        throw NumericError("save_embeddings: non-finite value in matrix");
    if (m.rows() == 0 || m.cols() == 0)
        throw DataError("save_embeddings: empty matrix");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write embeddings: " + path);
    out.write(kEmbeddingMagic, 4);
    detail::write_le<std::uint32_t>(out, kEmbeddingVersion);
    detail::write_le<std::uint64_t>(out, m.rows());
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const float f = static_cast<float>(m(i, j));
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            detail::write_le<std::uint32_t>(out, bits);
        }
    if (!out)
        throw DataError("write failed: " + path);
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open embeddings: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kEmbeddingMagic, 4) != 0)
        throw DataError(path + ": bad magic (not a GCSE file)");
    std::uint32_t version;
    if (!detail::read_le(in, version))
        throw DataError(path + ": truncated header");
    if (version != kEmbeddingVersion)
        throw DataError(path + ": unsupported version " + std::to_string(version));
    std::uint64_t rows;
    std::uint32_t dim;
    if (!detail::read_le(in, rows) || !detail::read_le(in, dim))
        throw DataError(path + ": truncated header");
    if (rows == 0 || dim == 0)
        throw DataError(path + ": empty matrix");

    EmbeddingMatrix m(static_cast<std::size_t>(rows), dim);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::uint32_t bits;
            if (!detail::read_le(in, bits))
                throw DataError(path + ": truncated payload at row " + std::to_string(i));
            float f;
            std::memcpy(&f, &bits, 4);
            if (!std::isfinite(f))
                throw NumericError(path + ": non-finite value at row " + std::to_string(i));
            m(i, j) = static_cast<double>(f);
        }
    // trailing bytes are a format violation
    char extra;
    if (in.read(&extra, 1))
        throw DataError(path + ": trailing bytes after payload");
    return m;
}

} // namespace gcs
