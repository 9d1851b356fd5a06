#include "ruler/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "ruler/errors.hpp"
#include "ruler/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace ruler::embed {

void EmbeddingMatrix::validate() const {
    if (data.size() != n_records * dim)
        throw DimMismatch("embedding buffer size does not match n_records * dim");
    for (float v : data)
        if (!std::isfinite(v)) throw NonFiniteInput("non-finite embedding entry");
    if (normalized) {
        for (std::size_t r = 0; r < n_records; ++r) {
            double norm = std::sqrt(kern::dot_f32(row_ptr(r), row_ptr(r), dim));
            if (std::fabs(norm - 1.0) > 1e-5)
                throw NotNormalized("row " + std::to_string(r) +
                                    " marked normalised but has norm " + std::to_string(norm));
        }
    }
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
    EmbeddingMatrix out;
    out.n_records = m.n_records;
    out.dim = m.dim;
    out.role = m.role;
    out.data.resize(m.data.size());
    for (std::size_t r = 0; r < m.n_records; ++r) {
        const float* src = m.row_ptr(r);
        double norm = std::sqrt(kern::dot_f32(src, src, m.dim));
        if (norm < 1e-12) throw ZeroNormRow(r);
        kern::scale_f32(src, out.data.data() + r * m.dim, m.dim, 1.0 / norm);
    }
    out.normalized = true;
    return out;
}

namespace {

void check_pair(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t r) {
    if (!a.normalized || !b.normalized)
        throw NotNormalized("cosine requires normalised embeddings");
    if (a.dim != b.dim) throw DimMismatch("embedding dimensions differ");
    if (r >= a.n_records || r >= b.n_records)
        throw IndexOutOfRange("record index " + std::to_string(r) + " out of range");
}

}  // namespace

double cosine_cross(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t r) {
    check_pair(a, b, r);
    return kern::dot_f32(a.row_ptr(r), b.row_ptr(r), a.dim);
}

double cosine_within(const EmbeddingMatrix& m, std::size_t r1, std::size_t r2) {
    if (!m.normalized) throw NotNormalized("cosine requires normalised embeddings");
    if (r1 >= m.n_records || r2 >= m.n_records)
        throw IndexOutOfRange("record index out of range");
    return kern::dot_f32(m.row_ptr(r1), m.row_ptr(r2), m.dim);
}

void ModelTriple::validate() const {
    const EmbeddingMatrix* ref = unlearned ? unlearned : (oracle ? oracle : original);
    if (!ref) throw MissingModel("triple holds no embedding matrices");
    for (const EmbeddingMatrix* m : {original, unlearned, oracle}) {
        if (!m) continue;
        if (m->dim != ref->dim) throw DimMismatch("triple members disagree on dim");
        if (m->n_records != ref->n_records)
            throw DimMismatch("triple members disagree on n_records");
    }
}

namespace {

constexpr char kMagic[4] = {'R', 'U', 'L', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void write_rulr(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    if (m.data.size() != m.n_records * m.dim)
        throw DimMismatch("embedding buffer size does not match n_records * dim");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileFormatError("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    write_le<std::uint32_t>(out, kVersion);
    write_le<std::uint64_t>(out, m.n_records);
    write_le<std::uint64_t>(out, m.dim);
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    write_le<std::uint8_t>(out, m.normalized ? 1 : 0);
    if (!out) throw FileFormatError("short write to " + path.string());
}

EmbeddingMatrix read_rulr(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileFormatError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FileFormatError(path.string() + ": bad magic");
    auto version = read_le<std::uint32_t>(in);
    if (version != kVersion)
        throw FileFormatError(path.string() + ": unsupported version " + std::to_string(version));
    EmbeddingMatrix m;
    m.n_records = read_le<std::uint64_t>(in);
    m.dim = read_le<std::uint64_t>(in);
    if (m.dim == 0 || m.n_records > std::numeric_limits<std::size_t>::max() / sizeof(float) / m.dim)
        throw FileFormatError(path.string() + ": implausible dimensions");
    m.data.resize(m.n_records * m.dim);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    auto flag = read_le<std::uint8_t>(in);
    if (!in) throw FileFormatError(path.string() + ": truncated payload");
    if (flag > 1) throw FileFormatError(path.string() + ": bad normalized flag");
    m.normalized = flag == 1;
    m.validate();
    return m;
}

}  // namespace ruler::embed
