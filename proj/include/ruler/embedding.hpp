#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ruler::embed {

enum class ModelRole : std::uint8_t { original, unlearned, oracle, external };

// Row-major float32 penultimate-layer activations, one row per record.
// Row r refers to the same record in every matrix of a triple.
struct EmbeddingMatrix {
    std::size_t n_records = 0;
    std::size_t dim = 0;
    std::vector<float> data;
    bool normalized = false;
    ModelRole role = ModelRole::external;

    std::span<const float> row(std::size_t r) const {
        return {data.data() + r * dim, dim};
    }
    float* row_ptr(std::size_t r) { return data.data() + r * dim; }
    const float* row_ptr(std::size_t r) const { return data.data() + r * dim; }

    // Shape/finiteness check; throws on violation.
    void validate() const;
};

// Unit-normalise every row (float64 norm, float64 reciprocal multiply,
// rounded back to float32). Throws ZeroNormRow if a row's norm is under 1e-12.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

// Cosine similarity of record r across two normalised matrices.
// Throws NotNormalized / DimMismatch / IndexOutOfRange.
double cosine_cross(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t r);

// Cosine similarity of two records within one normalised matrix.
double cosine_within(const EmbeddingMatrix& m, std::size_t r1, std::size_t r2);

// The three models a verification run compares. Non-owning; paired_seed
// records the caller's assertion that original and oracle share an init seed.
struct ModelTriple {
    const EmbeddingMatrix* original = nullptr;
    const EmbeddingMatrix* unlearned = nullptr;
    const EmbeddingMatrix* oracle = nullptr;
    bool paired_seed = false;

    // Shape-consistency check across the members that are present.
    void validate() const;
};

// Embedding file format: "RULR" magic, u32 version, u64 n_records, u64 dim,
// float32 row-major payload, u8 normalized flag. All little-endian.
// Round-trips bit-exactly.
void write_rulr(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_rulr(const std::filesystem::path& path);

}  // namespace ruler::embed
