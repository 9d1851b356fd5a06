#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ruler/dataset.hpp"
#include "ruler/embedding.hpp"

// Within-model neighbourhood metric: for each forget record, where does its
// strongest retain-set similarity fall inside the distribution of strongest
// leave-one-out similarities among retain records themselves? Percentile
// ranks near 0.5 mean forget records look like ordinary retain records.
namespace ruler::lens2 {

struct Lens2Result {
    std::vector<double> per_record_rank;  // aligned with the forget index order
    double aggregate = 0.0;               // mean of per_record_rank
    std::vector<double> s_forget;         // max retain similarity per forget record
    std::vector<double> s_retain;         // leave-one-out max per pool record
    std::vector<std::size_t> pool;        // retain pool actually used (sorted)
    bool retain_cap_applied = false;
    std::size_t cap = 0;
    std::uint64_t cap_seed = 0;
};

// Percentile-rank metric over one model's normalised embeddings. Retain pools
// larger than cap are subsampled once (deterministic in cap_seed); the same
// pool serves both the per-forget maxima and the leave-one-out population.
// Ranks use a non-strict comparison, so a forget record tying the top retain
// similarity still counts that retain record under it.
Lens2Result m4(const embed::EmbeddingMatrix& m, const data::PartitionSpec& part,
               std::size_t cap = 2000, std::uint64_t cap_seed = 0);

// One row per forget record: record_index, s_f, rank.
void write_rank_csv(const std::filesystem::path& path, const Lens2Result& res,
                    const std::vector<std::size_t>& forget);

}  // namespace ruler::lens2
