#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ruler::data {

// Binary-label tabular dataset, features row-major float64.
struct TabularDataset {
    std::string name;
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> features;
    std::vector<int> labels;  // 0 or 1

    const double* row(std::size_t r) const { return features.data() + r * d; }

    // Shape, finiteness, label domain, both classes present.
    void validate() const;

    // Stable content hash over name, shape, features and labels.
    std::uint64_t fingerprint() const;
};

// How a multi-valued label column collapses to {0, 1}.
struct BinarizeRule {
    enum class Kind {
        auto_two_class,    // {0,1} kept; any other two distinct values map min->0, max->1
        majority_vs_rest,  // most frequent value -> 1, everything else -> 0
        positive_class,    // value == positive -> 1, everything else -> 0
    };
    Kind kind = Kind::auto_two_class;
    long long positive = 0;
};

// Strict CSV reader: header row, comma separators, every cell a finite
// number, labels integral. Throws ParseError with row/column coordinates,
// NonBinaryLabel when the rule cannot produce two classes, DatasetTooSmall
// under 50 records.
TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const BinarizeRule& rule = {});

// Record partition for one (dataset, forget fraction) cell. Indices sorted.
struct PartitionSpec {
    std::vector<std::size_t> retain;
    std::vector<std::size_t> forget;
    std::vector<std::size_t> test;
    double ff = 0.0;
    std::uint64_t split_seed = 0;
    std::uint64_t forget_seed = 0;

    std::vector<std::size_t> train() const;  // retain ∪ forget, sorted

    // Checks the partition algebra against a dataset of n records:
    // disjoint cover of 0..n-1, non-empty retain/forget/test, ff in (0,1).
    void validate(std::size_t n) const;
};

void write_partition(const std::filesystem::path& path, const PartitionSpec& p);
PartitionSpec read_partition(const std::filesystem::path& path);

// Class-stratified train/test split. Per-class test count is test_frac
// rounded to nearest, clamped so both sides keep at least one record.
// Throws DegenerateClass when a class has fewer than 2 records.
struct SplitResult {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
SplitResult stratified_split(const TabularDataset& ds, double test_frac, std::uint64_t seed);

// Uniform forget sample of size max(10, floor(ff * |train|)) from the train
// indices. Identical output for identical (dataset name, ff, seed).
std::vector<std::size_t> sample_forget_set(const std::vector<std::size_t>& train_idx,
                                           double ff, std::uint64_t seed,
                                           const std::string& dataset_name);

// Split + forget sample composed into a full partition.
PartitionSpec make_partition(const TabularDataset& ds, double test_frac, double ff,
                             std::uint64_t split_seed, std::uint64_t forget_seed);

// Per-feature affine map fitted on one index set (population std, floored at
// 1e-12; constant features map to 0).
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_std;  // 0 for constant features

    static Standardizer fit(const TabularDataset& ds, const std::vector<std::size_t>& idx);
    // Returns the full feature matrix transformed, row-major.
    std::vector<double> transform(const TabularDataset& ds) const;
};

struct SyntheticSpec {
    std::string name = "synthetic";
    std::size_t n = 1000;
    std::size_t d = 16;
    double class_sep = 1.5;
    double memorization_strength = 1.0;
    std::uint64_t seed = 0;
};

// Two Gaussian class blobs separated by class_sep along a random direction,
// plus (when memorization_strength > 0) small clusters of near-duplicate
// records whose labels contradict their position. Those clusters are the
// planted memorization probes; their indices are returned.
struct SyntheticDataset {
    TabularDataset ds;
    std::vector<std::size_t> planted;
};
SyntheticDataset make_synthetic(const SyntheticSpec& spec);

}  // namespace ruler::data
