#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ruler/dataset.hpp"
#include "ruler/embedding.hpp"

// Cross-model similarity metrics: how closely the unlearned model's
// representations track a retrained-from-scratch oracle on the forget set,
// anchored by where retain records sit.
namespace ruler::lens1 {

enum class BaselineKind { median, mean };

struct Lens1Result {
    double m1 = 0.0;              // mean forget-set cosine, unlearned vs oracle
    double retain_baseline = 0.0; // median (or mean) retain-subsample cosine
    double m2 = 0.0;              // m1 - retain_baseline
    std::optional<double> m3;     // mean forget-set shift vs the original model
    BaselineKind baseline_kind = BaselineKind::median;
    std::size_t retain_subsample_size = 0;
    std::uint64_t retain_subsample_seed = 0;
};

// Deterministic retain subsample of size min(500, |retain|); the same draw
// is shared by both baseline kinds for a fixed seed.
std::vector<std::size_t> retain_subsample(const std::vector<std::size_t>& retain,
                                          std::uint64_t seed);

// Mean cosine between unlearned and oracle over the forget set. Requires a
// paired-seed triple; throws UnpairedSeeds otherwise.
double m1(const embed::ModelTriple& triple, const data::PartitionSpec& part);

// m1 minus the retain-subsample baseline; null value 0.
double m2(const embed::ModelTriple& triple, const data::PartitionSpec& part,
          BaselineKind kind, std::uint64_t subsample_seed);

// Mean over the forget set of sim(unlearned, oracle) - sim(original, oracle).
// Positive means unlearning moved representations toward the oracle.
double m3(const embed::ModelTriple& triple, const data::PartitionSpec& part);

// All of the above in one shot; m3 only when the original model is present.
Lens1Result compute(const embed::ModelTriple& triple, const data::PartitionSpec& part,
                    BaselineKind kind, std::uint64_t subsample_seed);

}  // namespace ruler::lens1
