#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ruler/config.hpp"
#include "ruler/dataset.hpp"
#include "ruler/embedding.hpp"
#include "ruler/lens1.hpp"
#include "ruler/lens2.hpp"
#include "ruler/output_metrics.hpp"
#include "ruler/toml_lite.hpp"

namespace ruler::pipe {

// One fully evaluated (dataset, forget fraction, train seed, method) cell.
// Failed cells keep their identity plus an error string; metric fields are
// only meaningful when status == "ok".
struct MetricRecord {
    std::string dataset;
    double ff = 0.0;
    std::uint64_t train_seed = 0;
    std::uint64_t unlearn_seed = 0;
    std::string method;
    std::string status = "ok";
    std::string error;

    double m1 = 0.0;
    double retain_baseline = 0.0;
    double m2 = 0.0;
    std::optional<double> m3;
    std::string baseline_kind;
    std::size_t retain_subsample_size = 0;

    double m4 = 0.0;
    bool m4_cap_applied = false;
    double m4_pre = 0.0;  // percentile-rank metric on the model before unlearning

    double forget_acc = 0.0;
    double retain_acc = 0.0;
    double test_acc = 0.0;
    double mia = 0.5;
    double mia_threshold = 0.0;
    std::size_t mia_members = 0;
    std::size_t mia_nonmembers = 0;
    bool mia_pass = true;

    double oracle_retain_acc = 0.0;
    double oracle_test_acc = 0.0;
    double oracle_mia = 0.5;

    std::size_t n_retain = 0;
    std::size_t n_forget = 0;
    std::size_t n_test = 0;

    bool ok() const { return status == "ok"; }
    nlohmann::ordered_json to_json() const;
    static MetricRecord from_json(const nlohmann::json& j);
};

struct RunResult {
    std::vector<MetricRecord> records;  // deterministic cell-key order
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
};

// Runs every (dataset x ff x train_seed x method) cell: split, standardise,
// train the starting model and its paired-seed retain-only counterpart
// (cached), unlearn, extract and normalise embeddings, compute all metrics.
// Cell failures are recorded, not fatal. Identical config gives identical
// records regardless of rc.threads. `log`, when set, receives progress lines.
RunResult run_pipeline(const cfg::RunConfig& rc, std::ostream* log = nullptr);

// Metric computation over externally supplied embedding matrices. The
// similarity lenses run on whatever inputs permit: the neighbourhood rank
// needs only the unlearned matrix; the cross-model metrics need the oracle,
// and the shift term additionally the original. Absent inputs leave absent
// outputs. Unnormalised matrices are normalised on entry.
struct VerifyInputs {
    embed::EmbeddingMatrix unlearned;
    std::optional<embed::EmbeddingMatrix> oracle;
    std::optional<embed::EmbeddingMatrix> original;
    data::PartitionSpec part;
    bool paired_seed = false;
    lens1::BaselineKind baseline = lens1::BaselineKind::median;
    std::uint64_t m2_subsample_seed = 42;
    std::size_t m4_cap = 2000;
    std::uint64_t m4_cap_seed = 7;
};

struct VerifyResult {
    std::optional<lens1::Lens1Result> lens1;
    lens2::Lens2Result lens2;
    nlohmann::ordered_json to_json() const;
};

VerifyResult verify_external(const VerifyInputs& in);

// Trains k independently seeded retain-only models on one dataset and
// evaluates the cross-model gap metric on every unordered pair. A calibrated
// metric leaves the pair distribution centred on zero.
struct CalibrationReport {
    std::string dataset;
    std::size_t n_oracles = 0;
    struct Pair {
        std::uint64_t seed_a = 0;
        std::uint64_t seed_b = 0;
        double m1 = 0.0;
        double m2 = 0.0;
    };
    std::vector<Pair> pairs;
    double mean_m2 = 0.0;
    double sd_m2 = 0.0;
    double se_m2 = 0.0;
    bool centered = false;  // |mean| < 2 se
    std::string baseline_kind;
    nlohmann::ordered_json to_json() const;
};

CalibrationReport calibrate_oracle_pairs(const cfg::RunConfig& rc, const cfg::CalibrateConfig& cc,
                                         std::ostream* log = nullptr);

}  // namespace ruler::pipe
