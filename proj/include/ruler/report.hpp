#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ruler/config.hpp"
#include "ruler/pipeline.hpp"
#include "ruler/stats.hpp"
#include "ruler/toml_lite.hpp"

namespace ruler::report {

// Significance summary for one (method, forget fraction, metric) condition.
// Observations are per-(dataset, seed) values centred on the metric's null;
// the mixed model treats datasets as random intercepts, the signed-rank test
// runs both on dataset means and on the pooled observations.
struct ConditionStats {
    std::string method;
    double ff = 0.0;
    std::string metric;      // "m2" | "m4"
    double null_value = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_datasets = 0;
    double mean = 0.0;       // raw (uncentred) pooled mean
    double sd = 0.0;
    stats::LmmFit lmm;
    stats::WilcoxonResult wilcoxon_ds;      // dataset means vs null
    double r_rb_ds = 0.0;
    stats::WilcoxonResult wilcoxon_pooled;  // all observations vs null
    double r_rb_pooled = 0.0;
    double primary_p = 1.0;
    std::string primary_source;  // "lmm" | "wilcoxon_fallback"
    bool significant = false;
    std::string direction;       // "below_null" | "above_null" | "none"
};

// Paired method-vs-method contrast inside one forget fraction; p-values are
// FDR-adjusted within the fraction's whole family (all pairs x all metrics).
struct PairwiseComparison {
    double ff = 0.0;
    std::string metric;  // "m2" | "m4" | "mia" | "retain_acc"
    std::string method_a;
    std::string method_b;
    std::size_t n_pairs = 0;
    double median_diff = 0.0;  // median of a-b over shared cells
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    double r_rb = 0.0;
    bool significant = false;
};

// Output-space aggregate for one (method, forget fraction).
struct OutputAggregate {
    std::string method;
    double ff = 0.0;
    std::size_t n = 0;
    double mean_forget_acc = 0.0;
    double mean_retain_acc = 0.0;
    double mean_test_acc = 0.0;
    double mean_mia = 0.0;
    bool mia_window_pass = false;            // |mean_mia - 0.5| < 0.05
    double mean_oracle_retain_acc = 0.0;
    double mean_oracle_test_acc = 0.0;
    double mean_oracle_mia = 0.0;
    double mean_retain_gap = 0.0;            // mean(retain_acc - oracle_retain_acc)
};

struct StatReport {
    std::size_t n_records = 0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    double significance_level = 0.05;
    std::string pooling;  // which signed-rank variant backs the fallback
    std::vector<ConditionStats> conditions;
    std::vector<OutputAggregate> outputs;
    std::vector<PairwiseComparison> pairwise;

    nlohmann::ordered_json to_json() const;
};

// Aggregates completed records into the significance report. Records are
// consumed in their stored order; the result is a pure function of the
// record list and the config, so any worker count yields identical bytes.
StatReport build_report(const std::vector<pipe::MetricRecord>& records, const cfg::RunConfig& rc);

// Sweep summary for one configuration point: a condition "holds" when its
// pooled mean gap is negative and its mean rank sits above 0.5.
struct SweepPointSummary {
    std::string label;
    std::size_t n_conditions = 0;
    std::size_t holds = 0;
    std::vector<std::string> holding;  // "method@ff" labels
};
SweepPointSummary summarize_sweep_point(const std::string& label,
                                        const std::vector<pipe::MetricRecord>& records);

// Artifact writers. Floating-point CSV cells use max-precision round-trip
// formatting; JSON uses the shortest exact representation.
void write_metrics_jsonl(const std::filesystem::path& path,
                         const std::vector<pipe::MetricRecord>& records);
std::vector<pipe::MetricRecord> read_metrics_jsonl(const std::filesystem::path& path);
void write_stat_report(const std::filesystem::path& path, const StatReport& rep);
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<pipe::MetricRecord>& records);
void write_conditions_csv(const std::filesystem::path& path, const StatReport& rep);
void write_pairwise_csv(const std::filesystem::path& path, const StatReport& rep);

}  // namespace ruler::report
