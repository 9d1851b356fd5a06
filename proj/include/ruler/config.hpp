#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ruler/dataset.hpp"
#include "ruler/lens1.hpp"
#include "ruler/mlp.hpp"
#include "ruler/toml_lite.hpp"
#include "ruler/unlearn.hpp"

namespace ruler::cfg {

// One dataset entry: either generated in-process or loaded from CSV.
struct DatasetConfig {
    std::string name;
    bool synthetic = true;
    data::SyntheticSpec synth;      // used when synthetic
    std::string csv_path;           // used when !synthetic
    std::string label_column;       // empty means last column
    data::BinarizeRule binarize;
};

enum class Pooling { dataset_means, pooled };

struct RunConfig {
    std::vector<DatasetConfig> datasets;
    std::vector<double> ffs = {0.01, 0.05, 0.10};
    std::vector<std::uint64_t> train_seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::vector<train::Method> methods = {
        train::Method::ga, train::Method::neggrad_plus, train::Method::finetune,
        train::Method::scrub, train::Method::bad_teacher};
    double test_frac = 0.2;
    std::uint64_t split_seed = 999;
    std::uint64_t forget_seed = 999;
    train::TrainConfig train;
    train::UnlearnConfig unlearn;
    lens1::BaselineKind baseline = lens1::BaselineKind::median;
    std::uint64_t m2_subsample_seed = 42;
    std::size_t m4_cap = 2000;
    std::uint64_t m4_cap_seed = 7;
    Pooling pooling = Pooling::dataset_means;
    double significance_level = 0.05;
    int threads = 1;
    std::uint64_t seed_offset = 0;
    std::string out_dir = "ruler_out";
    bool export_rank_csv = false;
    std::string cache_dir;  // empty: RULER_CACHE_DIR if set, else no disk cache
};

struct CalibrateConfig {
    std::size_t n_oracles = 10;
    std::size_t dataset_index = 0;  // which RunConfig dataset to calibrate on
};

enum class SweepAxis { lr_u, forget_seed, baseline_kind };

struct SweepConfig {
    SweepAxis axis = SweepAxis::lr_u;
    std::vector<double> lr_values = {1e-4, 5e-4, 1e-3};
    std::vector<std::uint64_t> forget_seeds = {1, 2, 3, 4, 5};
};

const char* pooling_name(Pooling p);
const char* baseline_name(lens1::BaselineKind k);
const char* sweep_axis_name(SweepAxis a);
SweepAxis sweep_axis_from_name(const std::string& name);

// Builds a RunConfig from a parsed config tree (JSON or the TOML subset).
// Unknown keys and malformed values raise ConfigError; defaults fill
// anything not present. `calibrate` and `sweep` sections are optional.
struct ParsedConfig {
    RunConfig run;
    CalibrateConfig calibrate;
    SweepConfig sweep;
};

ParsedConfig parse_config(const nlohmann::json& tree);
ParsedConfig load_config(const std::string& path);

}  // namespace ruler::cfg
