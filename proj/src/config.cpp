#include "ruler/config.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "ruler/errors.hpp"

namespace ruler::cfg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

// Rejects keys that no reader consumed so config typos surface immediately.
void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) fail(where, "expected a table/object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) fail(where, "unknown key '" + it.key() + "'");
    }
}

double get_number(const json& obj, const std::string& where, const std::string& key, double dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(where + "." + key, "expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail(where + "." + key, "must be finite");
    return x;
}

std::uint64_t get_u64(const json& obj, const std::string& where, const std::string& key,
                      std::uint64_t dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        long long x = v.get<long long>();
        if (x < 0) fail(where + "." + key, "must be non-negative");
        return static_cast<std::uint64_t>(x);
    }
    fail(where + "." + key, "expected an integer");
}

std::size_t get_size(const json& obj, const std::string& where, const std::string& key,
                     std::size_t dflt) {
    return static_cast<std::size_t>(get_u64(obj, where, key, dflt));
}

bool get_bool(const json& obj, const std::string& where, const std::string& key, bool dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(where + "." + key, "expected a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const std::string& key,
                       const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(where + "." + key, "expected a string");
    return v.get<std::string>();
}

template <typename T, typename F>
std::vector<T> get_array(const json& obj, const std::string& where, const std::string& key,
                         std::vector<T> dflt, F elem) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_array()) fail(where + "." + key, "expected an array");
    std::vector<T> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(elem(v[i], where + "." + key + "[" + std::to_string(i) + "]"));
    }
    return out;
}

double number_elem(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail(where, "must be finite");
    return x;
}

std::uint64_t u64_elem(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        long long x = v.get<long long>();
        if (x < 0) fail(where, "must be non-negative");
        return static_cast<std::uint64_t>(x);
    }
    fail(where, "expected an integer");
}

data::BinarizeRule parse_binarize(const json& obj, const std::string& where) {
    data::BinarizeRule rule;
    check_keys(obj, where, {"kind", "positive"});
    std::string kind = get_string(obj, where, "kind", "auto");
    if (kind == "auto") {
        rule.kind = data::BinarizeRule::Kind::auto_two_class;
    } else if (kind == "majority_vs_rest") {
        rule.kind = data::BinarizeRule::Kind::majority_vs_rest;
    } else if (kind == "positive_class") {
        rule.kind = data::BinarizeRule::Kind::positive_class;
        if (!obj.contains("positive")) fail(where, "positive_class needs a 'positive' value");
    } else {
        fail(where + ".kind", "expected auto | majority_vs_rest | positive_class");
    }
    if (obj.contains("positive")) {
        const json& v = obj.at("positive");
        if (!v.is_number_integer() && !v.is_number_unsigned())
            fail(where + ".positive", "expected an integer label value");
        rule.positive = v.get<long long>();
    }
    return rule;
}

DatasetConfig parse_dataset(const json& obj, const std::string& where, std::size_t index) {
    DatasetConfig dc;
    check_keys(obj, where,
               {"name", "kind", "n", "d", "class_sep", "memorization_strength", "seed", "path",
                "label_column", "binarize"});
    std::string kind = get_string(obj, where, "kind", "synthetic");
    dc.name = get_string(obj, where, "name", "");
    if (dc.name.empty()) fail(where, "dataset needs a non-empty 'name'");
    if (kind == "synthetic") {
        dc.synthetic = true;
        dc.synth.name = dc.name;
        dc.synth.n = get_size(obj, where, "n", dc.synth.n);
        dc.synth.d = get_size(obj, where, "d", dc.synth.d);
        dc.synth.class_sep = get_number(obj, where, "class_sep", dc.synth.class_sep);
        dc.synth.memorization_strength =
            get_number(obj, where, "memorization_strength", dc.synth.memorization_strength);
        dc.synth.seed = get_u64(obj, where, "seed", static_cast<std::uint64_t>(index));
        if (dc.synth.n < 50) fail(where + ".n", "synthetic dataset needs n >= 50");
        if (dc.synth.d == 0) fail(where + ".d", "needs d >= 1");
        if (dc.synth.class_sep < 0) fail(where + ".class_sep", "must be >= 0");
        if (dc.synth.memorization_strength < 0)
            fail(where + ".memorization_strength", "must be >= 0");
    } else if (kind == "csv") {
        dc.synthetic = false;
        dc.csv_path = get_string(obj, where, "path", "");
        if (dc.csv_path.empty()) fail(where, "csv dataset needs a 'path'");
        dc.label_column = get_string(obj, where, "label_column", "");
        if (obj.contains("binarize")) dc.binarize = parse_binarize(obj.at("binarize"), where + ".binarize");
        for (const char* k : {"n", "d", "class_sep", "memorization_strength", "seed"}) {
            if (obj.contains(k)) fail(where, std::string("key '") + k + "' only applies to synthetic datasets");
        }
    } else {
        fail(where + ".kind", "expected synthetic | csv");
    }
    return dc;
}

train::TrainConfig parse_train(const json& obj, const std::string& where) {
    train::TrainConfig tc;
    check_keys(obj, where, {"lr", "epochs", "dropout"});
    tc.lr = get_number(obj, where, "lr", tc.lr);
    tc.epochs = get_size(obj, where, "epochs", tc.epochs);
    tc.dropout = get_number(obj, where, "dropout", tc.dropout);
    if (tc.lr <= 0) fail(where + ".lr", "must be > 0");
    if (tc.epochs == 0) fail(where + ".epochs", "must be >= 1");
    if (tc.dropout < 0 || tc.dropout >= 1) fail(where + ".dropout", "must be in [0,1)");
    return tc;
}

train::UnlearnConfig parse_unlearn(const json& obj, const std::string& where,
                                   std::uint64_t run_unlearn_seed) {
    train::UnlearnConfig uc;
    uc.unlearn_seed = run_unlearn_seed;
    check_keys(obj, where,
               {"lr", "alpha", "temperature", "epochs", "epochs_ga", "teacher_seed"});
    uc.lr = get_number(obj, where, "lr", uc.lr);
    uc.alpha = get_number(obj, where, "alpha", uc.alpha);
    uc.temperature = get_number(obj, where, "temperature", uc.temperature);
    uc.epochs = get_size(obj, where, "epochs", uc.epochs);
    uc.epochs_ga = get_size(obj, where, "epochs_ga", uc.epochs_ga);
    uc.teacher_seed = get_u64(obj, where, "teacher_seed", uc.teacher_seed);
    if (uc.lr <= 0) fail(where + ".lr", "must be > 0");
    if (uc.alpha < 0 || uc.alpha > 1) fail(where + ".alpha", "must be in [0,1]");
    if (uc.temperature <= 0) fail(where + ".temperature", "must be > 0");
    if (uc.epochs == 0 || uc.epochs_ga == 0) fail(where + ".epochs", "must be >= 1");
    return uc;
}

}  // namespace

const char* pooling_name(Pooling p) {
    return p == Pooling::dataset_means ? "dataset_means" : "pooled";
}

const char* baseline_name(lens1::BaselineKind k) {
    return k == lens1::BaselineKind::median ? "median" : "mean";
}

const char* sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::lr_u: return "lr_u";
        case SweepAxis::forget_seed: return "forget_seed";
        case SweepAxis::baseline_kind: return "baseline_kind";
    }
    return "?";
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "lr_u") return SweepAxis::lr_u;
    if (name == "forget_seed") return SweepAxis::forget_seed;
    if (name == "baseline_kind") return SweepAxis::baseline_kind;
    throw ConfigError("unknown sweep axis '" + name + "' (expected lr_u | forget_seed | baseline_kind)");
}

ParsedConfig parse_config(const nlohmann::json& tree) {
    ParsedConfig pc;
    RunConfig& rc = pc.run;
    const std::string top = "config";
    check_keys(tree, top,
               {"datasets", "ffs", "train_seeds", "unlearn_seed", "methods", "test_frac",
                "split_seed", "forget_seed", "train", "unlearn", "baseline", "m2_subsample_seed",
                "m4_cap", "m4_cap_seed", "pooling", "significance_level", "threads", "seed_offset",
                "out_dir", "export_rank_csv", "cache_dir", "calibrate", "sweep"});

    if (!tree.contains("datasets")) fail(top, "needs a 'datasets' array");
    const json& dss = tree.at("datasets");
    if (!dss.is_array() || dss.empty()) fail(top + ".datasets", "expected a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < dss.size(); ++i) {
        DatasetConfig dc = parse_dataset(dss[i], top + ".datasets[" + std::to_string(i) + "]", i);
        if (!names.insert(dc.name).second)
            fail(top + ".datasets", "duplicate dataset name '" + dc.name + "'");
        rc.datasets.push_back(std::move(dc));
    }

    rc.ffs = get_array<double>(tree, top, "ffs", rc.ffs, number_elem);
    if (rc.ffs.empty()) fail(top + ".ffs", "must not be empty");
    for (double f : rc.ffs) {
        if (!(f > 0.0 && f < 1.0)) fail(top + ".ffs", "every fraction must be in (0,1)");
    }

    rc.train_seeds = get_array<std::uint64_t>(tree, top, "train_seeds", rc.train_seeds, u64_elem);
    if (rc.train_seeds.empty()) fail(top + ".train_seeds", "must not be empty");
    std::set<std::uint64_t> seed_set(rc.train_seeds.begin(), rc.train_seeds.end());
    if (seed_set.size() != rc.train_seeds.size()) fail(top + ".train_seeds", "seeds must be distinct");

    if (tree.contains("methods")) {
        rc.methods = get_array<train::Method>(
            tree, top, "methods", rc.methods, [](const json& v, const std::string& where) {
                if (!v.is_string()) fail(where, "expected a method name string");
                try {
                    return train::method_from_name(v.get<std::string>());
                } catch (const RulerError& e) {
                    fail(where, e.what());
                }
            });
        if (rc.methods.empty()) fail(top + ".methods", "must not be empty");
        std::set<train::Method> mset(rc.methods.begin(), rc.methods.end());
        if (mset.size() != rc.methods.size()) fail(top + ".methods", "methods must be distinct");
    }

    rc.test_frac = get_number(tree, top, "test_frac", rc.test_frac);
    if (!(rc.test_frac > 0.0 && rc.test_frac < 1.0)) fail(top + ".test_frac", "must be in (0,1)");
    rc.split_seed = get_u64(tree, top, "split_seed", rc.split_seed);
    rc.forget_seed = get_u64(tree, top, "forget_seed", rc.forget_seed);

    if (tree.contains("train")) rc.train = parse_train(tree.at("train"), top + ".train");
    std::uint64_t unlearn_seed = get_u64(tree, top, "unlearn_seed", rc.unlearn.unlearn_seed);
    if (tree.contains("unlearn")) {
        rc.unlearn = parse_unlearn(tree.at("unlearn"), top + ".unlearn", unlearn_seed);
    } else {
        rc.unlearn.unlearn_seed = unlearn_seed;
    }

    std::string base = get_string(tree, top, "baseline", "median");
    if (base == "median") {
        rc.baseline = lens1::BaselineKind::median;
    } else if (base == "mean") {
        rc.baseline = lens1::BaselineKind::mean;
    } else {
        fail(top + ".baseline", "expected median | mean");
    }

    rc.m2_subsample_seed = get_u64(tree, top, "m2_subsample_seed", rc.m2_subsample_seed);
    rc.m4_cap = get_size(tree, top, "m4_cap", rc.m4_cap);
    if (rc.m4_cap < 2) fail(top + ".m4_cap", "must be >= 2");
    rc.m4_cap_seed = get_u64(tree, top, "m4_cap_seed", rc.m4_cap_seed);

    std::string pool = get_string(tree, top, "pooling", "dataset_means");
    if (pool == "dataset_means") {
        rc.pooling = Pooling::dataset_means;
    } else if (pool == "pooled") {
        rc.pooling = Pooling::pooled;
    } else {
        fail(top + ".pooling", "expected dataset_means | pooled");
    }

    rc.significance_level = get_number(tree, top, "significance_level", rc.significance_level);
    if (!(rc.significance_level > 0.0 && rc.significance_level < 1.0))
        fail(top + ".significance_level", "must be in (0,1)");

    double threads = get_number(tree, top, "threads", 1.0);
    if (threads < 1 || threads != std::floor(threads) || threads > 1024)
        fail(top + ".threads", "expected an integer in [1,1024]");
    rc.threads = static_cast<int>(threads);
    rc.seed_offset = get_u64(tree, top, "seed_offset", rc.seed_offset);
    rc.out_dir = get_string(tree, top, "out_dir", rc.out_dir);
    rc.export_rank_csv = get_bool(tree, top, "export_rank_csv", rc.export_rank_csv);
    rc.cache_dir = get_string(tree, top, "cache_dir", rc.cache_dir);

    if (tree.contains("calibrate")) {
        const json& c = tree.at("calibrate");
        const std::string cw = top + ".calibrate";
        check_keys(c, cw, {"n_oracles", "dataset"});
        pc.calibrate.n_oracles = get_size(c, cw, "n_oracles", pc.calibrate.n_oracles);
        if (pc.calibrate.n_oracles < 2) fail(cw + ".n_oracles", "must be >= 2");
        std::string dname = get_string(c, cw, "dataset", rc.datasets.front().name);
        bool found = false;
        for (std::size_t i = 0; i < rc.datasets.size(); ++i) {
            if (rc.datasets[i].name == dname) {
                pc.calibrate.dataset_index = i;
                found = true;
                break;
            }
        }
        if (!found) fail(cw + ".dataset", "no dataset named '" + dname + "'");
    }

    if (tree.contains("sweep")) {
        const json& s = tree.at("sweep");
        const std::string sw = top + ".sweep";
        check_keys(s, sw, {"axis", "lr_values", "forget_seeds"});
        pc.sweep.axis = sweep_axis_from_name(get_string(s, sw, "axis", "lr_u"));
        pc.sweep.lr_values = get_array<double>(s, sw, "lr_values", pc.sweep.lr_values, number_elem);
        for (double lr : pc.sweep.lr_values) {
            if (lr <= 0) fail(sw + ".lr_values", "learning rates must be > 0");
        }
        pc.sweep.forget_seeds =
            get_array<std::uint64_t>(s, sw, "forget_seeds", pc.sweep.forget_seeds, u64_elem);
        if (pc.sweep.lr_values.empty()) fail(sw + ".lr_values", "must not be empty");
        if (pc.sweep.forget_seeds.empty()) fail(sw + ".forget_seeds", "must not be empty");
    }

    return pc;
}

ParsedConfig load_config(const std::string& path) {
    return parse_config(load_config_file(path));
}

}  // namespace ruler::cfg
