// Command-line front end: run the full experiment pipeline, verify external
// embedding files, calibrate the cross-model gap on retrained model pairs,
// sweep one configuration axis, or re-aggregate a metrics file.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ruler/config.hpp"
#include "ruler/embedding.hpp"
#include "ruler/errors.hpp"
#include "ruler/pipeline.hpp"
#include "ruler/report.hpp"

namespace fs = std::filesystem;
using namespace ruler;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCellsFailed = 2;
constexpr int kExitConfigError = 3;

struct CommonOverrides {
    std::string config_path;
    std::string out_dir;
    int threads = -1;
    std::int64_t seed_offset = -1;
};

void add_common(CLI::App* cmd, CommonOverrides& ov) {
    cmd->add_option("--config", ov.config_path, "TOML or JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", ov.out_dir, "output directory (overrides config)");
    cmd->add_option("--threads", ov.threads, "worker threads (overrides config)")
        ->check(CLI::Range(1, 1024));
    cmd->add_option("--seed-offset", ov.seed_offset, "shift applied to all training seeds")
        ->check(CLI::NonNegativeNumber);
}

cfg::ParsedConfig load_with_overrides(const CommonOverrides& ov) {
    cfg::ParsedConfig pc = cfg::load_config(ov.config_path);
    if (!ov.out_dir.empty()) pc.run.out_dir = ov.out_dir;
    if (ov.threads > 0) pc.run.threads = ov.threads;
    if (ov.seed_offset >= 0) pc.run.seed_offset = static_cast<std::uint64_t>(ov.seed_offset);
    return pc;
}

void write_run_artifacts(const fs::path& dir, const std::vector<pipe::MetricRecord>& records,
                         const report::StatReport& rep) {
    report::write_metrics_jsonl(dir / "metrics.jsonl", records);
    report::write_metrics_csv(dir / "metrics.csv", records);
    report::write_stat_report(dir / "stat_report.json", rep);
    report::write_conditions_csv(dir / "conditions.csv", rep);
    report::write_pairwise_csv(dir / "pairwise.csv", rep);
}

int cmd_run(const CommonOverrides& ov) {
    cfg::ParsedConfig pc = load_with_overrides(ov);
    pipe::RunResult res = pipe::run_pipeline(pc.run, &std::cerr);
    report::StatReport rep = report::build_report(res.records, pc.run);
    write_run_artifacts(pc.run.out_dir, res.records, rep);
    std::cout << "cells: " << res.records.size() << " ok: " << res.n_ok
              << " failed: " << res.n_failed << "\n"
              << "wrote " << (fs::path(pc.run.out_dir) / "metrics.jsonl").string() << "\n";
    return res.n_failed == 0 ? kExitOk : kExitCellsFailed;
}

int cmd_report(const CommonOverrides& ov, const std::string& metrics_path) {
    cfg::ParsedConfig pc = load_with_overrides(ov);
    fs::path mpath = metrics_path.empty() ? fs::path(pc.run.out_dir) / "metrics.jsonl"
                                          : fs::path(metrics_path);
    auto records = report::read_metrics_jsonl(mpath);
    report::StatReport rep = report::build_report(records, pc.run);
    report::write_stat_report(fs::path(pc.run.out_dir) / "stat_report.json", rep);
    report::write_conditions_csv(fs::path(pc.run.out_dir) / "conditions.csv", rep);
    report::write_pairwise_csv(fs::path(pc.run.out_dir) / "pairwise.csv", rep);
    std::cout << "aggregated " << records.size() << " records from " << mpath.string() << "\n";
    return rep.n_failed == 0 ? kExitOk : kExitCellsFailed;
}

int cmd_calibrate(const CommonOverrides& ov, std::size_t n_oracles, const std::string& dataset,
                  const std::string& out_file) {
    cfg::ParsedConfig pc = load_with_overrides(ov);
    if (n_oracles > 0) pc.calibrate.n_oracles = n_oracles;
    if (!dataset.empty()) {
        bool found = false;
        for (std::size_t i = 0; i < pc.run.datasets.size(); ++i) {
            if (pc.run.datasets[i].name == dataset) {
                pc.calibrate.dataset_index = i;
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("no dataset named '" + dataset + "'");
    }
    auto rep = pipe::calibrate_oracle_pairs(pc.run, pc.calibrate, &std::cerr);
    fs::path out = out_file.empty() ? fs::path(pc.run.out_dir) / "calibration.json"
                                    : fs::path(out_file);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out, std::ios::binary);
    if (!f) throw RulerError("cannot open for writing: " + out.string());
    f << rep.to_json().dump(2) << '\n';
    std::cout << "pairs: " << rep.pairs.size() << " mean_m2: " << rep.mean_m2
              << " se: " << rep.se_m2 << " centered: " << (rep.centered ? "yes" : "no") << "\n";
    return kExitOk;
}

std::size_t scale_epochs(std::size_t base, double base_lr, double lr) {
    auto scaled = std::llround(static_cast<double>(base) * base_lr / lr);
    return static_cast<std::size_t>(std::max<long long>(1, scaled));
}

int cmd_sweep(const CommonOverrides& ov, const std::string& axis_flag) {
    cfg::ParsedConfig pc = load_with_overrides(ov);
    if (!axis_flag.empty()) pc.sweep.axis = cfg::sweep_axis_from_name(axis_flag);
    const fs::path root = pc.run.out_dir;

    struct Point {
        std::string label;
        cfg::RunConfig rc;
    };
    std::vector<Point> points;
    switch (pc.sweep.axis) {
        case cfg::SweepAxis::lr_u:
            for (double lr : pc.sweep.lr_values) {
                Point p{std::string("lr") + std::to_string(lr), pc.run};
                char label[48];
                std::snprintf(label, sizeof label, "lr%g", lr);
                p.label = label;
                p.rc.unlearn.epochs = scale_epochs(pc.run.unlearn.epochs, pc.run.unlearn.lr, lr);
                p.rc.unlearn.epochs_ga =
                    scale_epochs(pc.run.unlearn.epochs_ga, pc.run.unlearn.lr, lr);
                p.rc.unlearn.lr = lr;
                points.push_back(std::move(p));
            }
            break;
        case cfg::SweepAxis::forget_seed:
            for (std::uint64_t s : pc.sweep.forget_seeds) {
                Point p{"fseed" + std::to_string(s), pc.run};
                p.rc.forget_seed = s;
                points.push_back(std::move(p));
            }
            break;
        case cfg::SweepAxis::baseline_kind:
            for (auto kind : {lens1::BaselineKind::median, lens1::BaselineKind::mean}) {
                Point p{cfg::baseline_name(kind), pc.run};
                p.rc.baseline = kind;
                points.push_back(std::move(p));
            }
            break;
    }

    nlohmann::ordered_json summary;
    summary["axis"] = cfg::sweep_axis_name(pc.sweep.axis);
    nlohmann::ordered_json point_rows = nlohmann::ordered_json::array();
    std::vector<pipe::RunResult> results;
    std::size_t failed_total = 0;
    for (auto& p : points) {
        p.rc.out_dir = (root / ("point-" + p.label)).string();
        std::cerr << "sweep point " << p.label << "\n";
        pipe::RunResult res = pipe::run_pipeline(p.rc, &std::cerr);
        report::StatReport rep = report::build_report(res.records, p.rc);
        write_run_artifacts(p.rc.out_dir, res.records, rep);
        report::SweepPointSummary sp = report::summarize_sweep_point(p.label, res.records);
        nlohmann::ordered_json row;
        row["label"] = p.label;
        row["n_conditions"] = sp.n_conditions;
        row["holds"] = sp.holds;
        row["holding"] = sp.holding;
        row["n_ok"] = res.n_ok;
        row["n_failed"] = res.n_failed;
        point_rows.push_back(std::move(row));
        failed_total += res.n_failed;
        results.push_back(std::move(res));
    }
    summary["points"] = std::move(point_rows);

    // Axis-specific digests: across-point dispersion for forget-seed sweeps,
    // sign agreement of the gap metric for baseline sweeps.
    if (pc.sweep.axis == cfg::SweepAxis::forget_seed && !results.empty()) {
        struct Key {
            std::string method;
            double ff;
        };
        std::vector<Key> keys;
        for (const auto& r : results.front().records) {
            bool seen = false;
            for (const auto& k : keys)
                if (k.method == r.method && k.ff == r.ff) seen = true;
            if (!seen && r.method != "Oracle") keys.push_back({r.method, r.ff});
        }
        nlohmann::ordered_json sd_rows = nlohmann::ordered_json::array();
        for (const auto& k : keys) {
            std::vector<double> m2_means, m4_means;
            for (const auto& res : results) {
                double s2 = 0.0, s4 = 0.0;
                std::size_t n = 0;
                for (const auto& r : res.records) {
                    if (!r.ok() || r.method != k.method || r.ff != k.ff) continue;
                    s2 += r.m2;
                    s4 += r.m4;
                    ++n;
                }
                if (n > 0) {
                    m2_means.push_back(s2 / static_cast<double>(n));
                    m4_means.push_back(s4 / static_cast<double>(n));
                }
            }
            nlohmann::ordered_json row;
            row["method"] = k.method;
            row["ff"] = k.ff;
            row["n_points"] = m2_means.size();
            row["sd_m2"] = m2_means.size() > 1 ? stats::sample_sd(m2_means) : 0.0;
            row["sd_m4"] = m4_means.size() > 1 ? stats::sample_sd(m4_means) : 0.0;
            sd_rows.push_back(std::move(row));
        }
        summary["across_seed_sd"] = std::move(sd_rows);
    }
    if (pc.sweep.axis == cfg::SweepAxis::baseline_kind && results.size() == 2) {
        const auto& med = results[0].records;
        const auto& mea = results[1].records;
        std::size_t flips = 0;
        nlohmann::ordered_json flip_rows = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < med.size() && i < mea.size(); ++i) {
            if (!med[i].ok() || !mea[i].ok()) continue;
            if (med[i].method == "Oracle") continue;
            if ((med[i].m2 < 0.0) != (mea[i].m2 < 0.0)) {
                ++flips;
                nlohmann::ordered_json row;
                row["dataset"] = med[i].dataset;
                row["ff"] = med[i].ff;
                row["train_seed"] = med[i].train_seed;
                row["method"] = med[i].method;
                row["m2_median_baseline"] = med[i].m2;
                row["m2_mean_baseline"] = mea[i].m2;
                flip_rows.push_back(std::move(row));
            }
        }
        summary["sign_flips"] = flips;
        summary["flipped_cells"] = std::move(flip_rows);
    }

    fs::create_directories(root);
    std::ofstream f(root / "sweep_summary.json", std::ios::binary);
    if (!f) throw RulerError("cannot open for writing: " + (root / "sweep_summary.json").string());
    f << summary.dump(2) << '\n';
    std::cout << "sweep points: " << points.size() << " failed cells: " << failed_total << "\n";
    return failed_total == 0 ? kExitOk : kExitCellsFailed;
}

struct VerifyFlags {
    std::string unlearned, oracle, original, partition;
    bool paired_seed = false;
    std::string baseline = "median";
    std::uint64_t m2_seed = 42;
    std::size_t m4_cap = 2000;
    std::uint64_t m4_cap_seed = 7;
    std::string ranks_csv;
    std::string out;
};

int cmd_verify(const VerifyFlags& vf) {
    pipe::VerifyInputs in;
    in.unlearned = embed::read_rulr(vf.unlearned);
    if (!vf.oracle.empty()) in.oracle = embed::read_rulr(vf.oracle);
    if (!vf.original.empty()) in.original = embed::read_rulr(vf.original);
    in.part = data::read_partition(vf.partition);
    in.paired_seed = vf.paired_seed;
    if (vf.baseline == "median") {
        in.baseline = lens1::BaselineKind::median;
    } else if (vf.baseline == "mean") {
        in.baseline = lens1::BaselineKind::mean;
    } else {
        throw ConfigError("--baseline expects median | mean");
    }
    in.m2_subsample_seed = vf.m2_seed;
    in.m4_cap = vf.m4_cap;
    in.m4_cap_seed = vf.m4_cap_seed;

    pipe::VerifyResult res = pipe::verify_external(in);
    if (!vf.ranks_csv.empty()) lens2::write_rank_csv(vf.ranks_csv, res.lens2, in.part.forget);
    std::string text = res.to_json().dump(2);
    if (vf.out.empty()) {
        std::cout << text << "\n";
    } else {
        fs::path out = vf.out;
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        std::ofstream f(out, std::ios::binary);
        if (!f) throw RulerError("cannot open for writing: " + out.string());
        f << text << '\n';
        std::cout << "wrote " << out.string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"representation-level unlearning verification toolkit"};
    app.require_subcommand(1);

    CommonOverrides run_ov, report_ov, cal_ov, sweep_ov;
    std::string report_metrics;
    std::size_t cal_oracles = 0;
    std::string cal_dataset, cal_out, sweep_axis;
    VerifyFlags vf;

    CLI::App* c_run = app.add_subcommand("run", "run the configured experiment grid");
    add_common(c_run, run_ov);

    CLI::App* c_verify = app.add_subcommand("verify", "score externally produced embeddings");
    c_verify->add_option("--unlearned", vf.unlearned, "embedding file for the unlearned model")
        ->required()
        ->check(CLI::ExistingFile);
    c_verify->add_option("--oracle", vf.oracle, "embedding file for the retrained reference")
        ->check(CLI::ExistingFile);
    c_verify->add_option("--original", vf.original, "embedding file for the starting model")
        ->check(CLI::ExistingFile);
    c_verify->add_option("--partition", vf.partition, "partition JSON")
        ->required()
        ->check(CLI::ExistingFile);
    c_verify->add_flag("--paired-seed", vf.paired_seed,
                       "assert the unlearned/oracle models share an init seed");
    c_verify->add_option("--baseline", vf.baseline, "median | mean");
    c_verify->add_option("--m2-seed", vf.m2_seed, "retain-subsample seed");
    c_verify->add_option("--m4-cap", vf.m4_cap, "retain pool cap")->check(CLI::Range(2, 1 << 30));
    c_verify->add_option("--m4-cap-seed", vf.m4_cap_seed, "retain pool subsample seed");
    c_verify->add_option("--ranks-csv", vf.ranks_csv, "write per-record ranks here");
    c_verify->add_option("--out", vf.out, "write the result JSON here (default: stdout)");

    CLI::App* c_cal = app.add_subcommand("calibrate", "cross-model gap on retrained pairs");
    add_common(c_cal, cal_ov);
    c_cal->add_option("--oracles", cal_oracles, "number of models (overrides config)")
        ->check(CLI::Range(2, 1000));
    c_cal->add_option("--dataset", cal_dataset, "dataset name (overrides config)");
    c_cal->add_option("--out-file", cal_out, "calibration JSON path");

    CLI::App* c_sweep = app.add_subcommand("sweep", "rerun the grid along one axis");
    add_common(c_sweep, sweep_ov);
    c_sweep->add_option("--axis", sweep_axis, "lr_u | forget_seed | baseline_kind");

    CLI::App* c_report = app.add_subcommand("report", "re-aggregate a metrics file");
    add_common(c_report, report_ov);
    c_report->add_option("--metrics", report_metrics, "metrics JSONL path")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_run->parsed()) return cmd_run(run_ov);
        if (c_verify->parsed()) return cmd_verify(vf);
        if (c_cal->parsed()) return cmd_calibrate(cal_ov, cal_oracles, cal_dataset, cal_out);
        if (c_sweep->parsed()) return cmd_sweep(sweep_ov, sweep_axis);
        if (c_report->parsed()) return cmd_report(report_ov, report_metrics);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const RulerError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}
