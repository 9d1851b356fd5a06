#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ruler/config.hpp"
#include "ruler/errors.hpp"
#include "ruler/pipeline.hpp"
#include "ruler/report.hpp"
#include "ruler/rng.hpp"
#include "ruler/toml_lite.hpp"

using namespace ruler;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_path(const std::string& name) {
    return fs::temp_directory_path() /
           ("ruler-test-pipe-" + std::to_string(::getpid()) + "-" + name);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small but real end-to-end configuration: one synthetic dataset, one forget
// fraction, one seed, a gradient method plus the oracle control.
cfg::RunConfig tiny_run_config() {
    cfg::RunConfig rc;
    cfg::DatasetConfig dc;
    dc.name = "tiny";
    dc.synth.name = "tiny";
    dc.synth.n = 240;
    dc.synth.d = 6;
    dc.synth.class_sep = 1.5;
    dc.synth.memorization_strength = 1.0;
    dc.synth.seed = 0;
    rc.datasets = {dc};
    rc.ffs = {0.08};
    rc.train_seeds = {0};
    rc.methods = {train::Method::finetune, train::Method::oracle_control};
    rc.train.epochs = 15;
    rc.unlearn.epochs = 3;
    rc.unlearn.epochs_ga = 2;
    return rc;
}

pipe::MetricRecord crafted_record(const std::string& ds, std::uint64_t seed,
                                  const std::string& method, double m2, double m4,
                                  double mia) {
    pipe::MetricRecord r;
    r.dataset = ds;
    r.ff = 0.05;
    r.train_seed = seed;
    r.unlearn_seed = 100;
    r.method = method;
    r.m1 = 0.9;
    r.retain_baseline = r.m1 - m2;
    r.m2 = m2;
    r.m3 = -0.01;
    r.baseline_kind = "median";
    r.retain_subsample_size = 100;
    r.m4 = m4;
    r.m4_pre = 0.5;
    r.forget_acc = 0.8;
    r.retain_acc = 0.9;
    r.test_acc = 0.85;
    r.mia = mia;
    r.mia_threshold = 0.3;
    r.mia_members = 12;
    r.mia_nonmembers = 48;
    r.mia_pass = true;
    r.oracle_retain_acc = 0.91;
    r.oracle_test_acc = 0.86;
    r.oracle_mia = 0.51;
    r.n_retain = 150;
    r.n_forget = 12;
    r.n_test = 40;
    return r;
}

// Two datasets x four seeds x two methods plus oracle rows; FineTune holds
// the sign pattern, GA sits above the rank null but below on the gap.
std::vector<pipe::MetricRecord> crafted_records() {
    std::vector<pipe::MetricRecord> rs;
    for (const std::string ds : {"A", "B"}) {
        double shift = ds == "A" ? 0.0 : 0.002;
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            double jitter = 0.001 * static_cast<double>(seed);
            rs.push_back(crafted_record(ds, seed, "FineTune", -0.010 + jitter + shift,
                                        0.60 - jitter, 0.52));
            rs.push_back(crafted_record(ds, seed, "GA", -0.030 + jitter + shift,
                                        0.45 + jitter, 0.54));
            rs.push_back(crafted_record(ds, seed, "Oracle", 0.0 + jitter, 0.50, 0.50));
        }
    }
    return rs;
}

}  // namespace

TEST_CASE("toml subset parses tables, arrays and scalars") {
    const std::string text =
        "# comment\n"
        "threads = 4\n"
        "out_dir = \"runs/out\"\n"
        "ffs = [0.01, 0.05]\n"
        "export_rank_csv = true\n"
        "\n"
        "[train]\n"
        "lr = 1e-3\n"
        "epochs = 50\n"
        "\n"
        "[[datasets]]\n"
        "name = \"a\"\n"
        "synthetic = true\n"
        "synth.n = 300\n"
        "\n"
        "[[datasets]]\n"
        "name = \"b\"\n"
        "synthetic = true\n"
        "synth.n = [\n  1,\n  2,\n]\n";
    auto j = cfg::parse_toml_lite(text);
    CHECK(j["threads"] == 4);
    CHECK(j["out_dir"] == "runs/out");
    CHECK(j["ffs"][1] == 0.05);
    CHECK(j["export_rank_csv"] == true);
    CHECK(j["train"]["lr"] == 1e-3);
    CHECK(j["datasets"].size() == 2);
    CHECK(j["datasets"][0]["synth"]["n"] == 300);
    CHECK(j["datasets"][1]["synth"]["n"][1] == 2);

    CHECK_THROWS_AS(cfg::parse_toml_lite("key = = 1\n"), ConfigError);
    CHECK_THROWS_AS(cfg::parse_toml_lite("just words\n"), ConfigError);
}

TEST_CASE("config parsing fills defaults and rejects unknown keys") {
    json tree = json::parse(R"({
        "datasets": [{"name": "a", "n": 200}]
    })");
    auto parsed = cfg::parse_config(tree);
    CHECK(parsed.run.datasets.size() == 1);
    CHECK(parsed.run.datasets[0].synth.n == 200);
    CHECK(parsed.run.ffs == std::vector<double>({0.01, 0.05, 0.10}));
    CHECK(parsed.run.train_seeds.size() == 10);
    CHECK(parsed.run.methods.size() == 5);
    CHECK(parsed.run.baseline == lens1::BaselineKind::median);
    CHECK(parsed.run.m2_subsample_seed == 42);
    CHECK(parsed.run.m4_cap == 2000);
    CHECK(parsed.calibrate.n_oracles == 10);
    CHECK(parsed.sweep.axis == cfg::SweepAxis::lr_u);

    json bad = tree;
    bad["no_such_option"] = 1;
    CHECK_THROWS_AS(cfg::parse_config(bad), ConfigError);
    try {
        cfg::parse_config(bad);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("no_such_option") != std::string::npos);
    }

    json dup = json::parse(R"({
        "datasets": [{"name": "x", "n": 100},
                      {"name": "x", "n": 100}]
    })");
    CHECK_THROWS_AS(cfg::parse_config(dup), ConfigError);

    json empty = json::parse(R"({"datasets": []})");
    CHECK_THROWS_AS(cfg::parse_config(empty), ConfigError);
}

TEST_CASE("config files load by extension") {
    auto p = temp_path("conf.toml");
    {
        std::ofstream out(p);
        out << "[[datasets]]\nname = \"t\"\nn = 150\nd = 4\n";
        out << "\n[unlearn]\nlr = 2e-4\n";
    }
    auto parsed = cfg::load_config(p.string());
    fs::remove(p);
    CHECK(parsed.run.datasets.at(0).name == "t");
    CHECK(parsed.run.datasets.at(0).synth.n == 150);
    CHECK(parsed.run.datasets.at(0).synth.d == 4);
    CHECK(parsed.run.unlearn.lr == 2e-4);
}

TEST_CASE("metric records survive the JSON round trip") {
    auto r = crafted_record("ds", 3, "FineTune", -0.02, 0.61, 0.53);
    auto back = pipe::MetricRecord::from_json(r.to_json());
    CHECK(back.to_json() == r.to_json());
    CHECK(back.dataset == r.dataset);
    CHECK(back.m2 == r.m2);
    REQUIRE(back.m3.has_value());
    CHECK(*back.m3 == *r.m3);

    pipe::MetricRecord failed;
    failed.dataset = "ds";
    failed.ff = 0.05;
    failed.train_seed = 1;
    failed.method = "GA";
    failed.status = "failed";
    failed.error = "synthetic failure, with \"quotes\"";
    auto fb = pipe::MetricRecord::from_json(failed.to_json());
    CHECK(fb.status == "failed");
    CHECK(fb.error == failed.error);
    CHECK_FALSE(fb.ok());
    CHECK_FALSE(fb.to_json().contains("m1"));

    CHECK_THROWS_AS(pipe::MetricRecord::from_json(json::parse("{\"ff\": \"oops\"}")),
                    ConfigError);
}

TEST_CASE("jsonl artifacts round-trip and reject broken lines") {
    auto rs = crafted_records();
    auto p = temp_path("metrics.jsonl");
    report::write_metrics_jsonl(p, rs);
    auto back = report::read_metrics_jsonl(p);
    REQUIRE(back.size() == rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i)
        CHECK(back[i].to_json() == rs[i].to_json());

    {
        std::ofstream out(p, std::ios::app);
        out << "{broken\n";
    }
    try {
        report::read_metrics_jsonl(p);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(":" + std::to_string(rs.size() + 1) + ":") !=
              std::string::npos);
    }
    fs::remove(p);
}

TEST_CASE("end-to-end run: oracle control hits the fixed point") {
    auto rc = tiny_run_config();
    auto res = pipe::run_pipeline(rc);
    REQUIRE(res.records.size() == 2);
    CHECK(res.n_ok == 2);
    CHECK(res.n_failed == 0);

    // Slot order follows the configured method order.
    CHECK(res.records[0].method == "FineTune");
    CHECK(res.records[1].method == "Oracle");

    const auto& ft = res.records[0];
    CHECK(ft.ok());
    CHECK(ft.dataset == "tiny");
    CHECK(ft.ff == 0.08);
    CHECK(ft.baseline_kind == "median");
    CHECK(ft.m1 > 0.0);
    CHECK(ft.m1 <= 1.0 + 1e-9);
    CHECK(ft.m2 == doctest::Approx(ft.m1 - ft.retain_baseline).epsilon(1e-12));
    REQUIRE(ft.m3.has_value());
    CHECK(ft.m4 >= 0.0);
    CHECK(ft.m4 <= 1.0);
    CHECK(ft.m4_pre >= 0.0);
    CHECK(ft.m4_pre <= 1.0);
    CHECK(ft.mia >= 0.5);
    CHECK(ft.mia <= 1.0);
    CHECK(ft.mia_members == ft.n_forget);
    CHECK(ft.mia_nonmembers == ft.n_test);
    CHECK(ft.retain_acc > 0.5);
    CHECK(ft.oracle_retain_acc > 0.5);
    CHECK(ft.n_retain + ft.n_forget + ft.n_test == 240);

    // Substituting the oracle for the unlearned model collapses the gap.
    const auto& oc = res.records[1];
    CHECK(oc.m1 > 0.9999);
    CHECK(std::abs(oc.m2) < 1e-6);
    REQUIRE(oc.m3.has_value());
    CHECK(*oc.m3 >= 0.0);
}

TEST_CASE("worker count cannot change the artifacts") {
    auto rc = tiny_run_config();
    rc.threads = 1;
    auto serial = pipe::run_pipeline(rc);
    rc.threads = 3;
    auto threaded = pipe::run_pipeline(rc);
    REQUIRE(serial.records.size() == threaded.records.size());

    auto p1 = temp_path("serial.jsonl");
    auto p2 = temp_path("threaded.jsonl");
    report::write_metrics_jsonl(p1, serial.records);
    report::write_metrics_jsonl(p2, threaded.records);
    CHECK(slurp(p1) == slurp(p2));

    auto r1 = temp_path("serial-report.json");
    auto r2 = temp_path("threaded-report.json");
    report::write_stat_report(r1, report::build_report(serial.records, rc));
    report::write_stat_report(r2, report::build_report(threaded.records, rc));
    CHECK(slurp(r1) == slurp(r2));
    for (auto& p : {p1, p2, r1, r2}) fs::remove(p);
}

TEST_CASE("a broken dataset fails its cells without sinking the run") {
    auto rc = tiny_run_config();
    cfg::DatasetConfig bad;
    bad.name = "missing";
    bad.synthetic = false;
    bad.csv_path = "/nonexistent/normalized.csv";
    rc.datasets.push_back(bad);
    auto res = pipe::run_pipeline(rc);
    REQUIRE(res.records.size() == 4);
    CHECK(res.n_ok == 2);
    CHECK(res.n_failed == 2);
    for (const auto& r : res.records) {
        if (r.dataset == "missing") {
            CHECK_FALSE(r.ok());
            CHECK_FALSE(r.error.empty());
        } else {
            CHECK(r.ok());
        }
    }
}

TEST_CASE("model cache writes reusable artifacts") {
    auto rc = tiny_run_config();
    auto cache = temp_path("cache");
    fs::create_directories(cache);
    rc.cache_dir = cache.string();
    auto first = pipe::run_pipeline(rc);
    std::size_t n_cached = 0;
    for (const auto& e : fs::directory_iterator(cache))
        if (e.path().extension() == ".rulm") ++n_cached;
    CHECK(n_cached == 2);  // starting model + retrained counterpart

    auto second = pipe::run_pipeline(rc);
    REQUIRE(second.records.size() == first.records.size());
    for (std::size_t i = 0; i < first.records.size(); ++i)
        CHECK(second.records[i].to_json() == first.records[i].to_json());
    fs::remove_all(cache);
}

TEST_CASE("external verification computes what its inputs allow") {
    // Embeddings straight from a tiny pipeline-style training run.
    data::SyntheticSpec spec;
    spec.name = "verify";
    spec.n = 200;
    spec.d = 5;
    spec.seed = 3;
    auto made = data::make_synthetic(spec);
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < made.ds.n; ++i) all.push_back(i);
    auto st = data::Standardizer::fit(made.ds, all);
    auto X = st.transform(made.ds);
    train::FeatureView view{X.data(), made.ds.n, made.ds.d};
    auto part = data::make_partition(made.ds, 0.2, 0.1, 5, 6);
    train::TrainConfig tc;
    tc.epochs = 10;
    auto model_a = train::fit(view, made.ds.labels, part.train(), tc, 0, made.ds.name);
    auto model_b = train::fit(view, made.ds.labels, part.retain, tc, 0, made.ds.name);

    pipe::VerifyInputs in;
    in.unlearned = train::extract_embeddings(model_a, view);  // unnormalised on purpose
    in.part = part;
    auto only_rank = pipe::verify_external(in);
    CHECK_FALSE(only_rank.lens1.has_value());
    CHECK(only_rank.lens2.per_record_rank.size() == part.forget.size());

    in.oracle = train::extract_embeddings(model_b, view);
    CHECK_THROWS_AS(pipe::verify_external(in), UnpairedSeeds);

    in.paired_seed = true;
    auto with_oracle = pipe::verify_external(in);
    REQUIRE(with_oracle.lens1.has_value());
    CHECK_FALSE(with_oracle.lens1->m3.has_value());
    CHECK(with_oracle.lens1->m1 > 0.0);
    // The rank metric ignores the oracle input entirely.
    CHECK(with_oracle.lens2.aggregate == only_rank.lens2.aggregate);

    in.original = train::extract_embeddings(model_a, view);
    auto full = pipe::verify_external(in);
    REQUIRE(full.lens1.has_value());
    REQUIRE(full.lens1->m3.has_value());
    // original == unlearned, so the shift term is exactly m1 - m1 = 0.
    CHECK(*full.lens1->m3 == doctest::Approx(0.0).epsilon(1e-12));

    auto j = full.to_json();
    CHECK(j.contains("m1"));
    CHECK(j.contains("m4"));
}

TEST_CASE("report aggregation separates conditions, outputs and contrasts") {
    auto rs = crafted_records();
    cfg::RunConfig rc;
    cfg::DatasetConfig dc;
    dc.name = "A";
    rc.datasets = {dc};
    auto rep = report::build_report(rs, rc);

    CHECK(rep.n_records == rs.size());
    CHECK(rep.n_ok == rs.size());
    CHECK(rep.n_failed == 0);

    // Two methods x one ff x two metrics; the control never enters.
    REQUIRE(rep.conditions.size() == 4);
    for (const auto& c : rep.conditions) {
        CHECK(c.method != "Oracle");
        CHECK(c.n_obs == 8);
        CHECK(c.n_datasets == 2);
        CHECK((c.metric == "m2" || c.metric == "m4"));
        CHECK(c.null_value == (c.metric == "m2" ? 0.0 : 0.5));
        CHECK((c.primary_source == "lmm" || c.primary_source == "wilcoxon_fallback"));
        if (c.metric == "m2") {
            CHECK(c.mean < 0.0);
            CHECK(c.direction == "below_null");
        }
        if (c.method == "FineTune" && c.metric == "m4") {
            CHECK(c.mean > 0.5);
            CHECK(c.direction == "above_null");
        }
    }

    // Outputs include the control.
    bool saw_oracle = false;
    for (const auto& o : rep.outputs) {
        if (o.method == "Oracle") saw_oracle = true;
        CHECK(o.n == 8);
        CHECK(o.mia_window_pass);
        CHECK(o.mean_retain_gap == doctest::Approx(0.9 - 0.91).epsilon(1e-12));
    }
    CHECK(saw_oracle);

    // One pairwise family: FineTune vs GA over four metrics, FDR-adjusted.
    REQUIRE(rep.pairwise.size() == 4);
    for (const auto& pw : rep.pairwise) {
        CHECK(pw.n_pairs == 8);
        CHECK(pw.p_adjusted >= pw.p_raw - 1e-15);
        CHECK(pw.method_a != pw.method_b);
        CHECK(pw.method_a != "Oracle");
        CHECK(pw.method_b != "Oracle");
    }

    // The m2 contrast is deterministic: FineTune sits above GA by 0.02.
    bool saw_m2 = false;
    for (const auto& pw : rep.pairwise) {
        if (pw.metric != "m2") continue;
        saw_m2 = true;
        double diff = pw.method_a == "FineTune" ? pw.median_diff : -pw.median_diff;
        CHECK(diff == doctest::Approx(0.02).epsilon(1e-9));
    }
    CHECK(saw_m2);
}

TEST_CASE("csv writers emit one row per entity") {
    auto rs = crafted_records();
    cfg::RunConfig rc;
    cfg::DatasetConfig dc;
    dc.name = "A";
    rc.datasets = {dc};
    auto rep = report::build_report(rs, rc);

    auto pm = temp_path("metrics.csv");
    auto pc = temp_path("conditions.csv");
    auto pp = temp_path("pairwise.csv");
    report::write_metrics_csv(pm, rs);
    report::write_conditions_csv(pc, rep);
    report::write_pairwise_csv(pp, rep);

    auto count_lines = [](const fs::path& p) {
        std::ifstream in(p);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line))
            if (!line.empty()) ++n;
        return n;
    };
    CHECK(count_lines(pm) == rs.size() + 1);
    CHECK(count_lines(pc) == rep.conditions.size() + 1);
    CHECK(count_lines(pp) == rep.pairwise.size() + 1);
    for (auto& p : {pm, pc, pp}) fs::remove(p);
}

TEST_CASE("sweep summaries count conditions where the sign pattern holds") {
    auto rs = crafted_records();
    auto s = report::summarize_sweep_point("point-1", rs);
    CHECK(s.label == "point-1");
    // FineTune and GA each form one condition at ff = 0.05; the control
    // carries no unlearning claim and stays out of the count.
    CHECK(s.n_conditions == 2);
    // FineTune: negative gap, rank above 0.5 -> holds. GA: rank below.
    REQUIRE(s.holds == 1);
    CHECK(s.holding == std::vector<std::string>({"FineTune@0.05"}));
}
