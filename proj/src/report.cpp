#include "ruler/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ruler/errors.hpp"

namespace ruler::report {

using nlohmann::json;
using nlohmann::ordered_json;
using pipe::MetricRecord;

namespace {

constexpr const char* kOracleControl = "Oracle";  // the control pseudo-method's display name

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// First-appearance orderings reconstructed from the records themselves, so
// re-aggregation of a metrics file does not depend on the config's lists.
struct Ordering {
    std::vector<std::string> methods;        // without the control pseudo-method
    std::vector<std::string> methods_all;
    std::vector<double> ffs;
    std::vector<std::string> datasets;
};

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

Ordering scan_order(const std::vector<MetricRecord>& records) {
    Ordering o;
    for (const auto& r : records) {
        push_unique(o.methods_all, r.method);
        if (r.method != kOracleControl) push_unique(o.methods, r.method);
        push_unique(o.ffs, r.ff);
        push_unique(o.datasets, r.dataset);
    }
    return o;
}

struct MetricGetter {
    const char* name;
    double null_value;
    double (*get)(const MetricRecord&);
};

constexpr MetricGetter kConditionMetrics[] = {
    {"m2", 0.0, [](const MetricRecord& r) { return r.m2; }},
    {"m4", 0.5, [](const MetricRecord& r) { return r.m4; }},
};

constexpr MetricGetter kPairwiseMetrics[] = {
    {"m2", 0.0, [](const MetricRecord& r) { return r.m2; }},
    {"m4", 0.5, [](const MetricRecord& r) { return r.m4; }},
    {"mia", 0.5, [](const MetricRecord& r) { return r.mia; }},
    {"retain_acc", 0.0, [](const MetricRecord& r) { return r.retain_acc; }},
};

stats::WilcoxonResult safe_wilcoxon(std::span<const double> diffs) {
    try {
        return stats::wilcoxon_signed_rank(diffs);
    } catch (const RulerError&) {
        // No informative differences: report a null result instead of failing
        // the whole aggregation.
        stats::WilcoxonResult w;
        w.p_value = 1.0;
        return w;
    }
}

double safe_rank_biserial(const stats::WilcoxonResult& w) {
    return w.n_effective == 0 ? 0.0 : stats::rank_biserial(w);
}

ordered_json wilcoxon_json(const stats::WilcoxonResult& w, double r_rb) {
    ordered_json j;
    j["w_plus"] = w.w_plus;
    j["w_minus"] = w.w_minus;
    j["statistic"] = w.statistic;
    j["n_effective"] = w.n_effective;
    j["p_value"] = w.p_value;
    j["exact"] = w.exact;
    j["r_rb"] = r_rb;
    return j;
}

ordered_json lmm_json(const stats::LmmFit& f) {
    ordered_json j;
    j["intercept"] = f.intercept;
    j["se_intercept"] = f.se_intercept;
    j["wald_z"] = f.wald_z;
    j["p_value"] = f.p_value;
    j["sigma_u2"] = f.sigma_u2;
    j["sigma_e2"] = f.sigma_e2;
    j["icc"] = f.icc;
    j["singular"] = f.singular;
    j["n_obs"] = f.n_obs;
    j["n_groups"] = f.n_groups;
    return j;
}

void open_out(std::ofstream& out, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    out.open(path, std::ios::binary);
    if (!out) throw RulerError("cannot open for writing: " + path.string());
}

}  // namespace

StatReport build_report(const std::vector<MetricRecord>& records, const cfg::RunConfig& rc) {
    StatReport rep;
    rep.n_records = records.size();
    for (const auto& r : records) {
        if (r.ok()) {
            ++rep.n_ok;
        } else {
            ++rep.n_failed;
        }
    }
    rep.significance_level = rc.significance_level;
    rep.pooling = cfg::pooling_name(rc.pooling);

    const Ordering order = scan_order(records);

    // Per-condition significance (control rows carry no hypothesis test).
    for (const std::string& method : order.methods) {
        for (double ff : order.ffs) {
            for (const MetricGetter& mg : kConditionMetrics) {
                std::vector<double> centered;
                std::vector<double> raw;
                std::vector<int> group;
                std::vector<double> ds_means;
                std::size_t n_datasets = 0;
                for (std::size_t d = 0; d < order.datasets.size(); ++d) {
                    double sum = 0.0;
                    std::size_t count = 0;
                    for (const auto& r : records) {
                        if (!r.ok() || r.method != method || r.ff != ff ||
                            r.dataset != order.datasets[d])
                            continue;
                        double v = mg.get(r);
                        raw.push_back(v);
                        centered.push_back(v - mg.null_value);
                        group.push_back(static_cast<int>(d));
                        sum += v - mg.null_value;
                        ++count;
                    }
                    if (count > 0) {
                        ds_means.push_back(sum / static_cast<double>(count));
                        ++n_datasets;
                    }
                }
                if (raw.empty()) continue;

                ConditionStats cs;
                cs.method = method;
                cs.ff = ff;
                cs.metric = mg.name;
                cs.null_value = mg.null_value;
                cs.n_obs = raw.size();
                cs.n_datasets = n_datasets;
                cs.mean = stats::mean(raw);
                cs.sd = raw.size() > 1 ? stats::sample_sd(raw) : 0.0;

                bool lmm_ok = false;
                if (n_datasets >= 2) {
                    try {
                        cs.lmm = stats::lmm_reml(centered, group);
                        lmm_ok = true;
                    } catch (const RulerError&) {
                        lmm_ok = false;
                    }
                }
                cs.wilcoxon_ds = safe_wilcoxon(ds_means);
                cs.r_rb_ds = safe_rank_biserial(cs.wilcoxon_ds);
                cs.wilcoxon_pooled = safe_wilcoxon(centered);
                cs.r_rb_pooled = safe_rank_biserial(cs.wilcoxon_pooled);

                const stats::WilcoxonResult& fallback =
                    rc.pooling == cfg::Pooling::dataset_means ? cs.wilcoxon_ds
                                                              : cs.wilcoxon_pooled;
                if (lmm_ok && !cs.lmm.singular) {
                    cs.primary_p = cs.lmm.p_value;
                    cs.primary_source = "lmm";
                } else {
                    cs.primary_p = fallback.p_value;
                    cs.primary_source = "wilcoxon_fallback";
                }
                cs.significant = cs.primary_p < rc.significance_level;
                double centered_mean = cs.mean - mg.null_value;
                cs.direction = centered_mean < 0.0   ? "below_null"
                               : centered_mean > 0.0 ? "above_null"
                                                     : "none";
                rep.conditions.push_back(std::move(cs));
            }
        }
    }

    // Output-space aggregates, control rows included.
    for (const std::string& method : order.methods_all) {
        for (double ff : order.ffs) {
            OutputAggregate oa;
            oa.method = method;
            oa.ff = ff;
            for (const auto& r : records) {
                if (!r.ok() || r.method != method || r.ff != ff) continue;
                ++oa.n;
                oa.mean_forget_acc += r.forget_acc;
                oa.mean_retain_acc += r.retain_acc;
                oa.mean_test_acc += r.test_acc;
                oa.mean_mia += r.mia;
                oa.mean_oracle_retain_acc += r.oracle_retain_acc;
                oa.mean_oracle_test_acc += r.oracle_test_acc;
                oa.mean_oracle_mia += r.oracle_mia;
                oa.mean_retain_gap += r.retain_acc - r.oracle_retain_acc;
            }
            if (oa.n == 0) continue;
            double inv = 1.0 / static_cast<double>(oa.n);
            oa.mean_forget_acc *= inv;
            oa.mean_retain_acc *= inv;
            oa.mean_test_acc *= inv;
            oa.mean_mia *= inv;
            oa.mean_oracle_retain_acc *= inv;
            oa.mean_oracle_test_acc *= inv;
            oa.mean_oracle_mia *= inv;
            oa.mean_retain_gap *= inv;
            oa.mia_window_pass = outputs::mia_pass_window(oa.mean_mia);
            rep.outputs.push_back(std::move(oa));
        }
    }

    // Pairwise contrasts: one FDR family per forget fraction.
    for (double ff : order.ffs) {
        std::vector<PairwiseComparison> family;
        for (const MetricGetter& mg : kPairwiseMetrics) {
            for (std::size_t a = 0; a < order.methods.size(); ++a) {
                for (std::size_t bidx = a + 1; bidx < order.methods.size(); ++bidx) {
                    std::vector<double> va, vb;
                    for (const std::string& dsname : order.datasets) {
                        // Pair records cell-by-cell on (dataset, seed).
                        for (const auto& ra : records) {
                            if (!ra.ok() || ra.method != order.methods[a] || ra.ff != ff ||
                                ra.dataset != dsname)
                                continue;
                            for (const auto& rb : records) {
                                if (!rb.ok() || rb.method != order.methods[bidx] ||
                                    rb.ff != ff || rb.dataset != dsname ||
                                    rb.train_seed != ra.train_seed)
                                    continue;
                                va.push_back(mg.get(ra));
                                vb.push_back(mg.get(rb));
                                break;
                            }
                        }
                    }
                    if (va.empty()) continue;
                    PairwiseComparison pc;
                    pc.ff = ff;
                    pc.metric = mg.name;
                    pc.method_a = order.methods[a];
                    pc.method_b = order.methods[bidx];
                    pc.n_pairs = va.size();
                    std::vector<double> diffs(va.size());
                    for (std::size_t i = 0; i < va.size(); ++i) diffs[i] = va[i] - vb[i];
                    pc.median_diff = stats::median(diffs);
                    auto w = safe_wilcoxon(diffs);
                    pc.p_raw = w.p_value;
                    pc.r_rb = safe_rank_biserial(w);
                    family.push_back(std::move(pc));
                }
            }
        }
        if (family.empty()) continue;
        std::vector<double> ps(family.size());
        for (std::size_t i = 0; i < family.size(); ++i) ps[i] = family[i].p_raw;
        std::vector<double> adj = stats::benjamini_hochberg(ps);
        for (std::size_t i = 0; i < family.size(); ++i) {
            family[i].p_adjusted = adj[i];
            family[i].significant = adj[i] < rc.significance_level;
            rep.pairwise.push_back(std::move(family[i]));
        }
    }

    return rep;
}

SweepPointSummary summarize_sweep_point(const std::string& label,
                                        const std::vector<MetricRecord>& records) {
    SweepPointSummary s;
    s.label = label;
    const Ordering order = scan_order(records);
    for (const std::string& method : order.methods) {
        for (double ff : order.ffs) {
            double sum_m2 = 0.0, sum_m4 = 0.0;
            std::size_t n = 0;
            for (const auto& r : records) {
                if (!r.ok() || r.method != method || r.ff != ff) continue;
                sum_m2 += r.m2;
                sum_m4 += r.m4;
                ++n;
            }
            if (n == 0) continue;
            ++s.n_conditions;
            double mean_m2 = sum_m2 / static_cast<double>(n);
            double mean_m4 = sum_m4 / static_cast<double>(n);
            if (mean_m2 < 0.0 && mean_m4 > 0.5) {
                ++s.holds;
                char buf[96];
                std::snprintf(buf, sizeof buf, "%s@%g", method.c_str(), ff);
                s.holding.push_back(buf);
            }
        }
    }
    return s;
}

ordered_json StatReport::to_json() const {
    ordered_json j;
    j["n_records"] = n_records;
    j["n_ok"] = n_ok;
    j["n_failed"] = n_failed;
    j["significance_level"] = significance_level;
    j["pooling"] = pooling;

    ordered_json conds = ordered_json::array();
    for (const auto& c : conditions) {
        ordered_json cj;
        cj["method"] = c.method;
        cj["ff"] = c.ff;
        cj["metric"] = c.metric;
        cj["null_value"] = c.null_value;
        cj["n_obs"] = c.n_obs;
        cj["n_datasets"] = c.n_datasets;
        cj["mean"] = c.mean;
        cj["sd"] = c.sd;
        cj["lmm"] = lmm_json(c.lmm);
        cj["wilcoxon_dataset_means"] = wilcoxon_json(c.wilcoxon_ds, c.r_rb_ds);
        cj["wilcoxon_pooled"] = wilcoxon_json(c.wilcoxon_pooled, c.r_rb_pooled);
        cj["primary_p"] = c.primary_p;
        cj["primary_source"] = c.primary_source;
        cj["significant"] = c.significant;
        cj["direction"] = c.direction;
        conds.push_back(std::move(cj));
    }
    j["conditions"] = std::move(conds);

    ordered_json outs = ordered_json::array();
    for (const auto& o : outputs) {
        ordered_json oj;
        oj["method"] = o.method;
        oj["ff"] = o.ff;
        oj["n"] = o.n;
        oj["mean_forget_acc"] = o.mean_forget_acc;
        oj["mean_retain_acc"] = o.mean_retain_acc;
        oj["mean_test_acc"] = o.mean_test_acc;
        oj["mean_mia"] = o.mean_mia;
        oj["mia_window_pass"] = o.mia_window_pass;
        oj["mean_oracle_retain_acc"] = o.mean_oracle_retain_acc;
        oj["mean_oracle_test_acc"] = o.mean_oracle_test_acc;
        oj["mean_oracle_mia"] = o.mean_oracle_mia;
        oj["mean_retain_gap"] = o.mean_retain_gap;
        outs.push_back(std::move(oj));
    }
    j["outputs"] = std::move(outs);

    ordered_json pw = ordered_json::array();
    for (const auto& p : pairwise) {
        ordered_json pj;
        pj["ff"] = p.ff;
        pj["metric"] = p.metric;
        pj["method_a"] = p.method_a;
        pj["method_b"] = p.method_b;
        pj["n_pairs"] = p.n_pairs;
        pj["median_diff"] = p.median_diff;
        pj["p_raw"] = p.p_raw;
        pj["p_adjusted"] = p.p_adjusted;
        pj["r_rb"] = p.r_rb;
        pj["significant"] = p.significant;
        pw.push_back(std::move(pj));
    }
    j["pairwise"] = std::move(pw);
    return j;
}

void write_metrics_jsonl(const std::filesystem::path& path,
                         const std::vector<MetricRecord>& records) {
    std::ofstream out;
    open_out(out, path);
    for (const auto& r : records) out << r.to_json().dump() << '\n';
    if (!out) throw RulerError("write failed: " + path.string());
}

std::vector<MetricRecord> read_metrics_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RulerError("cannot open: " + path.string());
    std::vector<MetricRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
        out.push_back(MetricRecord::from_json(j));
    }
    return out;
}

void write_stat_report(const std::filesystem::path& path, const StatReport& rep) {
    std::ofstream out;
    open_out(out, path);
    out << rep.to_json().dump(2) << '\n';
    if (!out) throw RulerError("write failed: " + path.string());
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRecord>& records) {
    std::ofstream out;
    open_out(out, path);
    out << "dataset,ff,train_seed,unlearn_seed,method,status,m1,retain_baseline,m2,m3,"
           "baseline_kind,retain_subsample_size,m4,m4_cap_applied,m4_pre,forget_acc,"
           "retain_acc,test_acc,mia,mia_threshold,mia_members,mia_nonmembers,mia_pass,"
           "oracle_retain_acc,oracle_test_acc,oracle_mia,n_retain,n_forget,n_test,error\n";
    for (const auto& r : records) {
        out << csv_quote(r.dataset) << ',' << fmt(r.ff) << ',' << r.train_seed << ','
            << r.unlearn_seed << ',' << r.method << ',' << r.status << ',';
        if (r.ok()) {
            out << fmt(r.m1) << ',' << fmt(r.retain_baseline) << ',' << fmt(r.m2) << ','
                << (r.m3 ? fmt(*r.m3) : std::string()) << ',' << r.baseline_kind << ','
                << r.retain_subsample_size << ',' << fmt(r.m4) << ','
                << (r.m4_cap_applied ? 1 : 0) << ',' << fmt(r.m4_pre) << ','
                << fmt(r.forget_acc) << ',' << fmt(r.retain_acc) << ',' << fmt(r.test_acc) << ','
                << fmt(r.mia) << ',' << fmt(r.mia_threshold) << ',' << r.mia_members << ','
                << r.mia_nonmembers << ',' << (r.mia_pass ? 1 : 0) << ','
                << fmt(r.oracle_retain_acc) << ',' << fmt(r.oracle_test_acc) << ','
                << fmt(r.oracle_mia) << ',' << r.n_retain << ',' << r.n_forget << ','
                << r.n_test << ',';
        } else {
            out << ",,,,,,,,,,,,,,,,,,,,,,,";
        }
        out << csv_quote(r.error) << '\n';
    }
    if (!out) throw RulerError("write failed: " + path.string());
}

void write_conditions_csv(const std::filesystem::path& path, const StatReport& rep) {
    std::ofstream out;
    open_out(out, path);
    out << "method,ff,metric,null_value,n_obs,n_datasets,mean,sd,lmm_intercept,lmm_se,"
           "lmm_z,lmm_p,sigma_u2,sigma_e2,icc,singular,lmm_groups,wilcoxon_ds_p,"
           "wilcoxon_ds_n,r_rb_ds,wilcoxon_pooled_p,wilcoxon_pooled_n,r_rb_pooled,"
           "primary_p,primary_source,significant,direction\n";
    for (const auto& c : rep.conditions) {
        out << c.method << ',' << fmt(c.ff) << ',' << c.metric << ',' << fmt(c.null_value)
            << ',' << c.n_obs << ',' << c.n_datasets << ',' << fmt(c.mean) << ',' << fmt(c.sd)
            << ',' << fmt(c.lmm.intercept) << ',' << fmt(c.lmm.se_intercept) << ','
            << fmt(c.lmm.wald_z) << ',' << fmt(c.lmm.p_value) << ',' << fmt(c.lmm.sigma_u2)
            << ',' << fmt(c.lmm.sigma_e2) << ',' << fmt(c.lmm.icc) << ','
            << (c.lmm.singular ? 1 : 0) << ',' << c.lmm.n_groups << ','
            << fmt(c.wilcoxon_ds.p_value) << ',' << c.wilcoxon_ds.n_effective << ','
            << fmt(c.r_rb_ds) << ',' << fmt(c.wilcoxon_pooled.p_value) << ','
            << c.wilcoxon_pooled.n_effective << ',' << fmt(c.r_rb_pooled) << ','
            << fmt(c.primary_p) << ',' << c.primary_source << ',' << (c.significant ? 1 : 0)
            << ',' << c.direction << '\n';
    }
    if (!out) throw RulerError("write failed: " + path.string());
}

void write_pairwise_csv(const std::filesystem::path& path, const StatReport& rep) {
    std::ofstream out;
    open_out(out, path);
    out << "ff,metric,method_a,method_b,n_pairs,median_diff,p_raw,p_adjusted,r_rb,significant\n";
    for (const auto& p : rep.pairwise) {
        out << fmt(p.ff) << ',' << p.metric << ',' << p.method_a << ',' << p.method_b << ','
            << p.n_pairs << ',' << fmt(p.median_diff) << ',' << fmt(p.p_raw) << ','
            << fmt(p.p_adjusted) << ',' << fmt(p.r_rb) << ',' << (p.significant ? 1 : 0)
            << '\n';
    }
    if (!out) throw RulerError("write failed: " + path.string());
}

}  // namespace ruler::report
