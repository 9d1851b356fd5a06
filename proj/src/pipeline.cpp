#include "ruler/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <unistd.h>

#include "ruler/errors.hpp"
#include "ruler/mlp.hpp"
#include "ruler/rng.hpp"
#include "ruler/stats.hpp"
#include "ruler/unlearn.hpp"

namespace ruler::pipe {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// One dataset prepared for training: raw records plus features standardised
// on the train split (which is ff-independent, so one transform serves every
// cell of the dataset).
struct DataBundle {
    data::TabularDataset ds;
    std::vector<double> x_std;
    std::uint64_t fingerprint = 0;

    train::FeatureView view() const { return {x_std.data(), ds.n, ds.d}; }
};

DataBundle prepare_dataset(const cfg::DatasetConfig& dc, const cfg::RunConfig& rc) {
    DataBundle b;
    if (dc.synthetic) {
        b.ds = data::make_synthetic(dc.synth).ds;
    } else {
        b.ds = data::load_csv(dc.csv_path, dc.label_column, dc.binarize);
        b.ds.name = dc.name;
    }
    b.ds.validate();
    auto split = data::stratified_split(b.ds, rc.test_frac, rc.split_seed);
    auto std_fit = data::Standardizer::fit(b.ds, split.train);
    b.x_std = std_fit.transform(b.ds);
    b.fingerprint = b.ds.fingerprint();
    return b;
}

std::vector<int> subset_labels(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) out[k] = y[idx[k]];
    return out;
}

double subset_accuracy(const train::EvalMetrics& em, const std::vector<int>& y,
                       const std::vector<std::size_t>& idx) {
    std::vector<int> truth = subset_labels(y, idx);
    return outputs::accuracy(em.pred, truth);
}

std::string key_hex(std::uint64_t key) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(key));
    return buf;
}

std::uint64_t model_key(std::uint64_t ds_fingerprint, const std::vector<std::size_t>& train_idx,
                        std::uint64_t init_seed, const train::TrainConfig& tc,
                        train::ModelKind kind) {
    std::uint64_t h = rng::fnv1a64(&ds_fingerprint, sizeof ds_fingerprint);
    h = rng::fnv1a64(train_idx.data(), train_idx.size() * sizeof(std::size_t), h);
    h = rng::fnv1a64(&init_seed, sizeof init_seed, h);
    std::uint64_t ch = tc.config_hash();
    h = rng::fnv1a64(&ch, sizeof ch, h);
    auto k = static_cast<std::uint8_t>(kind);
    return rng::fnv1a64(&k, sizeof k, h);
}

// Keyed model store. The first caller for a key trains and publishes; any
// concurrent caller for the same key waits on the same future. A disk
// directory, when set, persists models across processes; unreadable or
// mismatched files fall back to retraining.
class ModelCache {
  public:
    explicit ModelCache(std::string dir) : dir_(std::move(dir)) {}

    using ModelPtr = std::shared_ptr<const train::MlpModel>;

    ModelPtr get_or_train(std::uint64_t key, std::size_t d_in, train::ModelKind kind,
                          std::uint64_t init_seed, const std::function<train::MlpModel()>& make) {
        std::promise<ModelPtr> prom;
        std::shared_future<ModelPtr> fut;
        bool owner = false;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = futures_.find(key);
            if (it == futures_.end()) {
                fut = prom.get_future().share();
                futures_.emplace(key, fut);
                owner = true;
            } else {
                fut = it->second;
            }
        }
        if (!owner) return fut.get();

        try {
            ModelPtr model = load_disk(key, d_in, kind, init_seed);
            if (!model) {
                model = std::make_shared<const train::MlpModel>(make());
                store_disk(key, *model);
            }
            prom.set_value(model);
            return model;
        } catch (...) {
            prom.set_exception(std::current_exception());
            {
                // Drop the failed entry so a later run of the same key can retry.
                std::lock_guard<std::mutex> lock(mu_);
                futures_.erase(key);
            }
            throw;
        }
    }

  private:
    ModelPtr load_disk(std::uint64_t key, std::size_t d_in, train::ModelKind kind,
                       std::uint64_t init_seed) {
        if (dir_.empty()) return nullptr;
        fs::path path = fs::path(dir_) / ("rulm-" + key_hex(key) + ".rulm");
        std::error_code ec;
        if (!fs::exists(path, ec)) return nullptr;
        try {
            auto m = std::make_shared<train::MlpModel>(train::read_rulm(path));
            if (m->d_in != d_in || m->kind != kind || m->init_seed != init_seed) return nullptr;
            return m;
        } catch (const RulerError&) {
            return nullptr;
        }
    }

    void store_disk(std::uint64_t key, const train::MlpModel& model) {
        if (dir_.empty()) return;
        try {
            fs::create_directories(dir_);
            fs::path final_path = fs::path(dir_) / ("rulm-" + key_hex(key) + ".rulm");
            fs::path tmp = final_path;
            tmp += ".tmp-" + std::to_string(::getpid());
            train::write_rulm(tmp, model);
            fs::rename(tmp, final_path);
        } catch (...) {
            // Best-effort persistence; the in-memory copy is authoritative.
        }
    }

    std::string dir_;
    std::mutex mu_;
    std::map<std::uint64_t, std::shared_future<ModelPtr>> futures_;
};

std::string resolve_cache_dir(const cfg::RunConfig& rc) {
    if (!rc.cache_dir.empty()) return rc.cache_dir;
    const char* env = std::getenv("RULER_CACHE_DIR");
    return env ? env : "";
}

struct OracleContext {
    double retain_acc = 0.0;
    double test_acc = 0.0;
    outputs::MiaResult mia;
};

void fill_outputs(MetricRecord& rec, const train::MlpModel& model, const train::FeatureView& X,
                  const std::vector<int>& y, const data::PartitionSpec& part) {
    auto ev_f = train::evaluate(model, X, y, part.forget);
    auto ev_r = train::evaluate(model, X, y, part.retain);
    auto ev_t = train::evaluate(model, X, y, part.test);
    rec.forget_acc = subset_accuracy(ev_f, y, part.forget);
    rec.retain_acc = subset_accuracy(ev_r, y, part.retain);
    rec.test_acc = subset_accuracy(ev_t, y, part.test);
    auto mia = outputs::mia_threshold_attack(ev_f.loss, ev_t.loss);
    rec.mia = mia.balanced_accuracy;
    rec.mia_threshold = mia.threshold;
    rec.mia_members = mia.n_members;
    rec.mia_nonmembers = mia.n_nonmembers;
    rec.mia_pass = outputs::mia_pass_window(mia.balanced_accuracy);
}

}  // namespace

ordered_json MetricRecord::to_json() const {
    ordered_json j;
    j["dataset"] = dataset;
    j["ff"] = ff;
    j["train_seed"] = train_seed;
    j["unlearn_seed"] = unlearn_seed;
    j["method"] = method;
    j["status"] = status;
    if (!ok()) {
        j["error"] = error;
        return j;
    }
    j["m1"] = m1;
    j["retain_baseline"] = retain_baseline;
    j["m2"] = m2;
    if (m3) {
        j["m3"] = *m3;
    } else {
        j["m3"] = nullptr;
    }
    j["baseline_kind"] = baseline_kind;
    j["retain_subsample_size"] = retain_subsample_size;
    j["m4"] = m4;
    j["m4_cap_applied"] = m4_cap_applied;
    j["m4_pre"] = m4_pre;
    j["forget_acc"] = forget_acc;
    j["retain_acc"] = retain_acc;
    j["test_acc"] = test_acc;
    j["mia"] = mia;
    j["mia_threshold"] = mia_threshold;
    j["mia_members"] = mia_members;
    j["mia_nonmembers"] = mia_nonmembers;
    j["mia_pass"] = mia_pass;
    j["oracle_retain_acc"] = oracle_retain_acc;
    j["oracle_test_acc"] = oracle_test_acc;
    j["oracle_mia"] = oracle_mia;
    j["n_retain"] = n_retain;
    j["n_forget"] = n_forget;
    j["n_test"] = n_test;
    return j;
}

MetricRecord MetricRecord::from_json(const json& j) {
    MetricRecord r;
    try {
        r.dataset = j.at("dataset").get<std::string>();
        r.ff = j.at("ff").get<double>();
        r.train_seed = j.at("train_seed").get<std::uint64_t>();
        r.unlearn_seed = j.at("unlearn_seed").get<std::uint64_t>();
        r.method = j.at("method").get<std::string>();
        r.status = j.at("status").get<std::string>();
        if (!r.ok()) {
            r.error = j.value("error", std::string());
            return r;
        }
        r.m1 = j.at("m1").get<double>();
        r.retain_baseline = j.at("retain_baseline").get<double>();
        r.m2 = j.at("m2").get<double>();
        if (j.contains("m3") && !j.at("m3").is_null()) r.m3 = j.at("m3").get<double>();
        r.baseline_kind = j.at("baseline_kind").get<std::string>();
        r.retain_subsample_size = j.at("retain_subsample_size").get<std::size_t>();
        r.m4 = j.at("m4").get<double>();
        r.m4_cap_applied = j.at("m4_cap_applied").get<bool>();
        r.m4_pre = j.at("m4_pre").get<double>();
        r.forget_acc = j.at("forget_acc").get<double>();
        r.retain_acc = j.at("retain_acc").get<double>();
        r.test_acc = j.at("test_acc").get<double>();
        r.mia = j.at("mia").get<double>();
        r.mia_threshold = j.at("mia_threshold").get<double>();
        r.mia_members = j.at("mia_members").get<std::size_t>();
        r.mia_nonmembers = j.at("mia_nonmembers").get<std::size_t>();
        r.mia_pass = j.at("mia_pass").get<bool>();
        r.oracle_retain_acc = j.at("oracle_retain_acc").get<double>();
        r.oracle_test_acc = j.at("oracle_test_acc").get<double>();
        r.oracle_mia = j.at("oracle_mia").get<double>();
        r.n_retain = j.at("n_retain").get<std::size_t>();
        r.n_forget = j.at("n_forget").get<std::size_t>();
        r.n_test = j.at("n_test").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("metrics record: ") + e.what());
    }
    return r;
}

RunResult run_pipeline(const cfg::RunConfig& rc, std::ostream* log) {
    const std::size_t n_ds = rc.datasets.size();
    const std::size_t n_ff = rc.ffs.size();
    const std::size_t n_seed = rc.train_seeds.size();
    const std::size_t n_meth = rc.methods.size();
    const std::size_t n_tasks = n_ds * n_ff * n_seed;

    // Dataset preparation is sequential; a dataset that cannot load marks
    // all of its cells failed instead of aborting the run.
    std::vector<std::optional<DataBundle>> bundles(n_ds);
    std::vector<std::string> bundle_errors(n_ds);
    for (std::size_t i = 0; i < n_ds; ++i) {
        try {
            bundles[i] = prepare_dataset(rc.datasets[i], rc);
        } catch (const std::exception& e) {
            bundle_errors[i] = e.what();
        }
    }

    RunResult out;
    out.records.resize(n_tasks * n_meth);

    // Pre-fill cell identity so failed cells still report who they are.
    for (std::size_t t = 0; t < n_tasks; ++t) {
        const std::size_t d_i = t / (n_ff * n_seed);
        const std::size_t f_i = (t / n_seed) % n_ff;
        const std::size_t s_i = t % n_seed;
        for (std::size_t m_i = 0; m_i < n_meth; ++m_i) {
            MetricRecord& rec = out.records[t * n_meth + m_i];
            rec.dataset = rc.datasets[d_i].name;
            rec.ff = rc.ffs[f_i];
            rec.train_seed = rc.train_seeds[s_i];
            rec.unlearn_seed = rc.unlearn.unlearn_seed;
            rec.method = train::method_name(rc.methods[m_i]);
            rec.baseline_kind = cfg::baseline_name(rc.baseline);
        }
    }

    ModelCache cache(resolve_cache_dir(rc));
    std::atomic<std::size_t> next{0};
    std::mutex log_mu;

    auto run_task = [&](std::size_t t) {
        const std::size_t d_i = t / (n_ff * n_seed);
        const std::size_t f_i = (t / n_seed) % n_ff;
        const std::size_t s_i = t % n_seed;
        MetricRecord* recs = &out.records[t * n_meth];

        auto fail_all = [&](const std::string& why) {
            for (std::size_t m_i = 0; m_i < n_meth; ++m_i) {
                recs[m_i].status = "failed";
                recs[m_i].error = why;
            }
        };

        if (!bundles[d_i]) {
            fail_all("dataset: " + bundle_errors[d_i]);
            return;
        }
        const DataBundle& b = *bundles[d_i];
        const train::FeatureView X = b.view();
        const std::string& name = rc.datasets[d_i].name;
        const std::uint64_t train_seed = rc.train_seeds[s_i];
        const std::uint64_t init_seed = train_seed + rc.seed_offset;

        data::PartitionSpec part;
        std::shared_ptr<const train::MlpModel> orig, oracle;
        embed::EmbeddingMatrix orig_emb, oracle_emb;
        OracleContext octx;
        double m4_pre = 0.0;
        try {
            part = data::make_partition(b.ds, rc.test_frac, rc.ffs[f_i], rc.split_seed,
                                        rc.forget_seed);
            auto train_idx = part.train();
            orig = cache.get_or_train(
                model_key(b.fingerprint, train_idx, init_seed, rc.train, train::ModelKind::original),
                b.ds.d, train::ModelKind::original, init_seed, [&] {
                    return train::fit(X, b.ds.labels, train_idx, rc.train, init_seed, name,
                                      train::ModelKind::original);
                });
            oracle = cache.get_or_train(
                model_key(b.fingerprint, part.retain, init_seed, rc.train, train::ModelKind::oracle),
                b.ds.d, train::ModelKind::oracle, init_seed, [&] {
                    return train::fit(X, b.ds.labels, part.retain, rc.train, init_seed, name,
                                      train::ModelKind::oracle);
                });
            orig_emb = embed::l2_normalize(train::extract_embeddings(*orig, X));
            oracle_emb = embed::l2_normalize(train::extract_embeddings(*oracle, X));
            m4_pre = lens2::m4(orig_emb, part, rc.m4_cap, rc.m4_cap_seed).aggregate;

            auto ev_f = train::evaluate(*oracle, X, b.ds.labels, part.forget);
            auto ev_r = train::evaluate(*oracle, X, b.ds.labels, part.retain);
            auto ev_t = train::evaluate(*oracle, X, b.ds.labels, part.test);
            octx.retain_acc = subset_accuracy(ev_r, b.ds.labels, part.retain);
            octx.test_acc = subset_accuracy(ev_t, b.ds.labels, part.test);
            octx.mia = outputs::mia_threshold_attack(ev_f.loss, ev_t.loss);
        } catch (const std::exception& e) {
            fail_all(e.what());
            return;
        }

        for (std::size_t m_i = 0; m_i < n_meth; ++m_i) {
            MetricRecord& rec = recs[m_i];
            try {
                rec.n_retain = part.retain.size();
                rec.n_forget = part.forget.size();
                rec.n_test = part.test.size();
                rec.m4_pre = m4_pre;
                rec.oracle_retain_acc = octx.retain_acc;
                rec.oracle_test_acc = octx.test_acc;
                rec.oracle_mia = octx.mia.balanced_accuracy;

                embed::EmbeddingMatrix unl_emb;
                const train::MlpModel* unl_model = nullptr;
                train::MlpModel unl_storage;
                if (rc.methods[m_i] == train::Method::oracle_control) {
                    unl_emb = oracle_emb;
                    unl_emb.role = embed::ModelRole::unlearned;
                    unl_model = oracle.get();
                } else {
                    unl_storage = train::unlearn(*orig, rc.methods[m_i], X, b.ds.labels, part,
                                                 rc.unlearn, name);
                    unl_model = &unl_storage;
                    unl_emb = embed::l2_normalize(train::extract_embeddings(unl_storage, X));
                }

                embed::ModelTriple triple;
                triple.original = &orig_emb;
                triple.unlearned = &unl_emb;
                triple.oracle = &oracle_emb;
                triple.paired_seed = true;
                auto l1 = lens1::compute(triple, part, rc.baseline, rc.m2_subsample_seed);
                rec.m1 = l1.m1;
                rec.retain_baseline = l1.retain_baseline;
                rec.m2 = l1.m2;
                rec.m3 = l1.m3;
                rec.retain_subsample_size = l1.retain_subsample_size;

                auto l2 = lens2::m4(unl_emb, part, rc.m4_cap, rc.m4_cap_seed);
                rec.m4 = l2.aggregate;
                rec.m4_cap_applied = l2.retain_cap_applied;

                fill_outputs(rec, *unl_model, X, b.ds.labels, part);

                if (rc.export_rank_csv) {
                    fs::path dir = fs::path(rc.out_dir) / "ranks";
                    fs::create_directories(dir);
                    char fname[160];
                    std::snprintf(fname, sizeof fname, "%s-ff%g-seed%llu-%s.csv", name.c_str(),
                                  rec.ff, static_cast<unsigned long long>(train_seed),
                                  rec.method.c_str());
                    lens2::write_rank_csv(dir / fname, l2, part.forget);
                }
            } catch (const std::exception& e) {
                rec.status = "failed";
                rec.error = e.what();
            }
        }
        if (log) {
            std::lock_guard<std::mutex> lock(log_mu);
            (*log) << "cell " << name << " ff=" << rc.ffs[f_i] << " seed=" << train_seed
                   << " done\n";
        }
    };

    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(rc.threads), n_tasks));
    if (n_workers <= 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t t = next.fetch_add(1);
                    if (t >= n_tasks) return;
                    run_task(t);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (const auto& rec : out.records) {
        if (rec.ok()) {
            ++out.n_ok;
        } else {
            ++out.n_failed;
        }
    }
    return out;
}

ordered_json VerifyResult::to_json() const {
    ordered_json j;
    if (lens1) {
        j["m1"] = lens1->m1;
        j["retain_baseline"] = lens1->retain_baseline;
        j["m2"] = lens1->m2;
        if (lens1->m3) {
            j["m3"] = *lens1->m3;
        } else {
            j["m3"] = nullptr;
        }
        j["baseline_kind"] =
            lens1->baseline_kind == lens1::BaselineKind::median ? "median" : "mean";
        j["retain_subsample_size"] = lens1->retain_subsample_size;
    }
    j["m4"] = lens2.aggregate;
    j["m4_cap_applied"] = lens2.retain_cap_applied;
    j["n_forget"] = lens2.per_record_rank.size();
    return j;
}

VerifyResult verify_external(const VerifyInputs& in) {
    VerifyResult out;
    embed::EmbeddingMatrix unl = in.unlearned.normalized ? in.unlearned : embed::l2_normalize(in.unlearned);
    unl.role = embed::ModelRole::unlearned;
    unl.validate();
    in.part.validate(unl.n_records);

    std::optional<embed::EmbeddingMatrix> oracle, original;
    if (in.oracle) {
        oracle = in.oracle->normalized ? *in.oracle : embed::l2_normalize(*in.oracle);
        oracle->role = embed::ModelRole::oracle;
        oracle->validate();
    }
    if (in.original) {
        original = in.original->normalized ? *in.original : embed::l2_normalize(*in.original);
        original->role = embed::ModelRole::original;
        original->validate();
    }

    if (oracle) {
        embed::ModelTriple triple;
        triple.unlearned = &unl;
        triple.oracle = &*oracle;
        triple.original = original ? &*original : nullptr;
        triple.paired_seed = in.paired_seed;
        out.lens1 = lens1::compute(triple, in.part, in.baseline, in.m2_subsample_seed);
    }
    out.lens2 = lens2::m4(unl, in.part, in.m4_cap, in.m4_cap_seed);
    return out;
}

ordered_json CalibrationReport::to_json() const {
    ordered_json j;
    j["dataset"] = dataset;
    j["n_oracles"] = n_oracles;
    j["n_pairs"] = pairs.size();
    j["baseline_kind"] = baseline_kind;
    j["mean_m2"] = mean_m2;
    j["sd_m2"] = sd_m2;
    j["se_m2"] = se_m2;
    j["centered"] = centered;
    ordered_json arr = ordered_json::array();
    for (const auto& p : pairs) {
        ordered_json pj;
        pj["seed_a"] = p.seed_a;
        pj["seed_b"] = p.seed_b;
        pj["m1"] = p.m1;
        pj["m2"] = p.m2;
        arr.push_back(std::move(pj));
    }
    j["pairs"] = std::move(arr);
    return j;
}

CalibrationReport calibrate_oracle_pairs(const cfg::RunConfig& rc, const cfg::CalibrateConfig& cc,
                                         std::ostream* log) {
    if (cc.n_oracles < 2) throw ConfigError("calibration needs at least 2 models");
    const cfg::DatasetConfig& dc = rc.datasets.at(cc.dataset_index);
    DataBundle b = prepare_dataset(dc, rc);
    const train::FeatureView X = b.view();
    data::PartitionSpec part =
        data::make_partition(b.ds, rc.test_frac, rc.ffs.front(), rc.split_seed, rc.forget_seed);

    CalibrationReport rep;
    rep.dataset = dc.name;
    rep.n_oracles = cc.n_oracles;
    rep.baseline_kind = cfg::baseline_name(rc.baseline);

    std::vector<std::uint64_t> seeds(cc.n_oracles);
    for (std::size_t i = 0; i < cc.n_oracles; ++i) seeds[i] = i + rc.seed_offset;

    std::vector<embed::EmbeddingMatrix> embs;
    embs.reserve(cc.n_oracles);
    for (std::size_t i = 0; i < cc.n_oracles; ++i) {
        auto model = train::fit(X, b.ds.labels, part.retain, rc.train, seeds[i], dc.name,
                                train::ModelKind::oracle);
        embs.push_back(embed::l2_normalize(train::extract_embeddings(model, X)));
        if (log) (*log) << "calibration model " << (i + 1) << "/" << cc.n_oracles << " trained\n";
    }

    std::vector<double> m2s;
    for (std::size_t i = 0; i < cc.n_oracles; ++i) {
        for (std::size_t j = i + 1; j < cc.n_oracles; ++j) {
            embed::ModelTriple triple;
            triple.unlearned = &embs[i];
            triple.oracle = &embs[j];
            // The pair is deliberately cross-seed; the flag only asserts the
            // caller accepts the pairing for metric purposes.
            triple.paired_seed = true;
            auto l1 = lens1::compute(triple, part, rc.baseline, rc.m2_subsample_seed);
            rep.pairs.push_back({seeds[i], seeds[j], l1.m1, l1.m2});
            m2s.push_back(l1.m2);
        }
    }
    rep.mean_m2 = stats::mean(m2s);
    rep.sd_m2 = m2s.size() > 1 ? stats::sample_sd(m2s) : 0.0;
    rep.se_m2 = rep.sd_m2 / std::sqrt(static_cast<double>(m2s.size()));
    rep.centered = std::abs(rep.mean_m2) < 2.0 * rep.se_m2;
    return rep;
}

}  // namespace ruler::pipe
