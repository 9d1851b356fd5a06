#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "ruler/dataset.hpp"
#include "ruler/errors.hpp"
#include "ruler/unlearn.hpp"

using namespace ruler;

namespace {

struct Bench {
    data::TabularDataset ds;
    std::vector<double> X;
    data::PartitionSpec part;
    train::MlpModel original;

    train::FeatureView view() const { return {X.data(), ds.n, ds.d}; }
};

Bench make_bench() {
    data::SyntheticSpec spec;
    spec.name = "unlearn-test";
    spec.n = 240;
    spec.d = 6;
    spec.class_sep = 1.5;
    spec.memorization_strength = 1.0;
    spec.seed = 0;
    Bench b;
    b.ds = data::make_synthetic(spec).ds;
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < b.ds.n; ++i) all.push_back(i);
    auto st = data::Standardizer::fit(b.ds, all);
    b.X = st.transform(b.ds);
    b.part = data::make_partition(b.ds, 0.2, 0.08, 1, 2);
    train::TrainConfig cfg;
    cfg.epochs = 30;
    b.original = train::fit(b.view(), b.ds.labels, b.part.train(), cfg, 0, b.ds.name);
    return b;
}

double mean_loss(const train::MlpModel& m, const Bench& b,
                 const std::vector<std::size_t>& idx) {
    auto ev = train::evaluate(m, b.view(), b.ds.labels, idx);
    double s = 0;
    for (double l : ev.loss) s += l;
    return s / ev.loss.size();
}

double acc(const train::MlpModel& m, const Bench& b, const std::vector<std::size_t>& idx) {
    auto ev = train::evaluate(m, b.view(), b.ds.labels, idx);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < idx.size(); ++i)
        hits += static_cast<std::size_t>(ev.pred[i] == b.ds.labels[idx[i]]);
    return static_cast<double>(hits) / idx.size();
}

}  // namespace

TEST_CASE("method names round-trip and tolerate spelling variants") {
    using train::Method;
    CHECK(std::string(train::method_name(Method::ga)) == "GA");
    CHECK(std::string(train::method_name(Method::neggrad_plus)) == "NegGrad+");
    CHECK(std::string(train::method_name(Method::finetune)) == "FineTune");
    CHECK(std::string(train::method_name(Method::scrub)) == "SCRUB");
    CHECK(std::string(train::method_name(Method::bad_teacher)) == "BadTeacher");
    CHECK(std::string(train::method_name(Method::oracle_control)) == "Oracle");

    for (auto m : {Method::ga, Method::neggrad_plus, Method::finetune, Method::scrub,
                   Method::bad_teacher, Method::oracle_control})
        CHECK(train::method_from_name(train::method_name(m)) == m);

    CHECK(train::method_from_name("neggrad_plus") == Method::neggrad_plus);
    CHECK(train::method_from_name("neggrad+") == Method::neggrad_plus);
    CHECK(train::method_from_name("finetune") == Method::finetune);
    CHECK(train::method_from_name("bad_teacher") == Method::bad_teacher);
    CHECK(train::method_from_name("oracle") == Method::oracle_control);
    CHECK_THROWS_AS(train::method_from_name("gradient descent"), ConfigError);
}

TEST_CASE("distillation divergence at T=1 is the plain KL") {
    std::vector<double> t = {1.0, 0.0};
    std::vector<double> s = {0.0, 1.0};
    double e = std::exp(1.0);
    double pt0 = e / (e + 1.0), pt1 = 1.0 / (e + 1.0);
    double ps0 = 1.0 / (e + 1.0), ps1 = e / (e + 1.0);
    double want = pt0 * std::log(pt0 / ps0) + pt1 * std::log(pt1 / ps1);
    CHECK(train::kl_at_temperature(t, s, 1.0) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("distillation divergence scales by T^2 on softened distributions") {
    std::vector<double> t = {2.0, -1.0, 0.5};
    std::vector<double> s = {0.0, 0.3, -0.7};
    const double T = 2.0;
    auto softmax = [](const std::vector<double>& z, double temp) {
        std::vector<double> p(z.size());
        double mx = z[0] / temp;
        for (double v : z) mx = std::max(mx, v / temp);
        double sum = 0;
        for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] / temp - mx);
        for (auto& v : p) v /= sum;
        return p;
    };
    auto pt = softmax(t, T), ps = softmax(s, T);
    double kl = 0;
    for (std::size_t i = 0; i < pt.size(); ++i) kl += pt[i] * std::log(pt[i] / ps[i]);
    CHECK(train::kl_at_temperature(t, s, T) == doctest::Approx(T * T * kl).epsilon(1e-12));

    CHECK(train::kl_at_temperature(t, t, T) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(train::kl_at_temperature(t, s, T) >= 0.0);
}

TEST_CASE("distillation divergence validates its inputs") {
    std::vector<double> t = {1.0, 0.0};
    std::vector<double> s = {1.0};
    CHECK_THROWS_AS(train::kl_at_temperature(t, s, 1.0), LengthMismatch);
    std::vector<double> s2 = {0.0, 1.0};
    CHECK_THROWS_AS(train::kl_at_temperature(t, s2, 0.0), OutOfRange);
    CHECK_THROWS_AS(train::kl_at_temperature(t, s2, -1.0), OutOfRange);
}

TEST_CASE("unlearning guards its preconditions") {
    auto b = make_bench();
    train::UnlearnConfig cfg;

    CHECK_THROWS_AS(train::unlearn(b.original, train::Method::oracle_control, b.view(),
                                   b.ds.labels, b.part, cfg, b.ds.name),
                    OutOfRange);

    auto oracle_kind = b.original;
    oracle_kind.kind = train::ModelKind::oracle;
    CHECK_THROWS_AS(train::unlearn(oracle_kind, train::Method::finetune, b.view(),
                                   b.ds.labels, b.part, cfg, b.ds.name),
                    WrongStartingModel);

    auto no_forget = b.part;
    no_forget.forget.clear();
    CHECK_THROWS_AS(train::unlearn(b.original, train::Method::ga, b.view(), b.ds.labels,
                                   no_forget, cfg, b.ds.name),
                    EmptyForgetSet);

    auto bad_alpha = cfg;
    bad_alpha.alpha = 1.0;
    CHECK_THROWS_AS(train::unlearn(b.original, train::Method::neggrad_plus, b.view(),
                                   b.ds.labels, b.part, bad_alpha, b.ds.name),
                    OutOfRange);
}

TEST_CASE("gradient ascent pushes forget-set loss up") {
    auto b = make_bench();
    train::UnlearnConfig cfg;
    cfg.epochs_ga = 5;
    auto m = train::unlearn(b.original, train::Method::ga, b.view(), b.ds.labels, b.part,
                            cfg, b.ds.name);
    CHECK(m.kind == train::ModelKind::unlearned);
    CHECK(mean_loss(m, b, b.part.forget) > mean_loss(b.original, b, b.part.forget));
}

TEST_CASE("retain-anchored methods keep the model useful") {
    auto b = make_bench();
    train::UnlearnConfig cfg;
    double orig_retain_acc = acc(b.original, b, b.part.retain);
    for (auto method : {train::Method::neggrad_plus, train::Method::finetune,
                        train::Method::scrub, train::Method::bad_teacher}) {
        auto m = train::unlearn(b.original, method, b.view(), b.ds.labels, b.part, cfg,
                                b.ds.name);
        CHECK(m.kind == train::ModelKind::unlearned);
        CHECK(m.params != b.original.params);
        CHECK(acc(m, b, b.part.retain) > orig_retain_acc - 0.1);
        auto emb = train::extract_embeddings(m, b.view());
        for (float v : emb.data) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("unlearning is deterministic in its seed") {
    auto b = make_bench();
    train::UnlearnConfig cfg;
    auto m1 = train::unlearn(b.original, train::Method::finetune, b.view(), b.ds.labels,
                             b.part, cfg, b.ds.name);
    auto m2 = train::unlearn(b.original, train::Method::finetune, b.view(), b.ds.labels,
                             b.part, cfg, b.ds.name);
    CHECK(m1.params == m2.params);

    auto other = cfg;
    other.unlearn_seed = 555;
    auto m3 = train::unlearn(b.original, train::Method::finetune, b.view(), b.ds.labels,
                             b.part, other, b.ds.name);
    CHECK(m1.params != m3.params);
}
