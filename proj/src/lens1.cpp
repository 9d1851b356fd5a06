#include "ruler/lens1.hpp"

#include <algorithm>

#include "ruler/errors.hpp"
#include "ruler/rng.hpp"
#include "ruler/stats.hpp"

namespace ruler::lens1 {

namespace {

void check_pair_inputs(const embed::ModelTriple& triple, const data::PartitionSpec& part) {
    if (!triple.unlearned || !triple.oracle)
        throw MissingModel("similarity metrics need unlearned and oracle embeddings");
    if (!triple.paired_seed)
        throw UnpairedSeeds("oracle was not trained with the paired init seed");
    triple.validate();
    if (part.forget.empty()) throw EmptyForgetSet("empty forget set");
}

double mean_forget_cosine(const embed::EmbeddingMatrix& a, const embed::EmbeddingMatrix& b,
                          const std::vector<std::size_t>& forget) {
    double sum = 0.0;
    for (std::size_t r : forget) sum += embed::cosine_cross(a, b, r);
    return sum / static_cast<double>(forget.size());
}

}  // namespace

std::vector<std::size_t> retain_subsample(const std::vector<std::size_t>& retain,
                                          std::uint64_t seed) {
    if (retain.empty()) throw EmptyRetainSet("empty retain set");
    std::size_t want = std::min<std::size_t>(500, retain.size());
    rng::Pcg32 g = rng::make_stream("m2-baseline", "", seed);
    return rng::sample_without_replacement(retain, want, g);
}

double m1(const embed::ModelTriple& triple, const data::PartitionSpec& part) {
    check_pair_inputs(triple, part);
    return mean_forget_cosine(*triple.unlearned, *triple.oracle, part.forget);
}

double m2(const embed::ModelTriple& triple, const data::PartitionSpec& part,
          BaselineKind kind, std::uint64_t subsample_seed) {
    return compute(triple, part, kind, subsample_seed).m2;
}

double m3(const embed::ModelTriple& triple, const data::PartitionSpec& part) {
    check_pair_inputs(triple, part);
    if (!triple.original)
        throw MissingModel("m3 needs the original model's embeddings");
    double toward = mean_forget_cosine(*triple.unlearned, *triple.oracle, part.forget);
    double from = mean_forget_cosine(*triple.original, *triple.oracle, part.forget);
    return toward - from;
}

Lens1Result compute(const embed::ModelTriple& triple, const data::PartitionSpec& part,
                    BaselineKind kind, std::uint64_t subsample_seed) {
    check_pair_inputs(triple, part);

    Lens1Result res;
    res.baseline_kind = kind;
    res.retain_subsample_seed = subsample_seed;
    res.m1 = mean_forget_cosine(*triple.unlearned, *triple.oracle, part.forget);

    std::vector<std::size_t> sub = retain_subsample(part.retain, subsample_seed);
    res.retain_subsample_size = sub.size();
    std::vector<double> sims;
    sims.reserve(sub.size());
    for (std::size_t r : sub)
        sims.push_back(embed::cosine_cross(*triple.unlearned, *triple.oracle, r));
    res.retain_baseline =
        kind == BaselineKind::median ? stats::median(sims) : stats::mean(sims);
    res.m2 = res.m1 - res.retain_baseline;

    if (triple.original) res.m3 = m3(triple, part);
    return res;
}

}  // namespace ruler::lens1
