#include "ruler/lens2.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

#include "ruler/errors.hpp"
#include "ruler/kernels.hpp"
#include "ruler/rng.hpp"

namespace ruler::lens2 {

Lens2Result m4(const embed::EmbeddingMatrix& m, const data::PartitionSpec& part,
               std::size_t cap, std::uint64_t cap_seed) {
    if (!m.normalized) throw NotNormalized("percentile ranks need normalised embeddings");
    if (part.forget.empty()) throw EmptyForgetSet("empty forget set");
    if (part.retain.empty()) throw EmptyRetainSet("empty retain set");
    if (cap < 2) throw OutOfRange("retain pool cap must be at least 2");
    for (std::size_t r : part.forget)
        if (r >= m.n_records) throw IndexOutOfRange("forget index out of range");
    for (std::size_t r : part.retain)
        if (r >= m.n_records) throw IndexOutOfRange("retain index out of range");

    Lens2Result res;
    res.cap = cap;
    res.cap_seed = cap_seed;
    if (part.retain.size() > cap) {
        rng::Pcg32 g = rng::make_stream("m4-cap", "", cap_seed);
        res.pool = rng::sample_without_replacement(part.retain, cap, g);
        res.retain_cap_applied = true;
    } else {
        res.pool = part.retain;
    }
    const std::size_t p = res.pool.size();
    if (p < 2) throw RetainTooSmall("leave-one-out maxima need at least 2 retain records");

    // Leave-one-out maxima over the pool; each pairwise similarity feeds both
    // endpoints, so self-similarity never enters.
    res.s_retain.assign(p, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < p; ++i) {
        const float* ri = m.row_ptr(res.pool[i]);
        for (std::size_t j = i + 1; j < p; ++j) {
            double s = kern::dot_f32(ri, m.row_ptr(res.pool[j]), m.dim);
            if (s > res.s_retain[i]) res.s_retain[i] = s;
            if (s > res.s_retain[j]) res.s_retain[j] = s;
        }
    }
    std::vector<double> sorted_sr(res.s_retain);
    std::sort(sorted_sr.begin(), sorted_sr.end());

    res.s_forget.reserve(part.forget.size());
    res.per_record_rank.reserve(part.forget.size());
    double rank_sum = 0.0;
    for (std::size_t f : part.forget) {
        const float* rf = m.row_ptr(f);
        double s_f = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < p; ++j) {
            double s = kern::dot_f32(rf, m.row_ptr(res.pool[j]), m.dim);
            if (s > s_f) s_f = s;
        }
        res.s_forget.push_back(s_f);
        auto below = std::upper_bound(sorted_sr.begin(), sorted_sr.end(), s_f);
        double rank = static_cast<double>(below - sorted_sr.begin()) / static_cast<double>(p);
        res.per_record_rank.push_back(rank);
        rank_sum += rank;
    }
    res.aggregate = rank_sum / static_cast<double>(res.per_record_rank.size());
    return res;
}

void write_rank_csv(const std::filesystem::path& path, const Lens2Result& res,
                    const std::vector<std::size_t>& forget) {
    if (forget.size() != res.per_record_rank.size())
        throw LengthMismatch("forget index list does not match rank vector");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FileFormatError("cannot open " + path.string() + " for writing");
    out << "record_index,s_f,rank\n";
    char buf[128];
    for (std::size_t i = 0; i < forget.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", forget[i], res.s_forget[i],
                      res.per_record_rank[i]);
        out << buf;
    }
    if (!out) throw FileFormatError("short write to " + path.string());
}

}  // namespace ruler::lens2
