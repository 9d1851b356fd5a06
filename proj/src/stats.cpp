#include "ruler/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ruler/errors.hpp"

namespace ruler::stats {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw EmptyPopulation("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
    if (xs.size() < 2) throw EmptyPopulation("sample sd needs at least 2 values");
    double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw EmptyPopulation("median of empty sample");
    std::sort(xs.begin(), xs.end());
    std::size_t n = xs.size();
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

namespace {

struct SignedRanks {
    std::vector<long long> doubled;  // doubled midrank per non-zero difference
    std::vector<int> sign;           // +1 / -1, aligned with doubled
    std::vector<std::size_t> tie_sizes;
};

SignedRanks rank_differences(std::span<const double> diffs) {
    std::vector<double> abs_d;
    std::vector<int> sign;
    for (double d : diffs) {
        if (!std::isfinite(d)) throw NonFiniteInput("non-finite difference");
        if (d == 0.0) continue;
        abs_d.push_back(std::fabs(d));
        sign.push_back(d > 0.0 ? 1 : -1);
    }
    if (abs_d.empty()) throw AllZeroDifferences("all differences are zero");

    std::size_t n = abs_d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return abs_d[a] < abs_d[b]; });

    SignedRanks out;
    out.doubled.resize(n);
    out.sign = std::move(sign);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
        // 1-based ranks i+1 .. j+1 tie; doubled midrank is their sum endpoints.
        long long doubled_midrank = static_cast<long long>(i) + static_cast<long long>(j) + 2;
        for (std::size_t k = i; k <= j; ++k) out.doubled[order[k]] = doubled_midrank;
        out.tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    return out;
}

// Exact null distribution of the doubled positive-rank sum: number of sign
// assignments reaching each sum. Counts fit u64 comfortably for n <= 20.
double exact_p_value(const SignedRanks& r, long long w2_min) {
    std::size_t n = r.doubled.size();
    long long total2 = 0;
    for (long long d : r.doubled) total2 += d;
    std::vector<std::uint64_t> dp(static_cast<std::size_t>(total2) + 1, 0);
    dp[0] = 1;
    for (long long d : r.doubled) {
        for (long long s = total2; s >= d; --s)
            dp[static_cast<std::size_t>(s)] += dp[static_cast<std::size_t>(s - d)];
    }
    std::uint64_t c_low = 0;
    for (long long s = 0; s <= w2_min; ++s) c_low += dp[static_cast<std::size_t>(s)];
    double p = 2.0 * static_cast<double>(c_low) * std::ldexp(1.0, -static_cast<int>(n));
    return std::min(p, 1.0);
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs, ExactPolicy policy) {
    SignedRanks r = rank_differences(diffs);
    std::size_t n = r.doubled.size();

    long long w2_plus = 0, total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += r.doubled[i];
        if (r.sign[i] > 0) w2_plus += r.doubled[i];
    }
    long long w2_minus = total2 - w2_plus;
    long long w2_min = std::min(w2_plus, w2_minus);

    WilcoxonResult res;
    res.w_plus = static_cast<double>(w2_plus) / 2.0;
    res.w_minus = static_cast<double>(w2_minus) / 2.0;
    res.statistic = static_cast<double>(w2_min) / 2.0;
    res.n_effective = n;

    bool exact = policy == ExactPolicy::force_exact ||
                 (policy == ExactPolicy::automatic && n <= 20);
    if (exact) {
        res.exact = true;
        res.p_value = exact_p_value(r, w2_min);
        return res;
    }

    double nd = static_cast<double>(n);
    double mu = nd * (nd + 1.0) / 4.0;
    double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
    for (std::size_t t : r.tie_sizes) {
        double td = static_cast<double>(t);
        var -= (td * td * td - td) / 48.0;
    }
    double sigma = std::sqrt(var);
    res.z = (res.statistic - mu + 0.5) / sigma;
    res.p_value = std::min(1.0, 2.0 * normal_cdf(res.z));
    return res;
}

WilcoxonResult wilcoxon_one_sample(std::span<const double> values, double null_value,
                                   ExactPolicy policy) {
    std::vector<double> diffs(values.begin(), values.end());
    for (double& d : diffs) d -= null_value;
    return wilcoxon_signed_rank(diffs, policy);
}

WilcoxonResult wilcoxon_paired(std::span<const double> a, std::span<const double> b,
                               ExactPolicy policy) {
    if (a.size() != b.size()) throw LengthMismatch("paired samples differ in length");
    std::vector<double> diffs(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
    return wilcoxon_signed_rank(diffs, policy);
}

double rank_biserial(double w_min, std::size_t n) {
    if (n == 0) throw EmptyPopulation("rank biserial of empty sample");
    double total = static_cast<double>(n) * (static_cast<double>(n) + 1.0) / 2.0;
    if (!(w_min >= 0.0) || w_min > total)
        throw OutOfRange("signed-rank sum outside [0, n(n+1)/2]");
    return 1.0 - 4.0 * w_min / (static_cast<double>(n) * (static_cast<double>(n) + 1.0));
}

double rank_biserial(const WilcoxonResult& w) {
    return rank_biserial(w.statistic, w.n_effective);
}

namespace {

struct GroupSums {
    std::vector<double> n;  // group sizes
    std::vector<double> s;  // group sums
    double total_n = 0.0;
};

GroupSums summarise_groups(std::span<const double> y, std::span<const int> group) {
    if (y.size() != group.size()) throw LengthMismatch("y and group differ in length");
    if (y.empty()) throw EmptyPopulation("empty sample");
    int max_id = -1;
    for (int g : group) {
        if (g < 0) throw OutOfRange("negative group id");
        max_id = std::max(max_id, g);
    }
    GroupSums out;
    out.n.assign(static_cast<std::size_t>(max_id) + 1, 0.0);
    out.s.assign(static_cast<std::size_t>(max_id) + 1, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) throw NonFiniteInput("non-finite observation");
        out.n[static_cast<std::size_t>(group[i])] += 1.0;
        out.s[static_cast<std::size_t>(group[i])] += y[i];
    }
    // Drop empty ids so group labels need not be dense.
    std::size_t w = 0;
    for (std::size_t i = 0; i < out.n.size(); ++i) {
        if (out.n[i] > 0.0) {
            out.n[w] = out.n[i];
            out.s[w] = out.s[i];
            ++w;
        }
    }
    out.n.resize(w);
    out.s.resize(w);
    if (w < 2) throw TooFewGroups("random-intercept model needs at least 2 groups");
    out.total_n = static_cast<double>(y.size());
    return out;
}

struct ProfilePoint {
    double beta = 0.0;
    double q = 0.0;        // weighted residual sum of squares
    double log_det = 0.0;  // sum_i log(1 + n_i * lambda)
    double info = 0.0;     // sum_i n_i / (1 + n_i * lambda)
};

ProfilePoint profile_at(const GroupSums& gs, std::span<const double> y,
                        const std::vector<std::size_t>& remap, double lambda) {
    ProfilePoint pt;
    double num = 0.0;
    for (std::size_t i = 0; i < gs.n.size(); ++i) {
        double denom = 1.0 + gs.n[i] * lambda;
        num += gs.s[i] / denom;
        pt.info += gs.n[i] / denom;
        pt.log_det += std::log(denom);
    }
    pt.beta = num / pt.info;
    std::vector<double> group_resid_sum(gs.n.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        double r = y[i] - pt.beta;
        pt.q += r * r;
        group_resid_sum[remap[i]] += r;
    }
    for (std::size_t i = 0; i < gs.n.size(); ++i) {
        double denom = 1.0 + gs.n[i] * lambda;
        pt.q -= (lambda / denom) * group_resid_sum[i] * group_resid_sum[i];
    }
    return pt;
}

std::vector<std::size_t> dense_remap(std::span<const int> group) {
    int max_id = 0;
    for (int g : group) max_id = std::max(max_id, g);
    std::vector<std::size_t> id_to_dense(static_cast<std::size_t>(max_id) + 1,
                                         std::numeric_limits<std::size_t>::max());
    std::size_t next = 0;
    std::vector<std::size_t> remap(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
        auto& slot = id_to_dense[static_cast<std::size_t>(group[i])];
        if (slot == std::numeric_limits<std::size_t>::max()) slot = next++;
        remap[i] = slot;
    }
    return remap;
}

double objective_from_point(const ProfilePoint& pt, double n_obs) {
    return (n_obs - 1.0) * std::log(pt.q) + pt.log_det + std::log(pt.info);
}

}  // namespace

double lmm_profile_objective(std::span<const double> y, std::span<const int> group,
                             double lambda) {
    if (lambda < 0.0) throw OutOfRange("variance ratio must be non-negative");
    GroupSums gs = summarise_groups(y, group);
    auto remap = dense_remap(group);
    return objective_from_point(profile_at(gs, y, remap, lambda), gs.total_n);
}

LmmFit lmm_reml(std::span<const double> y, std::span<const int> group) {
    GroupSums gs = summarise_groups(y, group);
    auto remap = dense_remap(group);
    double n_obs = gs.total_n;

    auto objective = [&](double lambda) {
        return objective_from_point(profile_at(gs, y, remap, lambda), n_obs);
    };

    // Coarse log-spaced scan (plus the boundary at 0), then golden-section
    // refinement around the best grid cell. The profile is smooth in
    // log-lambda, so this reliably lands within refinement range.
    constexpr int kGrid = 321;
    constexpr double kLogLo = -12.0, kLogHi = 8.0;
    double best_lambda = 0.0;
    double best_f = objective(0.0);
    std::vector<double> grid(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        double lg = kLogLo + (kLogHi - kLogLo) * static_cast<double>(i) / (kGrid - 1);
        grid[i] = std::pow(10.0, lg);
        double f = objective(grid[i]);
        if (f < best_f) {
            best_f = f;
            best_lambda = grid[i];
        }
    }
    if (best_lambda > 0.0) {
        double lo = best_lambda / std::pow(10.0, (kLogHi - kLogLo) / (kGrid - 1));
        double hi = best_lambda * std::pow(10.0, (kLogHi - kLogLo) / (kGrid - 1));
        constexpr double kInvPhi = 0.6180339887498949;
        double a = std::log(lo), b = std::log(hi);
        double c = b - (b - a) * kInvPhi;
        double d = a + (b - a) * kInvPhi;
        double fc = objective(std::exp(c)), fd = objective(std::exp(d));
        for (int it = 0; it < 120; ++it) {
            if (fc < fd) {
                b = d; d = c; fd = fc;
                c = b - (b - a) * kInvPhi;
                fc = objective(std::exp(c));
            } else {
                a = c; c = d; fc = fd;
                d = a + (b - a) * kInvPhi;
                fd = objective(std::exp(d));
            }
        }
        double refined = std::exp(0.5 * (a + b));
        if (objective(refined) < best_f) best_lambda = refined;
    }

    ProfilePoint pt = profile_at(gs, y, remap, best_lambda);
    LmmFit fit;
    fit.n_obs = static_cast<std::size_t>(n_obs);
    fit.n_groups = gs.n.size();
    fit.sigma_e2 = pt.q / (n_obs - 1.0);
    fit.sigma_u2 = best_lambda * fit.sigma_e2;
    fit.singular = fit.sigma_u2 <= 1e-10 * fit.sigma_e2;
    if (fit.singular) {
        fit.sigma_u2 = 0.0;
        fit.icc = 0.0;
    } else {
        fit.icc = fit.sigma_u2 / (fit.sigma_u2 + fit.sigma_e2);
    }
    fit.intercept = pt.beta;
    double info = 0.0;
    for (double ni : gs.n) info += ni / (fit.sigma_e2 + ni * fit.sigma_u2);
    fit.se_intercept = 1.0 / std::sqrt(info);
    fit.wald_z = fit.intercept / fit.se_intercept;
    fit.p_value = std::min(1.0, std::erfc(std::fabs(fit.wald_z) * 0.7071067811865475244));
    return fit;
}

std::vector<double> benjamini_hochberg(std::span<const double> p_values) {
    std::size_t m = p_values.size();
    if (m == 0) throw EmptyPopulation("no p-values to adjust");
    for (double p : p_values) {
        if (!std::isfinite(p)) throw NonFiniteInput("non-finite p-value");
        if (p < 0.0 || p > 1.0) throw OutOfRange("p-value outside [0,1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t i = m; i-- > 0;) {
        double scaled = p_values[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1);
        running = std::min(running, std::min(scaled, 1.0));
        adjusted[order[i]] = running;
    }
    return adjusted;
}

}  // namespace ruler::stats
