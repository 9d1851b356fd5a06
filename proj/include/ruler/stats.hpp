#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ruler::stats {

double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);  // n-1 denominator
double median(std::vector<double> xs);         // by value: sorts its copy

// P(Z <= x) for standard normal.
double normal_cdf(double x);

enum class ExactPolicy { automatic, force_exact, force_normal };

// One-sample / paired signed-rank test. Zero differences are dropped, tied
// absolute values get midranks, the statistic is min(w_plus, w_minus), and
// the two-sided p comes from full enumeration for n_effective <= 20 (DP over
// doubled ranks) or a tie-corrected normal approximation with 0.5 continuity
// correction beyond that.
struct WilcoxonResult {
    double w_plus = 0.0;
    double w_minus = 0.0;
    double statistic = 0.0;  // min(w_plus, w_minus)
    std::size_t n_effective = 0;
    double p_value = 1.0;
    bool exact = false;
    double z = 0.0;  // only meaningful on the normal path
};

WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs,
                                    ExactPolicy policy = ExactPolicy::automatic);
WilcoxonResult wilcoxon_one_sample(std::span<const double> values, double null_value,
                                   ExactPolicy policy = ExactPolicy::automatic);
WilcoxonResult wilcoxon_paired(std::span<const double> a, std::span<const double> b,
                               ExactPolicy policy = ExactPolicy::automatic);

// Matched-pairs rank-biserial correlation from the smaller signed-rank sum:
// 1 - 4w / (n(n+1)).
double rank_biserial(double w_min, std::size_t n);
double rank_biserial(const WilcoxonResult& w);

// Random-intercept model y_ij = b0 + u_i + e_ij fitted by REML with the
// variance ratio lambda = sigma_u^2 / sigma_e^2 profiled out.
struct LmmFit {
    double intercept = 0.0;
    double se_intercept = 0.0;
    double wald_z = 0.0;
    double p_value = 1.0;
    double sigma_u2 = 0.0;
    double sigma_e2 = 0.0;
    double icc = 0.0;
    bool singular = false;  // sigma_u^2 <= 1e-10 * sigma_e^2
    std::size_t n_obs = 0;
    std::size_t n_groups = 0;
};

LmmFit lmm_reml(std::span<const double> y, std::span<const int> group);

// Profiled REML objective at a given lambda (what lmm_reml minimises);
// exposed so tests can probe the optimum.
double lmm_profile_objective(std::span<const double> y, std::span<const int> group,
                             double lambda);

// Step-up false-discovery-rate adjustment; returns adjusted p-values in the
// input order. adj_(i) = min_{j >= i} min(1, p_(j) * m / j).
std::vector<double> benjamini_hochberg(std::span<const double> p_values);

}  // namespace ruler::stats
