#include "ruler/output_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ruler/errors.hpp"

namespace ruler::outputs {

namespace detail {

MiaResult best_threshold(std::span<const double> member_losses,
                         std::span<const double> nonmember_losses, bool members_low) {
    if (member_losses.empty() || nonmember_losses.empty())
        throw EmptyPopulation("membership attack needs both populations");
    for (double v : member_losses)
        if (!std::isfinite(v)) throw NonFiniteInput("non-finite member loss");
    for (double v : nonmember_losses)
        if (!std::isfinite(v)) throw NonFiniteInput("non-finite non-member loss");

    std::vector<double> members(member_losses.begin(), member_losses.end());
    std::vector<double> nonmembers(nonmember_losses.begin(), nonmember_losses.end());
    std::sort(members.begin(), members.end());
    std::sort(nonmembers.begin(), nonmembers.end());

    std::vector<double> pooled;
    pooled.reserve(members.size() + nonmembers.size());
    std::merge(members.begin(), members.end(), nonmembers.begin(), nonmembers.end(),
               std::back_inserter(pooled));
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    std::vector<double> candidates;
    candidates.reserve(pooled.size() + 1);
    candidates.push_back(pooled.front() - 1.0);
    for (std::size_t i = 0; i + 1 < pooled.size(); ++i)
        candidates.push_back(0.5 * (pooled[i] + pooled[i + 1]));
    candidates.push_back(pooled.back() + 1.0);

    auto frac_at_most = [](const std::vector<double>& xs, double t) {
        return static_cast<double>(std::upper_bound(xs.begin(), xs.end(), t) - xs.begin()) /
               static_cast<double>(xs.size());
    };

    MiaResult res;
    res.n_members = members.size();
    res.n_nonmembers = nonmembers.size();
    res.balanced_accuracy = -1.0;
    for (double t : candidates) {
        double member_hit = frac_at_most(members, t);
        double nonmember_hit = frac_at_most(nonmembers, t);
        double tpr = members_low ? member_hit : 1.0 - member_hit;
        double tnr = members_low ? 1.0 - nonmember_hit : nonmember_hit;
        double ba = 0.5 * (tpr + tnr);
        if (ba > res.balanced_accuracy) {
            res.balanced_accuracy = ba;
            res.threshold = t;
        }
    }
    return res;
}

}  // namespace detail

MiaResult mia_threshold_attack(std::span<const double> member_losses,
                               std::span<const double> nonmember_losses) {
    return detail::best_threshold(member_losses, nonmember_losses, true);
}

bool mia_pass_window(double mean_mia) { return std::fabs(mean_mia - 0.50) < 0.05; }

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size())
        throw LengthMismatch("prediction and label counts differ");
    if (predicted.empty()) throw EmptyPopulation("accuracy of empty set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        hits += static_cast<std::size_t>(predicted[i] == labels[i]);
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace ruler::outputs
