#pragma once

#include <cstddef>
#include <span>

// Output-space checks that complement the representation metrics: a loss
// threshold membership attack and plain accuracies.
namespace ruler::outputs {

struct MiaResult {
    double balanced_accuracy = 0.5;
    double threshold = 0.0;  // smallest maximiser; members are loss <= threshold
    std::size_t n_members = 0;
    std::size_t n_nonmembers = 0;
};

// Best balanced accuracy over all loss thresholds for separating members
// (forget-set losses) from non-members (held-out test losses). Candidate
// thresholds are the midpoints of the pooled sorted losses plus sentinels
// below and above everything, so 0.5 is always attainable and the result
// never dips under it.
MiaResult mia_threshold_attack(std::span<const double> member_losses,
                               std::span<const double> nonmember_losses);

// |mean_mia - 0.50| < 0.05, strict.
bool mia_pass_window(double mean_mia);

// Fraction of matching entries.
double accuracy(std::span<const int> predicted, std::span<const int> labels);

namespace detail {
// members_low selects the decision direction: true means "member iff
// loss <= t" (the published attack), false the mirror image.
MiaResult best_threshold(std::span<const double> member_losses,
                         std::span<const double> nonmember_losses, bool members_low);
}

}  // namespace ruler::outputs
