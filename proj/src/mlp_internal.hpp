#pragma once

#include <vector>

#include "ruler/mlp.hpp"
#include "ruler/rng.hpp"

// Shared between the trainer and the unlearning methods; not installed.
namespace ruler::train::detail {

// Activations for one batch pass. h1/h2 are post-ReLU pre-dropout; mask
// entries hold 0 or 1/keep, so eval mode is just an all-ones mask.
struct ForwardCache {
    std::size_t n = 0;
    std::vector<double> h1, mask1, d1;
    std::vector<double> h2, mask2, d2;
    std::vector<double> logits;
};

// Train-mode pass when dropout_rng is set (fresh masks drawn in record
// order), eval-mode otherwise.
void forward_batch(const MlpModel& m, const FeatureView& X,
                   const std::vector<std::size_t>& idx, rng::Pcg32* dropout_rng,
                   ForwardCache& c);

// Accumulates parameter gradients from per-record dL/dlogits.
void backward_batch(const MlpModel& m, const FeatureView& X,
                    const std::vector<std::size_t>& idx, const ForwardCache& c,
                    const std::vector<double>& dlogits, std::vector<double>& grads);

void softmax2(const double* z, double* p);
double ce_loss(const double* z, int label);

}  // namespace ruler::train::detail
