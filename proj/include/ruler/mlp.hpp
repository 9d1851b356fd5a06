#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ruler/embedding.hpp"

namespace ruler::train {

// Row-major float64 feature matrix view (usually the standardised features).
struct FeatureView {
    const double* data = nullptr;
    std::size_t n = 0;
    std::size_t d = 0;
    const double* row(std::size_t r) const { return data + r * d; }
};

enum class ModelKind : std::uint8_t { original, oracle, unlearned, teacher };

struct TrainConfig {
    double lr = 1e-3;
    std::size_t epochs = 50;
    double dropout = 0.2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::uint64_t config_hash() const;
};

// d -> 128 -> 128 -> 2 perceptron, ReLU + dropout after each hidden layer.
// Parameters live in one flat float64 vector (w1, b1, w2, b2, w3, b3) so the
// optimiser, the serialiser and the gradient checker all see the same layout.
struct MlpModel {
    static constexpr std::size_t kHidden = 128;
    static constexpr std::size_t kOut = 2;

    std::size_t d_in = 0;
    std::vector<double> params;
    double dropout = 0.2;
    ModelKind kind = ModelKind::original;
    std::uint64_t init_seed = 0;

    std::size_t n_params() const {
        return d_in * kHidden + kHidden + kHidden * kHidden + kHidden + kHidden * kOut + kOut;
    }
    std::size_t off_w1() const { return 0; }
    std::size_t off_b1() const { return d_in * kHidden; }
    std::size_t off_w2() const { return off_b1() + kHidden; }
    std::size_t off_b2() const { return off_w2() + kHidden * kHidden; }
    std::size_t off_w3() const { return off_b2() + kHidden; }
    std::size_t off_b3() const { return off_w3() + kHidden * kOut; }

    std::span<const double> w1() const { return {params.data() + off_w1(), d_in * kHidden}; }
    std::span<const double> w2() const { return {params.data() + off_w2(), kHidden * kHidden}; }
    std::span<const double> w3() const { return {params.data() + off_w3(), kHidden * kOut}; }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for each layer's weights and
// biases, drawn from a stream keyed by (dataset name, seed) only, so training
// runs on different subsets of the same dataset start from identical weights.
MlpModel init_model(std::size_t d_in, std::uint64_t init_seed,
                    const std::string& dataset_name, double dropout = 0.2);

struct AdamState {
    std::vector<double> m, v;
    std::size_t t = 0;
};

// One Adam update over a flat parameter vector.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps);

// Full-batch training: one gradient evaluation and one Adam step per epoch.
// Dropout masks are drawn fresh each epoch; arithmetic is float64 throughout.
// Throws NonFiniteLoss if the epoch loss stops being finite.
MlpModel fit(const FeatureView& X, const std::vector<int>& y,
             const std::vector<std::size_t>& idx, const TrainConfig& cfg,
             std::uint64_t init_seed, const std::string& dataset_name,
             ModelKind kind = ModelKind::original);

// Eval-mode (dropout off) per-record cross-entropy losses and argmax
// predictions, aligned with idx.
struct EvalMetrics {
    std::vector<double> loss;
    std::vector<int> pred;
};
EvalMetrics evaluate(const MlpModel& model, const FeatureView& X, const std::vector<int>& y,
                     const std::vector<std::size_t>& idx);

// Eval-mode second-ReLU activations for every record, cast to float32.
// Not normalised; callers decide when to do that.
embed::EmbeddingMatrix extract_embeddings(const MlpModel& model, const FeatureView& X);

// Analytic gradient of eval-mode mean cross-entropy over idx.
std::vector<double> analytic_ce_gradients(const MlpModel& model, const FeatureView& X,
                                          const std::vector<int>& y,
                                          const std::vector<std::size_t>& idx);

// Central finite difference of the same loss along one parameter.
double numeric_ce_gradient(const MlpModel& model, const FeatureView& X,
                           const std::vector<int>& y, const std::vector<std::size_t>& idx,
                           std::size_t param_index, double step = 1e-5);

// Compare analytic and numeric gradients on a random parameter sample.
// Draws whose finite-difference step flips a ReLU activation are redrawn:
// a central difference across a kink does not estimate the gradient.
struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t n_checked = 0;
};
GradCheckResult grad_check(const MlpModel& model, const FeatureView& X,
                           const std::vector<int>& y, const std::vector<std::size_t>& idx,
                           std::size_t n_samples, std::uint64_t seed);

// Model cache format: "RULM" magic, u32 version, layer dims, kind, init seed,
// dropout, flat float64 parameters. Little-endian, round-trips bit-exactly.
void write_rulm(const std::filesystem::path& path, const MlpModel& model);
MlpModel read_rulm(const std::filesystem::path& path);

}  // namespace ruler::train
