#include "ruler/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mlp_internal.hpp"
#include "ruler/errors.hpp"
#include "ruler/kernels.hpp"
#include "ruler/rng.hpp"

namespace ruler::train {

std::uint64_t TrainConfig::config_hash() const {
    double fields[5] = {lr, dropout, beta1, beta2, eps};
    std::uint64_t h = rng::fnv1a64(fields, sizeof(fields));
    std::uint64_t e = epochs;
    return rng::fnv1a64(&e, sizeof(e), h);
}

MlpModel init_model(std::size_t d_in, std::uint64_t init_seed,
                    const std::string& dataset_name, double dropout) {
    if (d_in == 0) throw DimMismatch("model needs at least one input feature");
    MlpModel m;
    m.d_in = d_in;
    m.dropout = dropout;
    m.init_seed = init_seed;
    m.params.resize(m.n_params());
    rng::Pcg32 g = rng::make_stream("init", dataset_name, init_seed);
    auto fill_layer = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
        double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i)
            m.params[offset + i] = (2.0 * g.next_double() - 1.0) * k;
    };
    fill_layer(m.off_w1(), d_in * MlpModel::kHidden, d_in);
    fill_layer(m.off_b1(), MlpModel::kHidden, d_in);
    fill_layer(m.off_w2(), MlpModel::kHidden * MlpModel::kHidden, MlpModel::kHidden);
    fill_layer(m.off_b2(), MlpModel::kHidden, MlpModel::kHidden);
    fill_layer(m.off_w3(), MlpModel::kHidden * MlpModel::kOut, MlpModel::kHidden);
    fill_layer(m.off_b3(), MlpModel::kOut, MlpModel::kHidden);
    return m;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size()) throw LengthMismatch("param/grad size mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) throw LengthMismatch("optimizer state size mismatch");
    ++state.t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        double m_hat = state.m[i] / bc1;
        double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

namespace detail {

void forward_batch(const MlpModel& m, const FeatureView& X,
                   const std::vector<std::size_t>& idx, rng::Pcg32* dropout_rng,
                   ForwardCache& c) {
    constexpr std::size_t H = MlpModel::kHidden;
    constexpr std::size_t O = MlpModel::kOut;
    const std::size_t n = idx.size();
    const std::size_t d = m.d_in;
    c.n = n;
    c.h1.resize(n * H);
    c.mask1.resize(n * H);
    c.d1.resize(n * H);
    c.h2.resize(n * H);
    c.mask2.resize(n * H);
    c.d2.resize(n * H);
    c.logits.resize(n * O);

    const double* w1 = m.params.data() + m.off_w1();
    const double* b1 = m.params.data() + m.off_b1();
    const double* w2 = m.params.data() + m.off_w2();
    const double* b2 = m.params.data() + m.off_b2();
    const double* w3 = m.params.data() + m.off_w3();
    const double* b3 = m.params.data() + m.off_b3();

    const double keep = 1.0 - m.dropout;
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = X.row(idx[r]);
        double* h1 = c.h1.data() + r * H;
        double* k1 = c.mask1.data() + r * H;
        double* d1 = c.d1.data() + r * H;
        for (std::size_t j = 0; j < H; ++j) {
            double z = kern::dot_f64(w1 + j * d, x, d) + b1[j];
            h1[j] = z > 0.0 ? z : 0.0;
        }
        for (std::size_t j = 0; j < H; ++j)
            k1[j] = dropout_rng ? (dropout_rng->next_double() <= keep ? 1.0 / keep : 0.0) : 1.0;
        for (std::size_t j = 0; j < H; ++j) d1[j] = h1[j] * k1[j];

        double* h2 = c.h2.data() + r * H;
        double* k2 = c.mask2.data() + r * H;
        double* d2 = c.d2.data() + r * H;
        for (std::size_t j = 0; j < H; ++j) {
            double z = kern::dot_f64(w2 + j * H, d1, H) + b2[j];
            h2[j] = z > 0.0 ? z : 0.0;
        }
        for (std::size_t j = 0; j < H; ++j)
            k2[j] = dropout_rng ? (dropout_rng->next_double() <= keep ? 1.0 / keep : 0.0) : 1.0;
        for (std::size_t j = 0; j < H; ++j) d2[j] = h2[j] * k2[j];

        double* z3 = c.logits.data() + r * O;
        for (std::size_t j = 0; j < O; ++j)
            z3[j] = kern::dot_f64(w3 + j * H, d2, H) + b3[j];
    }
}

// Accumulates parameter gradients from per-record dL/dlogits.
void backward_batch(const MlpModel& m, const FeatureView& X,
                    const std::vector<std::size_t>& idx, const ForwardCache& c,
                    const std::vector<double>& dlogits, std::vector<double>& grads) {
    constexpr std::size_t H = MlpModel::kHidden;
    constexpr std::size_t O = MlpModel::kOut;
    const std::size_t n = idx.size();
    const std::size_t d = m.d_in;

    const double* w2 = m.params.data() + m.off_w2();
    const double* w3 = m.params.data() + m.off_w3();
    double* gw1 = grads.data() + m.off_w1();
    double* gb1 = grads.data() + m.off_b1();
    double* gw2 = grads.data() + m.off_w2();
    double* gb2 = grads.data() + m.off_b2();
    double* gw3 = grads.data() + m.off_w3();
    double* gb3 = grads.data() + m.off_b3();

    std::vector<double> dz2(H), dz1(H);
    for (std::size_t r = 0; r < n; ++r) {
        const double* g3 = dlogits.data() + r * O;
        const double* d2 = c.d2.data() + r * H;
        const double* d1 = c.d1.data() + r * H;
        const double* h2 = c.h2.data() + r * H;
        const double* h1 = c.h1.data() + r * H;
        const double* k2 = c.mask2.data() + r * H;
        const double* k1 = c.mask1.data() + r * H;
        const double* x = X.row(idx[r]);

        for (std::size_t j = 0; j < O; ++j) {
            gb3[j] += g3[j];
            double* row = gw3 + j * H;
            for (std::size_t i = 0; i < H; ++i) row[i] += g3[j] * d2[i];
        }
        for (std::size_t i = 0; i < H; ++i) {
            double dd2 = w3[0 * H + i] * g3[0] + w3[1 * H + i] * g3[1];
            dz2[i] = h2[i] > 0.0 ? dd2 * k2[i] : 0.0;
        }
        for (std::size_t j = 0; j < H; ++j) {
            if (dz2[j] == 0.0) continue;
            gb2[j] += dz2[j];
            double* row = gw2 + j * H;
            for (std::size_t i = 0; i < H; ++i) row[i] += dz2[j] * d1[i];
        }
        for (std::size_t i = 0; i < H; ++i) {
            double dd1 = 0.0;
            for (std::size_t j = 0; j < H; ++j) dd1 += w2[j * H + i] * dz2[j];
            dz1[i] = h1[i] > 0.0 ? dd1 * k1[i] : 0.0;
        }
        for (std::size_t j = 0; j < H; ++j) {
            if (dz1[j] == 0.0) continue;
            gb1[j] += dz1[j];
            double* row = gw1 + j * d;
            for (std::size_t i = 0; i < d; ++i) row[i] += dz1[j] * x[i];
        }
    }
}

void softmax2(const double* z, double* p) {
    double mx = z[0] > z[1] ? z[0] : z[1];
    double e0 = std::exp(z[0] - mx);
    double e1 = std::exp(z[1] - mx);
    double inv = 1.0 / (e0 + e1);
    p[0] = e0 * inv;
    p[1] = e1 * inv;
}

double ce_loss(const double* z, int label) {
    double mx = z[0] > z[1] ? z[0] : z[1];
    double lse = mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx));
    return lse - z[label];
}

}  // namespace detail

MlpModel fit(const FeatureView& X, const std::vector<int>& y,
             const std::vector<std::size_t>& idx, const TrainConfig& cfg,
             std::uint64_t init_seed, const std::string& dataset_name, ModelKind kind) {
    if (idx.empty()) throw EmptyPopulation("cannot train on an empty index set");
    MlpModel m = init_model(X.d, init_seed, dataset_name, cfg.dropout);
    m.kind = kind;

    rng::Pcg32 dropout_rng = rng::make_stream("dropout", dataset_name, init_seed);
    AdamState adam;
    detail::ForwardCache cache;
    std::vector<double> grads(m.n_params());
    std::vector<double> dlogits;
    const double inv_n = 1.0 / static_cast<double>(idx.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::forward_batch(m, X, idx, &dropout_rng, cache);
        dlogits.resize(idx.size() * MlpModel::kOut);
        double loss = 0.0;
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double* z = cache.logits.data() + r * MlpModel::kOut;
            loss += detail::ce_loss(z, y[idx[r]]);
            double p[2];
            detail::softmax2(z, p);
            dlogits[r * 2 + 0] = (p[0] - (y[idx[r]] == 0 ? 1.0 : 0.0)) * inv_n;
            dlogits[r * 2 + 1] = (p[1] - (y[idx[r]] == 1 ? 1.0 : 0.0)) * inv_n;
        }
        if (!std::isfinite(loss))
            throw NonFiniteLoss("training loss diverged at epoch " + std::to_string(epoch));
        std::fill(grads.begin(), grads.end(), 0.0);
        detail::backward_batch(m, X, idx, cache, dlogits, grads);
        adam_step(m.params, grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    }
    return m;
}

EvalMetrics evaluate(const MlpModel& m, const FeatureView& X, const std::vector<int>& y,
                     const std::vector<std::size_t>& idx) {
    detail::ForwardCache cache;
    detail::forward_batch(m, X, idx, nullptr, cache);
    EvalMetrics out;
    out.loss.reserve(idx.size());
    out.pred.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* z = cache.logits.data() + r * MlpModel::kOut;
        out.loss.push_back(detail::ce_loss(z, y[idx[r]]));
        out.pred.push_back(z[1] > z[0] ? 1 : 0);
    }
    return out;
}

embed::EmbeddingMatrix extract_embeddings(const MlpModel& m, const FeatureView& X) {
    std::vector<std::size_t> all(X.n);
    for (std::size_t r = 0; r < X.n; ++r) all[r] = r;
    detail::ForwardCache cache;
    detail::forward_batch(m, X, all, nullptr, cache);
    embed::EmbeddingMatrix e;
    e.n_records = X.n;
    e.dim = MlpModel::kHidden;
    e.data.resize(X.n * MlpModel::kHidden);
    for (std::size_t i = 0; i < e.data.size(); ++i)
        e.data[i] = static_cast<float>(cache.h2[i]);
    switch (m.kind) {
        case ModelKind::original: e.role = embed::ModelRole::original; break;
        case ModelKind::oracle: e.role = embed::ModelRole::oracle; break;
        case ModelKind::unlearned: e.role = embed::ModelRole::unlearned; break;
        case ModelKind::teacher: e.role = embed::ModelRole::external; break;
    }
    return e;
}

std::vector<double> analytic_ce_gradients(const MlpModel& m, const FeatureView& X,
                                          const std::vector<int>& y,
                                          const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw EmptyPopulation("gradient of empty batch");
    detail::ForwardCache cache;
    detail::forward_batch(m, X, idx, nullptr, cache);
    std::vector<double> dlogits(idx.size() * MlpModel::kOut);
    const double inv_n = 1.0 / static_cast<double>(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* z = cache.logits.data() + r * MlpModel::kOut;
        double p[2];
        detail::softmax2(z, p);
        dlogits[r * 2 + 0] = (p[0] - (y[idx[r]] == 0 ? 1.0 : 0.0)) * inv_n;
        dlogits[r * 2 + 1] = (p[1] - (y[idx[r]] == 1 ? 1.0 : 0.0)) * inv_n;
    }
    std::vector<double> grads(m.n_params(), 0.0);
    detail::backward_batch(m, X, idx, cache, dlogits, grads);
    return grads;
}

namespace {

double mean_ce(const MlpModel& m, const FeatureView& X, const std::vector<int>& y,
               const std::vector<std::size_t>& idx) {
    detail::ForwardCache cache;
    detail::forward_batch(m, X, idx, nullptr, cache);
    double loss = 0.0;
    for (std::size_t r = 0; r < idx.size(); ++r)
        loss += detail::ce_loss(cache.logits.data() + r * MlpModel::kOut, y[idx[r]]);
    return loss / static_cast<double>(idx.size());
}

// Bitmask of ReLU activation signs, used to detect kink crossings.
std::vector<char> activation_pattern(const MlpModel& m, const FeatureView& X,
                                     const std::vector<std::size_t>& idx) {
    detail::ForwardCache cache;
    detail::forward_batch(m, X, idx, nullptr, cache);
    std::vector<char> pattern;
    pattern.reserve(cache.h1.size() + cache.h2.size());
    for (double v : cache.h1) pattern.push_back(v > 0.0 ? 1 : 0);
    for (double v : cache.h2) pattern.push_back(v > 0.0 ? 1 : 0);
    return pattern;
}

}  // namespace

double numeric_ce_gradient(const MlpModel& model, const FeatureView& X,
                           const std::vector<int>& y, const std::vector<std::size_t>& idx,
                           std::size_t param_index, double step) {
    if (param_index >= model.params.size()) throw IndexOutOfRange("parameter index");
    MlpModel probe = model;
    probe.params[param_index] = model.params[param_index] + step;
    double up = mean_ce(probe, X, y, idx);
    probe.params[param_index] = model.params[param_index] - step;
    double down = mean_ce(probe, X, y, idx);
    return (up - down) / (2.0 * step);
}

GradCheckResult grad_check(const MlpModel& model, const FeatureView& X,
                           const std::vector<int>& y, const std::vector<std::size_t>& idx,
                           std::size_t n_samples, std::uint64_t seed) {
    constexpr double kStep = 1e-5;
    std::vector<double> analytic = analytic_ce_gradients(model, X, y, idx);
    rng::Pcg32 g = rng::make_stream("gradcheck", "", seed);
    GradCheckResult res;
    MlpModel probe = model;
    auto base_pattern = activation_pattern(model, X, idx);
    while (res.n_checked < n_samples) {
        std::size_t p = static_cast<std::size_t>(g.next_below(model.params.size()));
        bool kink = false;
        for (double s : {kStep, -kStep}) {
            probe.params[p] = model.params[p] + s;
            if (activation_pattern(probe, X, idx) != base_pattern) kink = true;
        }
        probe.params[p] = model.params[p];
        if (kink) continue;
        double numeric = numeric_ce_gradient(model, X, y, idx, p, kStep);
        double denom = std::max({std::fabs(analytic[p]), std::fabs(numeric), 1e-3});
        double rel = std::fabs(analytic[p] - numeric) / denom;
        res.max_rel_err = std::max(res.max_rel_err, rel);
        ++res.n_checked;
    }
    return res;
}

namespace {

constexpr char kMagic[4] = {'R', 'U', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void write_rulm(const std::filesystem::path& path, const MlpModel& m) {
    if (m.params.size() != m.n_params()) throw DimMismatch("parameter vector size mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileFormatError("cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, m.d_in);
    put<std::uint64_t>(out, MlpModel::kHidden);
    put<std::uint64_t>(out, MlpModel::kOut);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(m.kind));
    put<std::uint64_t>(out, m.init_seed);
    put<double>(out, m.dropout);
    put<std::uint64_t>(out, m.params.size());
    out.write(reinterpret_cast<const char*>(m.params.data()),
              static_cast<std::streamsize>(m.params.size() * sizeof(double)));
    if (!out) throw FileFormatError("short write to " + path.string());
}

MlpModel read_rulm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileFormatError("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FileFormatError(path.string() + ": bad magic");
    auto version = take<std::uint32_t>(in);
    if (version != kVersion)
        throw FileFormatError(path.string() + ": unsupported version");
    MlpModel m;
    m.d_in = take<std::uint64_t>(in);
    auto hidden = take<std::uint64_t>(in);
    auto out_dim = take<std::uint64_t>(in);
    if (hidden != MlpModel::kHidden || out_dim != MlpModel::kOut)
        throw FileFormatError(path.string() + ": layer dims do not match this build");
    auto kind = take<std::uint8_t>(in);
    if (kind > 3) throw FileFormatError(path.string() + ": bad model kind");
    m.kind = static_cast<ModelKind>(kind);
    m.init_seed = take<std::uint64_t>(in);
    m.dropout = take<double>(in);
    auto count = take<std::uint64_t>(in);
    if (m.d_in == 0 || count != m.n_params())
        throw FileFormatError(path.string() + ": parameter count mismatch");
    m.params.resize(count);
    in.read(reinterpret_cast<char*>(m.params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw FileFormatError(path.string() + ": truncated parameters");
    for (double v : m.params)
        if (!std::isfinite(v)) throw FileFormatError(path.string() + ": non-finite parameter");
    return m;
}

}  // namespace ruler::train
