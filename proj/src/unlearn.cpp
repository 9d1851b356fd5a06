#include "ruler/unlearn.hpp"

#include <cctype>
#include <cmath>

#include "mlp_internal.hpp"
#include "ruler/errors.hpp"

namespace ruler::train {

const char* method_name(Method m) {
    switch (m) {
        case Method::ga: return "GA";
        case Method::neggrad_plus: return "NegGrad+";
        case Method::finetune: return "FineTune";
        case Method::scrub: return "SCRUB";
        case Method::bad_teacher: return "BadTeacher";
        case Method::oracle_control: return "Oracle";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    std::string low;
    for (char c : name) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (low == "ga") return Method::ga;
    if (low == "neggrad+" || low == "neggradplus" || low == "neggrad_plus") return Method::neggrad_plus;
    if (low == "finetune" || low == "ft") return Method::finetune;
    if (low == "scrub") return Method::scrub;
    if (low == "badteacher" || low == "bad_teacher" || low == "bt") return Method::bad_teacher;
    if (low == "oracle" || low == "oracle_control") return Method::oracle_control;
    throw ConfigError("unknown unlearning method '" + name + "'");
}

double kl_at_temperature(std::span<const double> teacher_logits,
                         std::span<const double> student_logits, double temperature) {
    if (teacher_logits.size() != student_logits.size() || teacher_logits.empty())
        throw LengthMismatch("logit vectors differ in length");
    if (temperature <= 0.0) throw OutOfRange("temperature must be positive");
    auto log_softmax = [&](std::span<const double> z, std::vector<double>& out) {
        double mx = z[0];
        for (double v : z) mx = std::max(mx, v);
        double sum = 0.0;
        for (double v : z) sum += std::exp(v / temperature - mx / temperature);
        double lse = mx / temperature + std::log(sum);
        out.resize(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / temperature - lse;
    };
    std::vector<double> log_pt, log_ps;
    log_softmax(teacher_logits, log_pt);
    log_softmax(student_logits, log_ps);
    double kl = 0.0;
    for (std::size_t i = 0; i < log_pt.size(); ++i)
        kl += std::exp(log_pt[i]) * (log_pt[i] - log_ps[i]);
    return temperature * temperature * kl;
}

namespace {

// Eval-mode logits of a frozen model over an index set; computed once since
// the teacher never changes during unlearning.
std::vector<double> frozen_logits(const MlpModel& m, const FeatureView& X,
                                  const std::vector<std::size_t>& idx) {
    detail::ForwardCache cache;
    detail::forward_batch(m, X, idx, nullptr, cache);
    return std::move(cache.logits);
}

void softmax_t(const double* z, double temperature, double* p) {
    double s0 = z[0] / temperature, s1 = z[1] / temperature;
    double zz[2] = {s0, s1};
    detail::softmax2(zz, p);
}

struct EpochTerms {
    std::vector<double> dlogits;
    double loss = 0.0;
};

// dL/dlogits for a weighted mix of cross-entropy against labels and
// temperature-scaled distillation against fixed teacher logits:
//   ce_w * CE(batch) + kl_w * T^2 * KL(teacher || student)
// both averaged over the batch.
EpochTerms mixed_dlogits(const detail::ForwardCache& cache, const std::vector<int>& y,
                         const std::vector<std::size_t>& idx,
                         const std::vector<double>* teacher_logits, double temperature,
                         double ce_w, double kl_w) {
    const std::size_t n = idx.size();
    EpochTerms out;
    out.dlogits.assign(n * 2, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* z = cache.logits.data() + r * 2;
        double* g = out.dlogits.data() + r * 2;
        if (ce_w != 0.0) {
            double p[2];
            detail::softmax2(z, p);
            int label = y[idx[r]];
            g[0] += ce_w * (p[0] - (label == 0 ? 1.0 : 0.0)) * inv_n;
            g[1] += ce_w * (p[1] - (label == 1 ? 1.0 : 0.0)) * inv_n;
            out.loss += ce_w * detail::ce_loss(z, label) * inv_n;
        }
        if (kl_w != 0.0) {
            const double* zt = teacher_logits->data() + r * 2;
            double ps[2], pt[2];
            softmax_t(z, temperature, ps);
            softmax_t(zt, temperature, pt);
            g[0] += kl_w * temperature * (ps[0] - pt[0]) * inv_n;
            g[1] += kl_w * temperature * (ps[1] - pt[1]) * inv_n;
            out.loss += kl_w * kl_at_temperature({zt, 2}, {z, 2}, temperature) * inv_n;
        }
    }
    return out;
}

}  // namespace

MlpModel unlearn(const MlpModel& original, Method method, const FeatureView& X,
                 const std::vector<int>& y, const data::PartitionSpec& part,
                 const UnlearnConfig& cfg, const std::string& dataset_name) {
    if (method == Method::oracle_control)
        throw OutOfRange("the oracle control has no gradient procedure");
    if (original.kind != ModelKind::original)
        throw WrongStartingModel("unlearning must start from the original model");
    if (part.forget.empty()) throw EmptyForgetSet("empty forget set");
    if (part.retain.empty()) throw EmptyRetainSet("empty retain set");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw OutOfRange("alpha outside (0,1)");

    MlpModel student = original;
    student.kind = ModelKind::unlearned;

    const bool uses_retain = method != Method::ga;
    const bool uses_teacher = method == Method::scrub || method == Method::bad_teacher;
    std::vector<double> teacher_retain, teacher_forget;
    if (uses_teacher) {
        MlpModel teacher = method == Method::scrub
                               ? original
                               : init_model(X.d, cfg.teacher_seed, dataset_name, original.dropout);
        teacher.kind = ModelKind::teacher;
        teacher_retain = frozen_logits(teacher, X, part.retain);
        teacher_forget = frozen_logits(teacher, X, part.forget);
    }

    const std::size_t epochs = method == Method::ga ? cfg.epochs_ga : cfg.epochs;
    rng::Pcg32 dropout_rng = rng::make_stream("unlearn-dropout", dataset_name, cfg.unlearn_seed);
    AdamState adam;
    std::vector<double> grads(student.n_params());
    detail::ForwardCache retain_cache, forget_cache;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::fill(grads.begin(), grads.end(), 0.0);
        double loss = 0.0;

        if (uses_retain) {
            detail::forward_batch(student, X, part.retain, &dropout_rng, retain_cache);
            double ce_w = 0.0, kl_w = 0.0;
            switch (method) {
                case Method::neggrad_plus: ce_w = cfg.alpha; break;
                case Method::finetune: ce_w = 1.0; break;
                case Method::scrub:
                case Method::bad_teacher: ce_w = cfg.alpha; kl_w = cfg.alpha; break;
                default: break;
            }
            EpochTerms t = mixed_dlogits(retain_cache, y, part.retain,
                                         uses_teacher ? &teacher_retain : nullptr,
                                         cfg.temperature, ce_w, kl_w);
            detail::backward_batch(student, X, part.retain, retain_cache, t.dlogits, grads);
            loss += t.loss;
        }

        if (method != Method::finetune) {
            detail::forward_batch(student, X, part.forget, &dropout_rng, forget_cache);
            double ce_w = 0.0, kl_w = 0.0;
            switch (method) {
                case Method::ga: ce_w = -1.0; break;
                case Method::neggrad_plus: ce_w = -(1.0 - cfg.alpha); break;
                case Method::scrub: kl_w = -(1.0 - cfg.alpha); break;
                case Method::bad_teacher: kl_w = 1.0 - cfg.alpha; break;
                default: break;
            }
            EpochTerms t = mixed_dlogits(forget_cache, y, part.forget,
                                         uses_teacher ? &teacher_forget : nullptr,
                                         cfg.temperature, ce_w, kl_w);
            detail::backward_batch(student, X, part.forget, forget_cache, t.dlogits, grads);
            loss += t.loss;
        }

        if (!std::isfinite(loss))
            throw NonFiniteLoss("unlearning loss diverged at epoch " + std::to_string(epoch));
        adam_step(student.params, grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    }
    return student;
}

}  // namespace ruler::train
