#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "ruler/dataset.hpp"
#include "ruler/mlp.hpp"

namespace ruler::train {

enum class Method { ga, neggrad_plus, finetune, scrub, bad_teacher, oracle_control };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct UnlearnConfig {
    double lr = 5e-4;
    double alpha = 0.6;        // retain-term weight for the mixed objectives
    double temperature = 2.0;  // distillation temperature
    std::size_t epochs_ga = 5;
    std::size_t epochs = 10;   // every other gradient method
    std::uint64_t unlearn_seed = 100;
    std::uint64_t teacher_seed = 101;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Temperature-scaled distillation divergence for one record,
// T^2 * KL(softmax(zt/T) || softmax(zs/T)). At T=1 this is the plain KL.
double kl_at_temperature(std::span<const double> teacher_logits,
                         std::span<const double> student_logits, double temperature);

// Run one unlearning method from the original model. All methods take one
// full-batch Adam step per epoch at cfg.lr; dropout stays active on the
// student. Throws WrongStartingModel unless the input is an original model.
//
//   ga           maximise forget-set cross-entropy, epochs_ga epochs
//   neggrad_plus minimise alpha*CE(retain) - (1-alpha)*CE(forget)
//   finetune     minimise CE(retain)
//   scrub        teacher = frozen original; minimise
//                alpha*(KL_retain + CE_retain) - (1-alpha)*KL_forget
//   bad_teacher  teacher = frozen random init (teacher_seed); minimise
//                alpha*(KL_retain + CE_retain) + (1-alpha)*KL_forget
//
// oracle_control has no gradient procedure (the pipeline substitutes the
// oracle's embeddings) and is rejected here.
MlpModel unlearn(const MlpModel& original, Method method, const FeatureView& X,
                 const std::vector<int>& y, const data::PartitionSpec& part,
                 const UnlearnConfig& cfg, const std::string& dataset_name);

}  // namespace ruler::train
