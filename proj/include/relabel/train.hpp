#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relabel/dataset.hpp"
#include "relabel/mac.hpp"

namespace relabel {

struct TrainingConfig {
    std::size_t epochs = 200;
    double learning_rate = 1e-3;
    double lr_decay = -1.0;  // < 0 means the default: learning_rate / epochs
    double lr_floor_fraction = 0.1;
    std::size_t batch_size = 1024;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    double decay() const { return lr_decay < 0.0 ? learning_rate / static_cast<double>(epochs) : lr_decay; }
};

struct TrainLog {
    std::vector<double> epoch_loss;  // mean per-batch multi-task loss
    std::vector<std::string> skipped_attributes;  // zero defined training labels
};

// Gradients of all trainable parameters, mirroring parameter_blocks order.
struct BranchGradients {
    Matrix hidden_weight;
    std::vector<double> hidden_bias, bn_gamma, bn_beta;
    Matrix output_weight;
    std::vector<double> output_bias;
};

struct MacGradients {
    Matrix trunk_weight;
    std::vector<double> trunk_bias, bn_gamma, bn_beta;
    std::vector<BranchGradients> branches;

    static MacGradients zeros_like(const MacModel& model);
    std::vector<std::span<double>> blocks();
};

// Batch statistics observed during a training-mode forward pass; used to
// update the model's running batch-norm statistics.
struct BnBatchStats {
    std::vector<double> trunk_mean, trunk_var;
    std::vector<std::vector<double>> branch_mean, branch_var;
};

// One training-mode forward/backward pass. The loss is the unweighted sum over
// attributes of the mean cross-entropy over that attribute's defined samples
// in the batch; rows with annotation 0 do not contribute to that attribute.
// Dropout masks are drawn from mask_seed, so the loss is a deterministic and
// differentiable function of the parameters for a fixed seed.
double mac_loss_and_gradients(const MacModel& model, const Matrix& inputs,
                              const AnnotationMatrix& labels, std::uint64_t mask_seed,
                              MacGradients* grads, BnBatchStats* stats = nullptr);

// Adam with a per-epoch linearly decayed learning rate, floored at
// lr_floor_fraction * learning_rate. Shuffling and dropout are seeded.
TrainLog mac_train(MacModel& model, const AnnotatedDataset& trainset,
                   const TrainingConfig& config);

void save_train_log(const std::string& path, const TrainLog& log,
                    const std::string& header_comment = {});

}  // namespace relabel
