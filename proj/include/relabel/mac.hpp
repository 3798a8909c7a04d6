#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relabel/matrix.hpp"
#include "relabel/rng.hpp"
#include "relabel/schema.hpp"

namespace relabel {

// Shared-trunk multi-branch attribute classifier. One dense trunk layer feeds
// a two-layer branch per attribute; batch normalization sits before each ReLU
// and dropout follows it. The softmax output layer carries neither.
struct MacConfig {
    std::size_t input_dim = 0;
    std::size_t trunk_width = 512;
    std::size_t branch_width = 512;
    double dropout_rate = 0.5;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;
    AttributeSchema schema;

    void validate() const;
};

struct DenseLayer {
    Matrix weight;  // [in x out]
    std::vector<double> bias;
};

struct BatchNorm {
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;  // frozen at inference
};

struct Branch {
    DenseLayer hidden;
    BatchNorm hidden_bn;
    DenseLayer output;  // [branch_width x num_classes], softmax activation
};

struct MacModel {
    MacConfig config;
    DenseLayer trunk;
    BatchNorm trunk_bn;
    std::vector<Branch> branches;  // one per schema attribute
};

// Fan-in-scaled (He) initialization, zero biases, identity batch norm.
// Deterministic per seed.
MacModel init_model(const MacConfig& config, std::uint64_t seed);

// Trainable parameters in serialization order. Batch-norm running statistics
// are not trainable and are not included.
std::vector<std::span<double>> parameter_blocks(MacModel& model);
std::vector<std::span<const double>> parameter_blocks(const MacModel& model);
std::size_t parameter_count(const MacModel& model);

enum class ForwardMode {
    Deterministic,  // dropout off, running batch-norm statistics
    Stochastic      // fresh dropout masks from rng, running batch-norm statistics
};

// Per-attribute softmax probabilities, each [batch x num_classes]. Stochastic
// mode requires an rng when dropout_rate > 0; masks are drawn trunk first,
// then branches in schema order, row-major.
std::vector<Matrix> mac_forward(const MacModel& model, const Matrix& inputs, ForwardMode mode,
                                Rng* rng = nullptr);

struct DeterministicPrediction {
    AnnotationMatrix labels;  // +1 / -1 per binary attribute
    Matrix confidence;        // softmax probability of the predicted class
};

// Argmax prediction over binary attributes; exact ties resolve to -1.
DeterministicPrediction mac_predict(const MacModel& model, const Matrix& embeddings);

}  // namespace relabel
