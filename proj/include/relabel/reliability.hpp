#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relabel/mac.hpp"
#include "relabel/matrix.hpp"

namespace relabel {

struct ReliabilityConfig {
    std::size_t num_passes = 100;  // m
    double alpha = 0.5;            // weight between centrality and dispersion

    void validate() const;
};

// rel(x) = (1-alpha)/m * sum(x_i) - alpha/m^2 * sum_ij |x_i - x_j|.
// The pairwise term uses the sorted-order identity (Gini mean difference),
// O(m log m). reliability_reference evaluates the double sum literally and is
// kept as the test oracle.
double reliability(std::span<const double> x, double alpha);
double reliability_reference(std::span<const double> x, double alpha);

// Stochastic forward passes for one sample: m dropout patterns, the predicted
// class from the mean softmax row (ties toward the higher class index, i.e.
// False for binary attributes), and the per-pass probabilities of that class.
struct StochasticOutputs {
    std::vector<Matrix> pass_probs;            // per attribute: m x num_classes
    std::vector<std::size_t> predicted_class;  // per attribute
    std::vector<std::vector<double>> x;        // per attribute: m values
};

StochasticOutputs stochastic_passes(const MacModel& model, std::span<const double> embedding,
                                    std::size_t num_passes, Rng& rng);

// Predictions p in {+1,-1} and reliabilities r for a whole dataset. Each
// sample draws its dropout masks from an independently derived seed, so the
// result is identical for any worker count.
struct SourcePredictions {
    AnnotationMatrix p;
    Matrix r;
};

SourcePredictions predict_with_reliability(const MacModel& model, const Matrix& embeddings,
                                           const ReliabilityConfig& config, std::uint64_t seed,
                                           int workers = 1);

}  // namespace relabel
