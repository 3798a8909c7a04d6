#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "relabel/dataset.hpp"

namespace relabel {

// Binary comparison encoding of two tri-state annotation rows: three slots
// per attribute for (both true, both false, defined-and-different). A side
// that is undefined leaves all three slots 0.
struct JointFeature {
    std::vector<std::uint8_t> slots;  // length 3 * num_attributes
};

JointFeature joint_features(std::span<const std::int8_t> ref, std::span<const std::int8_t> probe);

// Number of attributes defined (!= 0) in both rows.
std::size_t overlap_count(std::span<const std::int8_t> ref, std::span<const std::int8_t> probe);

// s = 1 - (#disagreeing attributes) / num_attributes. The literal variant
// instead counts every set slot over num_attributes (kept behind the flag;
// it is constant for fully annotated pairs and exists for comparison only).
double hamming_score(const JointFeature& feature, std::size_t num_attributes,
                     bool literal = false);

struct ComparisonPair {
    std::size_t ref_index = 0;
    std::size_t probe_index = 0;
    std::size_t overlap = 0;
    bool genuine = false;
};

// Keeps pairs with overlap >= min_overlap.
std::vector<ComparisonPair> valid_filter(std::vector<ComparisonPair> pairs,
                                         std::size_t min_overlap = 10);

// Linear comparator over joint features: sigmoid(w . x + b).
struct LogRegComparator {
    std::vector<double> weights;  // length 3 * num_attributes
    double bias = 0.0;
    std::size_t num_attributes = 0;
    std::size_t genuine_pairs = 0;
    std::size_t imposter_pairs = 0;
    std::uint64_t seed = 0;
};

struct PairSamplingConfig {
    std::size_t min_overlap = 10;
    std::size_t genuine_cap_per_subject = 50;
    double imposter_ratio = 1.0;   // imposters per genuine pair
    std::size_t epochs = 200;
    double learning_rate = 0.05;
    double l2 = 1e-4;

    void validate() const;
};

// Genuine pairs are all same-subject valid pairs (capped per subject);
// imposters are sampled to the configured ratio. Fit by full-batch gradient
// descent on L2-penalized logistic loss; deterministic per seed.
LogRegComparator train_logreg(const AnnotatedDataset& trainset, const PairSamplingConfig& config,
                              std::uint64_t seed);

double logreg_score(const LogRegComparator& comparator, const JointFeature& feature);

// Scoring callback over two annotation rows; used by the evaluation drivers.
using PairScorer =
    std::function<double(std::span<const std::int8_t>, std::span<const std::int8_t>)>;

PairScorer hamming_scorer(std::size_t num_attributes, bool literal = false);
PairScorer logreg_scorer(const LogRegComparator& comparator);

// Signed weights per attribute, grouped by slot type. Positive supports a
// genuine decision, negative an imposter decision.
struct AttributeImportance {
    std::vector<double> true_true;
    std::vector<double> false_false;
    std::vector<double> differ;
};

AttributeImportance attribute_importance(const LogRegComparator& comparator,
                                         const AttributeSchema& schema);

std::string importance_csv(const AttributeImportance& importance, const AttributeSchema& schema,
                           const std::string& header_comment = {});

// Comparator persistence (JSON).
void save_comparator(const std::string& path, const LogRegComparator& comparator,
                     const AttributeSchema& schema);
LogRegComparator load_comparator(const std::string& path, const AttributeSchema& schema);

}  // namespace relabel
