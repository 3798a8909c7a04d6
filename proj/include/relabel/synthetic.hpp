#pragma once

#include <cstdint>
#include <vector>

#include "relabel/dataset.hpp"

namespace relabel {

// Controls the synthetic world used by the acceptance tests and the
// `generate` command. Every dataset (sources and target) is drawn from the
// same generative process: per-subject latent attribute vectors, embeddings
// that encode each attribute along a fixed random direction with the given
// class separation, and observed annotations corrupted at the requested
// noise/undefined rates. The uncorrupted truth is returned separately.
struct SyntheticSpec {
    std::size_t num_sources = 2;
    std::size_t subjects_per_dataset = 50;
    std::size_t samples_per_subject = 10;
    std::size_t embedding_dim = 32;
    AttributeSchema schema;
    std::vector<double> separation;   // per attribute; size 1 broadcasts
    double annotation_noise = 0.0;    // probability an observed label is flipped
    double undefined_rate = 0.0;      // probability an observed label is dropped to 0
    double embedding_noise = 1.0;     // stddev of per-sample isotropic noise

    void validate() const;
};

struct SyntheticData {
    std::vector<AnnotatedDataset> sources;        // observed (noisy) annotations
    std::vector<AnnotationMatrix> source_truths;  // uncorrupted source annotations
    AnnotatedDataset target;                      // annotations all-undefined
    AnnotationMatrix target_truth;                // hidden ground truth for the target
};

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// attr_00..attr_{n-1}, each binary in its own class, category "synthetic".
AttributeSchema default_synthetic_schema(std::size_t num_attributes);

}  // namespace relabel
