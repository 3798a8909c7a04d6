#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "relabel/dataset.hpp"

namespace relabel {

// Subject-exclusive train/test partition. Deterministic: subjects are sorted,
// then permuted by a seeded shuffle, so the split is independent of file row
// order and reproducible from (seed, train_fraction).
struct SubjectSplit {
    std::vector<std::string> train_subjects;
    std::vector<std::string> test_subjects;
    std::uint64_t seed = 0;
    double train_fraction = 0.0;

    std::unordered_set<std::string> train_set() const {
        return {train_subjects.begin(), train_subjects.end()};
    }
};

// First ceil(train_fraction * S) shuffled subjects go to train. Errors if the
// dataset has fewer than two subjects or if either side would be empty.
SubjectSplit split_subject_exclusive(const AnnotatedDataset& dataset, double train_fraction,
                                     std::uint64_t seed);

std::vector<std::size_t> train_indices(const AnnotatedDataset& dataset, const SubjectSplit& split);
std::vector<std::size_t> test_indices(const AnnotatedDataset& dataset, const SubjectSplit& split);

void save_split(const std::string& path, const SubjectSplit& split,
                const std::string& header_comment = {});
SubjectSplit load_split(const std::string& path);

}  // namespace relabel
