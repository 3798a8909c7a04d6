#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relabel/dataset.hpp"

namespace relabel {

// Per-attribute score thresholds for binarizing continuous annotations.
// Thresholds move away from zero, so lower <= 0 <= upper always holds.
struct ThresholdPair {
    double lower = 0.0;
    double upper = 0.0;
};

// Judges whether the original annotation of a sample (polarity +1 or -1, the
// sign of its score) is correct for the given attribute. Stands in for the
// human reviewer of the cleaning protocol; must be deterministic.
using CorrectnessOracle =
    std::function<bool(const std::string& sample_id, const std::string& attribute, int polarity)>;

// score > upper -> +1, score < lower -> -1, otherwise 0 (strict inequalities).
AnnotationMatrix binarize(const ContinuousAnnotations& scores,
                          const std::vector<ThresholdPair>& thresholds);

struct ThresholdSearchConfig {
    std::size_t window = 10;           // samples inspected per candidate
    std::size_t required_correct = 9;  // acceptance bar within the window
    double quantile_step = 0.02;       // candidate grid over each side's score distribution

    void validate() const;
};

struct ThresholdSearchResult {
    bool usable = false;
    ThresholdPair thresholds;  // valid only when usable
};

// Moves a candidate threshold outward from zero on each side independently
// along that side's score quantiles. At each candidate, the `window` samples
// with scores closest to the candidate (on its side) are judged by the
// oracle; the first candidate with >= required_correct correct judgments is
// accepted. If either side exhausts its candidates the attribute is unusable.
ThresholdSearchResult search_thresholds(const ContinuousAnnotations& scores,
                                        std::size_t attribute_index, const AttributeSchema& schema,
                                        const CorrectnessOracle& oracle,
                                        const ThresholdSearchConfig& config);

// CSV `attribute,lower,upper`; unusable attributes persist with empty fields.
void save_thresholds(const std::string& path, const AttributeSchema& schema,
                     const std::vector<ThresholdSearchResult>& results,
                     const std::string& header_comment = {});
std::vector<ThresholdSearchResult> load_thresholds(const std::string& path,
                                                   const AttributeSchema& schema);

}  // namespace relabel
