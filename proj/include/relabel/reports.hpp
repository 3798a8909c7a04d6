#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relabel/matrix.hpp"
#include "relabel/schema.hpp"

namespace relabel {

// Per-attribute positive/negative/undefined shares plus the defined-per-sample
// distribution.
struct StatsReport {
    struct Row {
        double positive_pct, negative_pct, undefined_pct;
    };
    std::vector<Row> attributes;  // schema order
    Row total;
    double mean_defined_per_sample = 0.0;
    double stddev_defined_per_sample = 0.0;  // population stddev
    std::size_t num_samples = 0;
};

StatsReport compute_stats(const AnnotationMatrix& annotations, const AttributeSchema& schema);

std::string stats_csv(const StatsReport& report, const AttributeSchema& schema,
                      const std::string& header_comment = {});
std::string stats_text(const StatsReport& report, const AttributeSchema& schema);

// Accuracy/precision/recall of predicted annotations against a ground-truth
// matrix, computed only over cells defined in both.
struct QualityReport {
    struct Row {
        bool defined = false;  // any jointly defined cell
        double accuracy = 0.0;
        double precision = 0.0;  // TP/(TP+FP); NaN-free: undefined -> row N/A
        bool precision_defined = false;
        double recall = 0.0;  // TP/(TP+FN)
        bool recall_defined = false;
        double balanced_accuracy = 0.0;
        std::size_t support = 0;  // jointly defined cells
    };
    std::vector<Row> attributes;  // schema order
    Row total;                    // pooled over all cells
};

QualityReport evaluate_labels(const AnnotationMatrix& predicted, const AnnotationMatrix& truth,
                              const AttributeSchema& schema);

std::string quality_csv(const QualityReport& report, const AttributeSchema& schema,
                        const std::string& header_comment = {});
std::string quality_text(const QualityReport& report, const AttributeSchema& schema);

}  // namespace relabel
