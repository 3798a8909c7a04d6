#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relabel/calibration.hpp"
#include "relabel/dataset.hpp"
#include "relabel/train.hpp"

namespace relabel {

// Converts predictions into source annotations: a prediction is kept when its
// reliability reaches the attribute threshold (>=, equality keeps), otherwise
// the cell becomes 0. Discarded attributes yield all-zero columns. The output
// never flips a prediction: every cell is either the prediction or 0.
AnnotationMatrix transfer(const SourcePredictions& predictions, const CalibrationTable& table);

struct AggregationInput {
    std::string name;
    AnnotationMatrix labels;      // transferred source annotations
    Matrix reliability;           // reliabilities on the target
    CalibrationTable calibration; // supplies the map-back performance
};

struct AggregationResult {
    AnnotationMatrix labels;
    // winning source index per cell, -1 where the cell stayed 0
    std::vector<std::vector<int>> winner;
};

// Cell-wise choice among the sources' nonzero annotations: the one whose
// map-back accuracy at that cell's reliability is highest wins; ties go to the
// earlier source in the input order.
AggregationResult aggregate(const std::vector<AggregationInput>& sources,
                            const AttributeSchema& schema);

enum class PlausibilityScope {
    Class,  // zero the violating class's attributes for that sample
    Row     // zero the sample's whole annotation row
};

// Repairs exclusivity violations: wherever a (sample, class) carries more than
// one positive annotation, the affected cells are set to undefined.
AnnotationMatrix obtain_plausibility(const AnnotationMatrix& labels, const AttributeSchema& schema,
                                     PlausibilityScope scope = PlausibilityScope::Class);

struct PipelineSource {
    std::string name;
    AnnotatedDataset dataset;
    std::optional<MacModel> pretrained;  // skips training when present
};

struct PipelineConfig {
    double train_fraction = 0.8;
    std::size_t trunk_width = 512;
    std::size_t branch_width = 512;
    double dropout_rate = 0.5;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;
    TrainingConfig training;
    ReliabilityConfig reliability;
    CalibrationConfig calibration;
    PlausibilityScope plausibility_scope = PlausibilityScope::Class;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct AttributeProvenance {
    std::string attribute;
    std::string main_source;  // source that won the most cells ("-" if none)
    bool retained_anywhere = false;
    double threshold = 0.0;   // main source's calibration values
    double coverage = 0.0;
    double accuracy = 0.0;
    std::size_t transferred = 0;  // nonzero cells in the final column
};

struct PipelineResult {
    AnnotationMatrix target_labels;
    std::vector<AttributeProvenance> provenance;
    std::vector<CalibrationTable> calibrations;   // per source
    std::vector<AnnotationMatrix> source_labels;  // per source, pre-aggregation
    std::vector<TrainLog> train_logs;
};

// The full flow per source: subject-exclusive split, training (unless
// pretrained), stochastic predictions on the source test part and on the
// target, threshold calibration, transfer; then cross-source aggregation and
// the plausibility repair. All seeds derive from config.seed and the source
// name, so a command-level run with the same inputs reproduces this exactly.
PipelineResult run_pipeline(const std::vector<PipelineSource>& sources,
                            const AnnotatedDataset& target, const PipelineConfig& config);

// Per-attribute provenance from the aggregation outcome: main source by cell
// wins (ties to the earlier source), transferred counts from the repaired
// matrix.
std::vector<AttributeProvenance> build_provenance(const AggregationResult& aggregation,
                                                  const std::vector<AggregationInput>& inputs,
                                                  const AnnotationMatrix& final_labels,
                                                  const AttributeSchema& schema);

// Provenance rendering (CSV and a human-readable table).
std::string provenance_csv(const std::vector<AttributeProvenance>& rows,
                           const std::string& header_comment = {});
std::string provenance_text(const std::vector<AttributeProvenance>& rows,
                            const AttributeSchema& schema);

}  // namespace relabel
