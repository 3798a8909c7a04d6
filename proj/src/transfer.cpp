#include "relabel/transfer.hpp"

#include <algorithm>
#include <cstdio>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"
#include "relabel/split.hpp"

namespace relabel {

AnnotationMatrix transfer(const SourcePredictions& predictions, const CalibrationTable& table) {
    const std::size_t n = predictions.p.rows;
    const std::size_t num_attrs = predictions.p.cols;
    if (predictions.r.rows != n || predictions.r.cols != num_attrs)
        throw_data("transfer: prediction and reliability shapes differ");
    if (table.attributes.size() != num_attrs)
        throw_data("transfer: calibration table does not match attribute count");

    AnnotationMatrix out(n, num_attrs);
    for (std::size_t a = 0; a < num_attrs; ++a) {
        if (!table.retained(a)) continue;  // whole column stays 0
        const double thr = table.attributes[a].threshold;
        for (std::size_t i = 0; i < n; ++i)
            if (predictions.r.at(i, a) >= thr) out.set(i, a, predictions.p.at(i, a));
    }
    return out;
}

AggregationResult aggregate(const std::vector<AggregationInput>& sources,
                            const AttributeSchema& schema) {
    if (sources.empty()) throw_stage("aggregate: no sources");
    const std::size_t num_attrs = schema.size();
    const std::size_t n = sources[0].labels.rows;
    for (const AggregationInput& src : sources) {
        if (src.labels.cols != num_attrs || src.calibration.attributes.size() != num_attrs)
            throw_data("aggregate: source '" + src.name + "' does not match the schema");
        if (src.labels.rows != n || src.reliability.rows != n || src.reliability.cols != num_attrs)
            throw_data("aggregate: source '" + src.name + "' shape mismatch");
    }

    AggregationResult result;
    result.labels = AnnotationMatrix(n, num_attrs);
    result.winner.assign(num_attrs, std::vector<int>(n, -1));

    for (std::size_t a = 0; a < num_attrs; ++a) {
        for (std::size_t i = 0; i < n; ++i) {
            int best = -1;
            double best_acc = 0.0;
            for (std::size_t s = 0; s < sources.size(); ++s) {
                if (sources[s].labels.at(i, a) == 0) continue;
                const double acc =
                    sources[s].calibration.map_back(a, sources[s].reliability.at(i, a));
                // strict > keeps the earlier source on ties
                if (best < 0 || acc > best_acc) {
                    best = static_cast<int>(s);
                    best_acc = acc;
                }
            }
            if (best >= 0) {
                result.labels.set(i, a, sources[best].labels.at(i, a));
                result.winner[a][i] = best;
            }
        }
    }
    return result;
}

AnnotationMatrix obtain_plausibility(const AnnotationMatrix& labels, const AttributeSchema& schema,
                                     PlausibilityScope scope) {
    if (labels.cols != schema.size()) throw_data("obtain_plausibility: schema mismatch");
    AnnotationMatrix out = labels;
    for (std::size_t i = 0; i < labels.rows; ++i) {
        bool row_violated = false;
        for (const auto& group : schema.class_groups()) {
            int positives = 0;
            for (std::size_t a : group)
                if (labels.at(i, a) == 1) ++positives;
            if (positives <= 1) continue;
            row_violated = true;
            if (scope == PlausibilityScope::Class)
                for (std::size_t a : group) out.set(i, a, 0);
        }
        if (scope == PlausibilityScope::Row && row_violated)
            for (std::size_t a = 0; a < labels.cols; ++a) out.set(i, a, 0);
    }
    return out;
}

PipelineResult run_pipeline(const std::vector<PipelineSource>& sources,
                            const AnnotatedDataset& target, const PipelineConfig& config) {
    if (sources.empty()) throw_stage("pipeline: empty source list");
    config.calibration.validate();
    config.reliability.validate();
    const AttributeSchema& schema = target.schema;
    for (const PipelineSource& src : sources) {
        if (!src.dataset.schema.same_layout(schema))
            throw_data("pipeline: source '" + src.name + "' schema conflicts with the target schema");
        if (src.dataset.dim() != target.dim())
            throw_data("pipeline: source '" + src.name + "' embedding dimension differs from target");
    }

    PipelineResult result;
    std::vector<AggregationInput> agg_inputs;

    for (const PipelineSource& src : sources) {
        // (1) train on the source training part
        MacModel model;
        TrainLog log;
        const SubjectSplit split =
            split_subject_exclusive(src.dataset, config.train_fraction,
                                    derive_seed(config.seed, "split:" + src.name));
        if (src.pretrained) {
            model = *src.pretrained;
            if (!model.config.schema.same_layout(schema))
                throw_data("pipeline: pretrained model for '" + src.name + "' schema mismatch");
        } else {
            MacConfig mac_cfg;
            mac_cfg.input_dim = src.dataset.dim();
            mac_cfg.trunk_width = config.trunk_width;
            mac_cfg.branch_width = config.branch_width;
            mac_cfg.dropout_rate = config.dropout_rate;
            mac_cfg.bn_epsilon = config.bn_epsilon;
            mac_cfg.bn_momentum = config.bn_momentum;
            mac_cfg.schema = schema;
            model = init_model(mac_cfg, derive_seed(config.seed, "init:" + src.name));
            TrainingConfig tc = config.training;
            tc.seed = derive_seed(config.seed, "train:" + src.name);
            const auto tr = train_indices(src.dataset, split);
            log = mac_train(model, subset(src.dataset, tr), tc);
        }
        result.train_logs.push_back(std::move(log));

        // (2) predictions + reliabilities on the source test part
        const auto te = test_indices(src.dataset, split);
        const AnnotatedDataset test_part = subset(src.dataset, te);
        const SourcePredictions test_pred = predict_with_reliability(
            model, test_part.embeddings, config.reliability,
            derive_seed(config.seed, "mc-test:" + src.name), config.workers);

        // (4) predictions + reliabilities on the target
        const SourcePredictions target_pred = predict_with_reliability(
            model, target.embeddings, config.reliability,
            derive_seed(config.seed, "mc-target:" + src.name), config.workers);

        // (3) reliability thresholds and the performance mapping
        CalibrationTable table = calibrate(test_pred.p, test_pred.r, test_part.annotations,
                                           target_pred.r, config.calibration);

        // (4b) reject target predictions below the attribute threshold
        AnnotationMatrix labels = transfer(target_pred, table);
        result.source_labels.push_back(labels);
        result.calibrations.push_back(table);
        agg_inputs.push_back({src.name, std::move(labels), target_pred.r, std::move(table)});
    }

    // (5) aggregate across sources, then repair exclusivity violations
    const AggregationResult agg = aggregate(agg_inputs, schema);
    result.target_labels = obtain_plausibility(agg.labels, schema, config.plausibility_scope);
    result.provenance = build_provenance(agg, agg_inputs, result.target_labels, schema);
    return result;
}

std::vector<AttributeProvenance> build_provenance(const AggregationResult& aggregation,
                                                  const std::vector<AggregationInput>& inputs,
                                                  const AnnotationMatrix& final_labels,
                                                  const AttributeSchema& schema) {
    std::vector<AttributeProvenance> provenance;
    for (std::size_t a = 0; a < schema.size(); ++a) {
        AttributeProvenance row;
        row.attribute = schema.attribute(a).name;
        std::vector<std::size_t> wins(inputs.size(), 0);
        for (int w : aggregation.winner[a])
            if (w >= 0) ++wins[static_cast<std::size_t>(w)];
        std::size_t best = 0;
        bool any = false;
        for (std::size_t s = 0; s < inputs.size(); ++s) {
            if (wins[s] > 0) any = true;
            if (wins[s] > wins[best]) best = s;
        }
        for (const AggregationInput& input : inputs)
            if (input.calibration.retained(a)) row.retained_anywhere = true;
        if (any) {
            row.main_source = inputs[best].name;
            const AttributeCalibration& cal = inputs[best].calibration.attributes[a];
            row.threshold = cal.threshold;
            row.coverage = cal.coverage;
            row.accuracy = cal.accuracy;
        } else {
            row.main_source = "-";
        }
        for (std::size_t i = 0; i < final_labels.rows; ++i)
            if (final_labels.at(i, a) != 0) ++row.transferred;
        provenance.push_back(std::move(row));
    }
    return provenance;
}

std::string provenance_csv(const std::vector<AttributeProvenance>& rows,
                           const std::string& header_comment) {
    std::string out = header_comment;
    out += "attribute,main_source,status,threshold,coverage,balanced_accuracy,transferred\n";
    for (std::size_t a = 0; a < rows.size(); ++a) {
        const AttributeProvenance& row = rows[a];
        out += row.attribute;
        out += ',' + row.main_source;
        out += ',';
        out += row.retained_anywhere ? "retained" : "discarded";
        if (row.main_source != "-") {
            out += ',' + csv::format_double(row.threshold);
            out += ',' + csv::format_double(row.coverage);
            out += ',' + csv::format_double(row.accuracy);
        } else {
            out += ",,,";
        }
        out += ',' + std::to_string(row.transferred);
        out += '\n';
    }
    return out;
}

std::string provenance_text(const std::vector<AttributeProvenance>& rows,
                            const AttributeSchema& schema) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-12s %-14s %-18s %-22s %10s %10s %10s %12s\n",
                  "Main source", "Category", "Class", "Attribute", "Threshold", "Coverage",
                  "Accuracy", "Transferred");
    out += line;
    out += std::string(114, '-') + "\n";
    for (std::size_t a = 0; a < rows.size(); ++a) {
        const AttributeProvenance& row = rows[a];
        const AttributeSpec& spec = schema.attribute(a);
        if (row.main_source != "-") {
            std::snprintf(line, sizeof(line), "%-12s %-14s %-18s %-22s %10.4f %10.4f %10.4f %12zu\n",
                          row.main_source.c_str(), spec.category.c_str(), spec.class_name.c_str(),
                          spec.name.c_str(), row.threshold, row.coverage, row.accuracy,
                          row.transferred);
        } else {
            std::snprintf(line, sizeof(line), "%-12s %-14s %-18s %-22s %10s %10s %10s %12zu\n", "-",
                          spec.category.c_str(), spec.class_name.c_str(), spec.name.c_str(), "-",
                          "-", "-", row.transferred);
        }
        out += line;
    }
    return out;
}

}  // namespace relabel
