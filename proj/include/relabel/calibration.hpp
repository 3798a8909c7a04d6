#pragma once

#include <string>
#include <vector>

#include "relabel/matrix.hpp"
#include "relabel/reliability.hpp"
#include "relabel/schema.hpp"

namespace relabel {

struct CalibrationConfig {
    double acc_min = 0.90;  // balanced-accuracy floor on retained test predictions
    double d_min = 0.50;    // minimum fraction of target samples above the threshold

    void validate() const;
};

enum class CalibrationStatus {
    Retained,
    DiscardedInsufficientTruth,   // fewer than 2 defined test truths in some class
    DiscardedNoFeasibleThreshold  // no candidate satisfies both constraints
};

const char* to_string(CalibrationStatus status);

struct AccMapPoint {
    double reliability;
    double accuracy;  // balanced accuracy of test predictions with r >= reliability
};

struct AttributeCalibration {
    CalibrationStatus status = CalibrationStatus::DiscardedNoFeasibleThreshold;
    double threshold = 0.0;
    double coverage = 0.0;  // target fraction at the chosen threshold
    double accuracy = 0.0;  // balanced accuracy at the chosen threshold
    std::vector<AccMapPoint> acc_map;  // ascending reliability support
};

// Per-attribute reliability thresholds plus the acc(r) step function.
struct CalibrationTable {
    std::vector<AttributeCalibration> attributes;  // schema order

    bool retained(std::size_t attribute) const {
        return attributes[attribute].status == CalibrationStatus::Retained;
    }

    // Balanced accuracy of test predictions with reliability >= r; r outside
    // the observed support clamps to the nearest endpoint. Discarded
    // attributes have no mapping.
    double map_back(std::size_t attribute, double r) const;
};

// Candidate thresholds are the sorted unique test reliabilities; the smallest
// one meeting both constraints wins (maximizing coverage subject to accuracy).
// Rows with undefined test truth never enter the accuracy, but their
// reliabilities still act as candidates.
CalibrationTable calibrate(const AnnotationMatrix& test_predictions, const Matrix& test_reliability,
                           const AnnotationMatrix& test_truth, const Matrix& target_reliability,
                           const CalibrationConfig& config);

// CSV `attribute,threshold,coverage,balanced_accuracy,status` plus a companion
// acc-map CSV `attribute,reliability,balanced_accuracy`.
void save_calibration(const std::string& path, const std::string& accmap_path,
                      const AttributeSchema& schema, const CalibrationTable& table,
                      const std::string& header_comment = {});
CalibrationTable load_calibration(const std::string& path, const std::string& accmap_path,
                                  const AttributeSchema& schema);

}  // namespace relabel
