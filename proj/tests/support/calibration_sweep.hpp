#pragma once

// Exhaustive threshold sweep oracle for calibration: tries every unique test
// reliability as a threshold, recomputing balanced accuracy and coverage from
// scratch, and returns the smallest feasible one.

#include <algorithm>
#include <optional>
#include <vector>

#include "relabel/matrix.hpp"

namespace test_support {

struct SweepChoice {
    double threshold;
    double accuracy;
    double coverage;
};

inline std::optional<SweepChoice> calibration_sweep(const std::vector<int>& predictions,
                                                    const std::vector<double>& reliability,
                                                    const std::vector<int>& truth,
                                                    const std::vector<double>& target_reliability,
                                                    double acc_min, double d_min) {
    std::vector<double> candidates = reliability;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    for (double thr : candidates) {
        std::size_t pos_total = 0, pos_ok = 0, neg_total = 0, neg_ok = 0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            if (truth[i] == 0 || reliability[i] < thr) continue;
            if (truth[i] == 1) {
                ++pos_total;
                if (predictions[i] == 1) ++pos_ok;
            } else {
                ++neg_total;
                if (predictions[i] == -1) ++neg_ok;
            }
        }
        double acc_sum = 0.0;
        int classes = 0;
        if (pos_total) acc_sum += double(pos_ok) / double(pos_total), ++classes;
        if (neg_total) acc_sum += double(neg_ok) / double(neg_total), ++classes;
        if (!classes) continue;
        const double acc = acc_sum / classes;

        std::size_t covered = 0;
        for (double r : target_reliability)
            if (r >= thr) ++covered;
        const double coverage = double(covered) / double(target_reliability.size());

        if (acc >= acc_min && coverage >= d_min) return SweepChoice{thr, acc, coverage};
    }
    return std::nullopt;
}

}  // namespace test_support
