#include "relabel/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"

namespace relabel {

void CalibrationConfig::validate() const {
    if (!(acc_min > 0.0 && acc_min <= 1.0)) throw_config("calibration: acc_min must be in (0,1]");
    if (!(d_min > 0.0 && d_min <= 1.0)) throw_config("calibration: d_min must be in (0,1]");
}

const char* to_string(CalibrationStatus status) {
    switch (status) {
        case CalibrationStatus::Retained: return "retained";
        case CalibrationStatus::DiscardedInsufficientTruth: return "discarded(insufficient-truth)";
        case CalibrationStatus::DiscardedNoFeasibleThreshold:
            return "discarded(no-feasible-threshold)";
    }
    return "unknown";
}

double CalibrationTable::map_back(std::size_t attribute, double r) const {
    const AttributeCalibration& cal = attributes.at(attribute);
    if (cal.status != CalibrationStatus::Retained)
        throw_data("map_back: attribute index " + std::to_string(attribute) + " was discarded");
    const auto& map = cal.acc_map;
    // smallest support point >= r defines the tail; clamp outside the support
    auto it = std::lower_bound(map.begin(), map.end(), r,
                               [](const AccMapPoint& p, double v) { return p.reliability < v; });
    if (it == map.end()) return map.back().accuracy;
    return it->accuracy;
}

namespace {

struct TestRow {
    double reliability;
    int truth;    // +1 / -1, defined rows only
    bool correct;
};

// Balanced accuracy over rows with reliability >= threshold: mean of per-class
// recalls over the truth classes present in the tail. Returns -1 when the tail
// holds no defined rows.
double tail_balanced_accuracy(const std::vector<TestRow>& rows, double threshold) {
    std::size_t pos_total = 0, pos_correct = 0, neg_total = 0, neg_correct = 0;
    for (const TestRow& row : rows) {
        if (row.reliability < threshold) continue;
        if (row.truth == 1) {
            ++pos_total;
            if (row.correct) ++pos_correct;
        } else {
            ++neg_total;
            if (row.correct) ++neg_correct;
        }
    }
    double sum = 0.0;
    int classes = 0;
    if (pos_total) {
        sum += static_cast<double>(pos_correct) / static_cast<double>(pos_total);
        ++classes;
    }
    if (neg_total) {
        sum += static_cast<double>(neg_correct) / static_cast<double>(neg_total);
        ++classes;
    }
    return classes ? sum / classes : -1.0;
}

}  // namespace

CalibrationTable calibrate(const AnnotationMatrix& test_predictions, const Matrix& test_reliability,
                           const AnnotationMatrix& test_truth, const Matrix& target_reliability,
                           const CalibrationConfig& config) {
    config.validate();
    const std::size_t n = test_predictions.rows;
    const std::size_t num_attrs = test_predictions.cols;
    if (test_reliability.rows != n || test_reliability.cols != num_attrs ||
        test_truth.rows != n || test_truth.cols != num_attrs)
        throw_data("calibrate: test matrices must share one shape");
    if (target_reliability.cols != num_attrs)
        throw_data("calibrate: target reliability attribute count mismatch");
    if (n == 0) throw_data("calibrate: empty test set");
    if (target_reliability.rows == 0) throw_data("calibrate: empty target set");

    CalibrationTable table;
    table.attributes.resize(num_attrs);

    for (std::size_t a = 0; a < num_attrs; ++a) {
        AttributeCalibration& cal = table.attributes[a];

        std::vector<TestRow> rows;
        std::size_t pos_truth = 0, neg_truth = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const int truth = test_truth.at(i, a);
            if (truth == 0) continue;
            (truth == 1 ? pos_truth : neg_truth)++;
            rows.push_back({test_reliability.at(i, a), truth,
                            test_predictions.at(i, a) == truth});
        }
        if (pos_truth < 2 || neg_truth < 2) {
            cal.status = CalibrationStatus::DiscardedInsufficientTruth;
            continue;
        }

        std::vector<double> candidates(n);
        for (std::size_t i = 0; i < n; ++i) candidates[i] = test_reliability.at(i, a);
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

        std::vector<double> target(target_reliability.rows);
        for (std::size_t i = 0; i < target.size(); ++i) target[i] = target_reliability.at(i, a);
        std::sort(target.begin(), target.end());

        // the acc(r) support: tail balanced accuracy at every candidate
        cal.acc_map.clear();
        for (double r : candidates) {
            const double acc = tail_balanced_accuracy(rows, r);
            if (acc >= 0.0) cal.acc_map.push_back({r, acc});
        }

        cal.status = CalibrationStatus::DiscardedNoFeasibleThreshold;
        for (double thr : candidates) {
            const double acc = tail_balanced_accuracy(rows, thr);
            if (acc < config.acc_min) continue;
            // fraction of target samples with reliability >= thr
            const auto first_kept = std::lower_bound(target.begin(), target.end(), thr);
            const double coverage =
                static_cast<double>(target.end() - first_kept) / static_cast<double>(target.size());
            if (coverage < config.d_min) continue;
            cal.status = CalibrationStatus::Retained;
            cal.threshold = thr;
            cal.coverage = coverage;
            cal.accuracy = acc;
            break;  // smallest feasible threshold maximizes coverage
        }
    }
    return table;
}

void save_calibration(const std::string& path, const std::string& accmap_path,
                      const AttributeSchema& schema, const CalibrationTable& table,
                      const std::string& header_comment) {
    if (table.attributes.size() != schema.size())
        throw_config("save_calibration: table does not match schema");
    std::string out = header_comment;
    out += "attribute,threshold,coverage,balanced_accuracy,status\n";
    for (std::size_t a = 0; a < schema.size(); ++a) {
        const AttributeCalibration& cal = table.attributes[a];
        out += schema.attribute(a).name;
        if (cal.status == CalibrationStatus::Retained) {
            out += ',' + csv::format_double(cal.threshold);
            out += ',' + csv::format_double(cal.coverage);
            out += ',' + csv::format_double(cal.accuracy);
        } else {
            out += ",,,";
        }
        out += ',';
        out += to_string(cal.status);
        out += '\n';
    }
    csv::atomic_write(path, out);

    std::string accmap = header_comment;
    accmap += "attribute,reliability,balanced_accuracy\n";
    for (std::size_t a = 0; a < schema.size(); ++a) {
        for (const AccMapPoint& p : table.attributes[a].acc_map) {
            accmap += schema.attribute(a).name;
            accmap += ',' + csv::format_double(p.reliability);
            accmap += ',' + csv::format_double(p.accuracy);
            accmap += '\n';
        }
    }
    csv::atomic_write(accmap_path, accmap);
}

CalibrationTable load_calibration(const std::string& path, const std::string& accmap_path,
                                  const AttributeSchema& schema) {
    CalibrationTable table;
    table.attributes.resize(schema.size());

    const csv::File file = csv::read_file(path);
    if (file.header !=
        std::vector<std::string>{"attribute", "threshold", "coverage", "balanced_accuracy", "status"})
        throw_data(path + ": unexpected calibration header");
    for (const csv::Row& row : file.rows) {
        if (row.fields.size() != 5)
            throw_data(path + ":" + std::to_string(row.line_number) + ": expected 5 fields");
        const auto idx = schema.index_of(row.fields[0]);
        if (!idx)
            throw_data(path + ":" + std::to_string(row.line_number) + ": unknown attribute '" +
                       row.fields[0] + "'");
        AttributeCalibration& cal = table.attributes[*idx];
        const std::string& status = row.fields[4];
        if (status == "retained") {
            cal.status = CalibrationStatus::Retained;
            cal.threshold = csv::parse_double(row.fields[1], path, row.line_number);
            cal.coverage = csv::parse_double(row.fields[2], path, row.line_number);
            cal.accuracy = csv::parse_double(row.fields[3], path, row.line_number);
        } else if (status == "discarded(insufficient-truth)") {
            cal.status = CalibrationStatus::DiscardedInsufficientTruth;
        } else if (status == "discarded(no-feasible-threshold)") {
            cal.status = CalibrationStatus::DiscardedNoFeasibleThreshold;
        } else {
            throw_data(path + ":" + std::to_string(row.line_number) + ": unknown status '" +
                       status + "'");
        }
    }

    const csv::File accmap = csv::read_file(accmap_path);
    if (accmap.header != std::vector<std::string>{"attribute", "reliability", "balanced_accuracy"})
        throw_data(accmap_path + ": unexpected acc-map header");
    for (const csv::Row& row : accmap.rows) {
        if (row.fields.size() != 3)
            throw_data(accmap_path + ":" + std::to_string(row.line_number) + ": expected 3 fields");
        const auto idx = schema.index_of(row.fields[0]);
        if (!idx)
            throw_data(accmap_path + ":" + std::to_string(row.line_number) +
                       ": unknown attribute '" + row.fields[0] + "'");
        table.attributes[*idx].acc_map.push_back(
            {csv::parse_double(row.fields[1], accmap_path, row.line_number),
             csv::parse_double(row.fields[2], accmap_path, row.line_number)});
    }
    for (auto& cal : table.attributes) {
        if (!std::is_sorted(cal.acc_map.begin(), cal.acc_map.end(),
                            [](const AccMapPoint& a, const AccMapPoint& b) {
                                return a.reliability < b.reliability;
                            }))
            throw_data(accmap_path + ": acc-map support must be ascending per attribute");
        if (cal.status == CalibrationStatus::Retained && cal.acc_map.empty())
            throw_data(accmap_path + ": retained attribute lacks acc-map support");
    }
    return table;
}

}  // namespace relabel
