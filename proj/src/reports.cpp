#include "relabel/reports.hpp"

#include <cmath>
#include <cstdio>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"

namespace relabel {

StatsReport compute_stats(const AnnotationMatrix& annotations, const AttributeSchema& schema) {
    if (annotations.cols != schema.size()) throw_data("compute_stats: schema mismatch");
    const std::size_t n = annotations.rows;
    StatsReport report;
    report.num_samples = n;
    report.attributes.resize(schema.size());

    std::size_t total_pos = 0, total_neg = 0, total_und = 0;
    for (std::size_t a = 0; a < schema.size(); ++a) {
        std::size_t pos = 0, neg = 0, und = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const int v = annotations.at(i, a);
            if (v == 1)
                ++pos;
            else if (v == -1)
                ++neg;
            else
                ++und;
        }
        const double denom = n ? static_cast<double>(n) : 1.0;
        report.attributes[a] = {100.0 * pos / denom, 100.0 * neg / denom, 100.0 * und / denom};
        total_pos += pos;
        total_neg += neg;
        total_und += und;
    }
    const double cells = n && schema.size() ? static_cast<double>(n * schema.size()) : 1.0;
    report.total = {100.0 * total_pos / cells, 100.0 * total_neg / cells, 100.0 * total_und / cells};

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t defined = 0;
        for (std::size_t a = 0; a < schema.size(); ++a)
            if (annotations.at(i, a) != 0) ++defined;
        sum += static_cast<double>(defined);
        sum_sq += static_cast<double>(defined) * static_cast<double>(defined);
    }
    if (n) {
        report.mean_defined_per_sample = sum / static_cast<double>(n);
        const double var =
            std::max(sum_sq / static_cast<double>(n) -
                         report.mean_defined_per_sample * report.mean_defined_per_sample,
                     0.0);
        report.stddev_defined_per_sample = std::sqrt(var);
    }
    return report;
}

std::string stats_csv(const StatsReport& report, const AttributeSchema& schema,
                      const std::string& header_comment) {
    char buf[160];
    std::string out = header_comment;
    std::snprintf(buf, sizeof(buf), "# defined_per_sample mean=%.4f stddev=%.4f\n",
                  report.mean_defined_per_sample, report.stddev_defined_per_sample);
    out += buf;
    out += "attribute,positive_pct,negative_pct,undefined_pct\n";
    for (std::size_t a = 0; a < schema.size(); ++a) {
        const StatsReport::Row& row = report.attributes[a];
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f\n", schema.attribute(a).name.c_str(),
                      row.positive_pct, row.negative_pct, row.undefined_pct);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "TOTAL,%.4f,%.4f,%.4f\n", report.total.positive_pct,
                  report.total.negative_pct, report.total.undefined_pct);
    out += buf;
    return out;
}

std::string stats_text(const StatsReport& report, const AttributeSchema& schema) {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-22s %10s %10s %12s\n", "Attribute", "Positive", "Negative",
                  "Undefined");
    out += buf;
    out += std::string(57, '-') + "\n";
    for (std::size_t a = 0; a < schema.size(); ++a) {
        const StatsReport::Row& row = report.attributes[a];
        std::snprintf(buf, sizeof(buf), "%-22s %9.1f%% %9.1f%% %11.1f%%\n",
                      schema.attribute(a).name.c_str(), row.positive_pct, row.negative_pct,
                      row.undefined_pct);
        out += buf;
    }
    out += std::string(57, '-') + "\n";
    std::snprintf(buf, sizeof(buf), "%-22s %9.1f%% %9.1f%% %11.1f%%\n", "TOTAL",
                  report.total.positive_pct, report.total.negative_pct,
                  report.total.undefined_pct);
    out += buf;
    std::snprintf(buf, sizeof(buf), "defined annotations per sample: %.1f +- %.1f (n=%zu)\n",
                  report.mean_defined_per_sample, report.stddev_defined_per_sample,
                  report.num_samples);
    out += buf;
    return out;
}

namespace {

struct Counts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::size_t support() const { return tp + tn + fp + fn; }

    QualityReport::Row to_row() const {
        QualityReport::Row row;
        row.support = support();
        row.defined = row.support > 0;
        if (!row.defined) return row;
        row.accuracy = static_cast<double>(tp + tn) / static_cast<double>(row.support);
        if (tp + fp > 0) {
            row.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
            row.precision_defined = true;
        }
        if (tp + fn > 0) {
            row.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
            row.recall_defined = true;
        }
        double sum = 0.0;
        int classes = 0;
        if (tp + fn > 0) {
            sum += static_cast<double>(tp) / static_cast<double>(tp + fn);
            ++classes;
        }
        if (tn + fp > 0) {
            sum += static_cast<double>(tn) / static_cast<double>(tn + fp);
            ++classes;
        }
        row.balanced_accuracy = classes ? sum / classes : 0.0;
        return row;
    }
};

}  // namespace

QualityReport evaluate_labels(const AnnotationMatrix& predicted, const AnnotationMatrix& truth,
                              const AttributeSchema& schema) {
    if (predicted.rows != truth.rows || predicted.cols != truth.cols)
        throw_data("evaluate_labels: matrices must be aligned");
    if (predicted.cols != schema.size()) throw_data("evaluate_labels: schema mismatch");

    QualityReport report;
    report.attributes.resize(schema.size());
    Counts pooled;
    for (std::size_t a = 0; a < schema.size(); ++a) {
        Counts counts;
        for (std::size_t i = 0; i < predicted.rows; ++i) {
            const int p = predicted.at(i, a);
            const int t = truth.at(i, a);
            if (p == 0 || t == 0) continue;
            if (t == 1)
                (p == 1 ? counts.tp : counts.fn)++;
            else
                (p == -1 ? counts.tn : counts.fp)++;
        }
        report.attributes[a] = counts.to_row();
        pooled.tp += counts.tp;
        pooled.tn += counts.tn;
        pooled.fp += counts.fp;
        pooled.fn += counts.fn;
    }
    report.total = pooled.to_row();
    return report;
}

namespace {

std::string metric_cell(double value, bool defined) {
    if (!defined) return "N/A";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", value);
    return buf;
}

void append_quality_csv_row(std::string& out, const std::string& name,
                            const QualityReport::Row& row) {
    out += name;
    if (row.defined) {
        out += ',' + metric_cell(row.accuracy, true);
        out += ',' + metric_cell(row.precision, row.precision_defined);
        out += ',' + metric_cell(row.recall, row.recall_defined);
        out += ',' + metric_cell(row.balanced_accuracy, true);
    } else {
        out += ",N/A,N/A,N/A,N/A";
    }
    out += ',' + std::to_string(row.support);
    out += '\n';
}

}  // namespace

std::string quality_csv(const QualityReport& report, const AttributeSchema& schema,
                        const std::string& header_comment) {
    std::string out = header_comment;
    out += "attribute,accuracy,precision,recall,balanced_accuracy,support\n";
    for (std::size_t a = 0; a < schema.size(); ++a)
        append_quality_csv_row(out, schema.attribute(a).name, report.attributes[a]);
    append_quality_csv_row(out, "TOTAL", report.total);
    return out;
}

std::string quality_text(const QualityReport& report, const AttributeSchema& schema) {
    char buf[200];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-22s %10s %10s %10s %10s %8s\n", "Attribute", "Accuracy",
                  "Precision", "Recall", "Bal.Acc", "Support");
    out += buf;
    out += std::string(76, '-') + "\n";
    auto line = [&](const std::string& name, const QualityReport::Row& row) {
        std::snprintf(buf, sizeof(buf), "%-22s %10s %10s %10s %10s %8zu\n", name.c_str(),
                      metric_cell(row.accuracy, row.defined).c_str(),
                      metric_cell(row.precision, row.defined && row.precision_defined).c_str(),
                      metric_cell(row.recall, row.defined && row.recall_defined).c_str(),
                      metric_cell(row.balanced_accuracy, row.defined).c_str(), row.support);
        out += buf;
    };
    for (std::size_t a = 0; a < schema.size(); ++a)
        line(schema.attribute(a).name, report.attributes[a]);
    out += std::string(76, '-') + "\n";
    line("TOTAL", report.total);
    return out;
}

}  // namespace relabel
