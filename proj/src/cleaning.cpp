#include "relabel/cleaning.hpp"

#include <algorithm>
#include <cmath>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"

namespace relabel {

void ThresholdSearchConfig::validate() const {
    if (window == 0) throw_config("cleaning: window must be >= 1");
    if (required_correct == 0 || required_correct > window)
        throw_config("cleaning: required_correct must be in [1, window]");
    if (!(quantile_step > 0.0 && quantile_step <= 1.0))
        throw_config("cleaning: quantile_step must be in (0,1]");
}

AnnotationMatrix binarize(const ContinuousAnnotations& scores,
                          const std::vector<ThresholdPair>& thresholds) {
    if (thresholds.size() != scores.scores.cols)
        throw_config("binarize: need one threshold pair per attribute (" +
                     std::to_string(scores.scores.cols) + " attributes, " +
                     std::to_string(thresholds.size()) + " pairs)");
    for (const ThresholdPair& t : thresholds)
        if (!(t.lower <= 0.0 && 0.0 <= t.upper))
            throw_config("binarize: thresholds must satisfy lower <= 0 <= upper");

    AnnotationMatrix out(scores.scores.rows, scores.scores.cols);
    for (std::size_t i = 0; i < scores.scores.rows; ++i)
        for (std::size_t a = 0; a < scores.scores.cols; ++a) {
            const double s = scores.scores.at(i, a);
            if (s > thresholds[a].upper)
                out.set(i, a, 1);
            else if (s < thresholds[a].lower)
                out.set(i, a, -1);
        }
    return out;
}

namespace {

struct SideSample {
    double score;
    std::size_t row;
};

// Candidate values at quantiles of one side's scores, ordered from nearest
// zero outward. `side` is sorted by distance from zero ascending.
std::vector<double> quantile_candidates(const std::vector<SideSample>& side, double step) {
    std::vector<double> candidates;
    const std::size_t n = side.size();
    double last = std::nan("");
    for (double q = 0.0; q < 1.0 + step / 2; q += step) {
        const std::size_t idx =
            std::min(static_cast<std::size_t>(std::llround(q * static_cast<double>(n - 1))), n - 1);
        const double value = side[idx].score;
        if (!candidates.empty() && value == last) continue;
        candidates.push_back(value);
        last = value;
    }
    return candidates;
}

// Accepts the first candidate whose window of closest same-side samples
// passes the oracle bar; nullopt when the side is exhausted.
std::optional<double> search_side(const std::vector<SideSample>& side, int polarity,
                                  const ContinuousAnnotations& scores,
                                  const std::string& attribute, const CorrectnessOracle& oracle,
                                  const ThresholdSearchConfig& config) {
    const std::vector<double> candidates = quantile_candidates(side, config.quantile_step);
    std::vector<SideSample> by_distance = side;
    for (double candidate : candidates) {
        std::stable_sort(by_distance.begin(), by_distance.end(),
                         [candidate](const SideSample& a, const SideSample& b) {
                             const double da = std::fabs(a.score - candidate);
                             const double db = std::fabs(b.score - candidate);
                             if (da != db) return da < db;
                             if (a.score != b.score) return a.score < b.score;
                             return a.row < b.row;
                         });
        std::size_t correct = 0;
        for (std::size_t i = 0; i < config.window; ++i)
            if (oracle(scores.sample_ids[by_distance[i].row], attribute, polarity)) ++correct;
        if (correct >= config.required_correct) return candidate;
    }
    return std::nullopt;
}

}  // namespace

ThresholdSearchResult search_thresholds(const ContinuousAnnotations& scores,
                                        std::size_t attribute_index, const AttributeSchema& schema,
                                        const CorrectnessOracle& oracle,
                                        const ThresholdSearchConfig& config) {
    config.validate();
    if (attribute_index >= scores.scores.cols)
        throw_config("search_thresholds: attribute index out of range");
    const std::string& attribute = schema.attribute(attribute_index).name;

    std::vector<SideSample> positive, negative;
    for (std::size_t i = 0; i < scores.scores.rows; ++i) {
        const double s = scores.scores.at(i, attribute_index);
        if (s > 0.0)
            positive.push_back({s, i});
        else if (s < 0.0)
            negative.push_back({s, i});
    }
    if (positive.size() < config.window || negative.size() < config.window)
        throw_data("search_thresholds: attribute '" + attribute + "' needs at least " +
                   std::to_string(config.window) + " samples on each polarity side");

    // nearest zero first = outward traversal order
    std::sort(positive.begin(), positive.end(),
              [](const SideSample& a, const SideSample& b) { return a.score < b.score; });
    std::sort(negative.begin(), negative.end(),
              [](const SideSample& a, const SideSample& b) { return a.score > b.score; });

    const std::optional<double> upper =
        search_side(positive, +1, scores, attribute, oracle, config);
    const std::optional<double> lower =
        search_side(negative, -1, scores, attribute, oracle, config);

    ThresholdSearchResult result;
    if (upper && lower) {
        result.usable = true;
        result.thresholds = {*lower, *upper};
    }
    return result;
}

void save_thresholds(const std::string& path, const AttributeSchema& schema,
                     const std::vector<ThresholdSearchResult>& results,
                     const std::string& header_comment) {
    if (results.size() != schema.size())
        throw_config("save_thresholds: one result per schema attribute required");
    std::string out = header_comment;
    out += "attribute,lower,upper\n";
    for (std::size_t a = 0; a < schema.size(); ++a) {
        out += schema.attribute(a).name;
        if (results[a].usable) {
            out += ',';
            out += csv::format_double(results[a].thresholds.lower);
            out += ',';
            out += csv::format_double(results[a].thresholds.upper);
        } else {
            out += ",,";
        }
        out += '\n';
    }
    csv::atomic_write(path, out);
}

std::vector<ThresholdSearchResult> load_thresholds(const std::string& path,
                                                   const AttributeSchema& schema) {
    const csv::File file = csv::read_file(path);
    if (file.header != std::vector<std::string>{"attribute", "lower", "upper"})
        throw_data(path + ": expected header attribute,lower,upper");
    std::vector<ThresholdSearchResult> results(schema.size());
    std::vector<bool> seen(schema.size(), false);
    for (const csv::Row& row : file.rows) {
        if (row.fields.size() != 3)
            throw_data(path + ":" + std::to_string(row.line_number) + ": expected 3 fields");
        const auto idx = schema.index_of(row.fields[0]);
        if (!idx)
            throw_data(path + ":" + std::to_string(row.line_number) + ": unknown attribute '" +
                       row.fields[0] + "'");
        if (seen[*idx])
            throw_data(path + ":" + std::to_string(row.line_number) + ": duplicate attribute '" +
                       row.fields[0] + "'");
        seen[*idx] = true;
        if (row.fields[1].empty() && row.fields[2].empty()) continue;  // unusable
        ThresholdSearchResult& r = results[*idx];
        r.usable = true;
        r.thresholds.lower = csv::parse_double(row.fields[1], path, row.line_number);
        r.thresholds.upper = csv::parse_double(row.fields[2], path, row.line_number);
        if (!(r.thresholds.lower <= 0.0 && 0.0 <= r.thresholds.upper))
            throw_data(path + ":" + std::to_string(row.line_number) +
                       ": thresholds must satisfy lower <= 0 <= upper");
    }
    for (std::size_t a = 0; a < schema.size(); ++a)
        if (!seen[a])
            throw_data(path + ": missing threshold row for attribute '" +
                       schema.attribute(a).name + "'");
    return results;
}

}  // namespace relabel
