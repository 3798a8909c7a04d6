#include "relabel/recognition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"
#include "relabel/rng.hpp"

namespace relabel {

JointFeature joint_features(std::span<const std::int8_t> ref, std::span<const std::int8_t> probe) {
    if (ref.size() != probe.size()) throw_data("joint_features: annotation row lengths differ");
    JointFeature feature;
    feature.slots.assign(3 * ref.size(), 0);
    for (std::size_t a = 0; a < ref.size(); ++a) {
        if (ref[a] == 0 || probe[a] == 0) continue;
        if (ref[a] == 1 && probe[a] == 1)
            feature.slots[3 * a] = 1;
        else if (ref[a] == -1 && probe[a] == -1)
            feature.slots[3 * a + 1] = 1;
        else
            feature.slots[3 * a + 2] = 1;
    }
    return feature;
}

std::size_t overlap_count(std::span<const std::int8_t> ref, std::span<const std::int8_t> probe) {
    if (ref.size() != probe.size()) throw_data("overlap_count: annotation row lengths differ");
    std::size_t overlap = 0;
    for (std::size_t a = 0; a < ref.size(); ++a)
        if (ref[a] != 0 && probe[a] != 0) ++overlap;
    return overlap;
}

double hamming_score(const JointFeature& feature, std::size_t num_attributes, bool literal) {
    if (feature.slots.size() != 3 * num_attributes)
        throw_data("hamming_score: feature length does not match attribute count");
    std::size_t count = 0;
    if (literal) {
        for (std::uint8_t s : feature.slots) count += s;
    } else {
        for (std::size_t a = 0; a < num_attributes; ++a) count += feature.slots[3 * a + 2];
    }
    return 1.0 - static_cast<double>(count) / static_cast<double>(num_attributes);
}

std::vector<ComparisonPair> valid_filter(std::vector<ComparisonPair> pairs,
                                         std::size_t min_overlap) {
    std::erase_if(pairs, [min_overlap](const ComparisonPair& p) { return p.overlap < min_overlap; });
    return pairs;
}

void PairSamplingConfig::validate() const {
    if (genuine_cap_per_subject == 0) throw_config("recognition: genuine cap must be >= 1");
    if (!(imposter_ratio > 0.0)) throw_config("recognition: imposter_ratio must be > 0");
    if (epochs == 0) throw_config("recognition: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw_config("recognition: learning_rate must be > 0");
    if (!(l2 >= 0.0)) throw_config("recognition: l2 must be >= 0");
}

LogRegComparator train_logreg(const AnnotatedDataset& trainset, const PairSamplingConfig& config,
                              std::uint64_t seed) {
    config.validate();
    const std::size_t num_attrs = trainset.schema.size();
    const std::size_t n = trainset.size();
    Rng rng(seed);

    // group sample indices by subject
    std::unordered_map<std::string, std::vector<std::size_t>> by_subject;
    for (std::size_t i = 0; i < n; ++i) by_subject[trainset.samples[i].subject_id].push_back(i);

    auto row = [&](std::size_t i) { return trainset.annotations.row_span(i); };

    // genuine pairs: all same-subject valid pairs, capped per subject
    std::vector<std::pair<std::size_t, std::size_t>> genuine;
    {
        std::vector<std::string> subjects;
        subjects.reserve(by_subject.size());
        for (const auto& [subject, _] : by_subject) subjects.push_back(subject);
        std::sort(subjects.begin(), subjects.end());
        for (const std::string& subject : subjects) {
            const auto& members = by_subject[subject];
            std::size_t taken = 0;
            for (std::size_t i = 0; i < members.size() && taken < config.genuine_cap_per_subject;
                 ++i)
                for (std::size_t j = i + 1;
                     j < members.size() && taken < config.genuine_cap_per_subject; ++j) {
                    if (overlap_count(row(members[i]), row(members[j])) < config.min_overlap)
                        continue;
                    genuine.emplace_back(members[i], members[j]);
                    ++taken;
                }
        }
    }
    if (genuine.empty()) throw_data("train_logreg: no genuine pairs in the training set");

    // imposter pairs: rejection-sample cross-subject valid pairs
    const std::size_t imposter_wanted = static_cast<std::size_t>(
        std::llround(config.imposter_ratio * static_cast<double>(genuine.size())));
    std::vector<std::pair<std::size_t, std::size_t>> imposter;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 200 * (imposter_wanted + 1);
    while (imposter.size() < imposter_wanted && attempts < max_attempts) {
        ++attempts;
        const std::size_t i = static_cast<std::size_t>(rng.bounded(n));
        const std::size_t j = static_cast<std::size_t>(rng.bounded(n));
        if (i == j || trainset.samples[i].subject_id == trainset.samples[j].subject_id) continue;
        if (overlap_count(row(i), row(j)) < config.min_overlap) continue;
        imposter.emplace_back(i, j);
    }
    if (imposter.empty()) throw_data("train_logreg: no valid imposter pairs found");

    // assemble features once
    std::vector<JointFeature> features;
    std::vector<double> targets;
    features.reserve(genuine.size() + imposter.size());
    for (const auto& [i, j] : genuine) {
        features.push_back(joint_features(row(i), row(j)));
        targets.push_back(1.0);
    }
    for (const auto& [i, j] : imposter) {
        features.push_back(joint_features(row(i), row(j)));
        targets.push_back(0.0);
    }

    LogRegComparator comparator;
    comparator.num_attributes = num_attrs;
    comparator.weights.assign(3 * num_attrs, 0.0);
    comparator.genuine_pairs = genuine.size();
    comparator.imposter_pairs = imposter.size();
    comparator.seed = seed;

    const std::size_t dim = comparator.weights.size();
    const double inv_count = 1.0 / static_cast<double>(features.size());
    std::vector<double> grad(dim);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_bias = 0.0;
        for (std::size_t p = 0; p < features.size(); ++p) {
            double z = comparator.bias;
            const auto& slots = features[p].slots;
            for (std::size_t d = 0; d < dim; ++d)
                if (slots[d]) z += comparator.weights[d];
            const double prob = 1.0 / (1.0 + std::exp(-z));
            const double err = prob - targets[p];
            for (std::size_t d = 0; d < dim; ++d)
                if (slots[d]) grad[d] += err;
            grad_bias += err;
        }
        for (std::size_t d = 0; d < dim; ++d) {
            grad[d] = grad[d] * inv_count + config.l2 * comparator.weights[d];
            comparator.weights[d] -= config.learning_rate * grad[d];
        }
        comparator.bias -= config.learning_rate * grad_bias * inv_count;
    }
    return comparator;
}

double logreg_score(const LogRegComparator& comparator, const JointFeature& feature) {
    if (feature.slots.size() != comparator.weights.size())
        throw_data("logreg_score: feature length does not match the comparator");
    double z = comparator.bias;
    for (std::size_t d = 0; d < feature.slots.size(); ++d)
        if (feature.slots[d]) z += comparator.weights[d];
    return 1.0 / (1.0 + std::exp(-z));
}

PairScorer hamming_scorer(std::size_t num_attributes, bool literal) {
    return [num_attributes, literal](std::span<const std::int8_t> ref,
                                     std::span<const std::int8_t> probe) {
        return hamming_score(joint_features(ref, probe), num_attributes, literal);
    };
}

PairScorer logreg_scorer(const LogRegComparator& comparator) {
    return [&comparator](std::span<const std::int8_t> ref, std::span<const std::int8_t> probe) {
        return logreg_score(comparator, joint_features(ref, probe));
    };
}

AttributeImportance attribute_importance(const LogRegComparator& comparator,
                                         const AttributeSchema& schema) {
    if (comparator.weights.size() != 3 * schema.size())
        throw_data("attribute_importance: comparator does not match the schema");
    AttributeImportance importance;
    importance.true_true.resize(schema.size());
    importance.false_false.resize(schema.size());
    importance.differ.resize(schema.size());
    for (std::size_t a = 0; a < schema.size(); ++a) {
        importance.true_true[a] = comparator.weights[3 * a];
        importance.false_false[a] = comparator.weights[3 * a + 1];
        importance.differ[a] = comparator.weights[3 * a + 2];
    }
    return importance;
}

std::string importance_csv(const AttributeImportance& importance, const AttributeSchema& schema,
                           const std::string& header_comment) {
    std::string out = header_comment;
    out += "attribute,true_true,false_false,differ\n";
    for (std::size_t a = 0; a < schema.size(); ++a) {
        out += schema.attribute(a).name;
        out += ',' + csv::format_double(importance.true_true[a]);
        out += ',' + csv::format_double(importance.false_false[a]);
        out += ',' + csv::format_double(importance.differ[a]);
        out += '\n';
    }
    return out;
}

void save_comparator(const std::string& path, const LogRegComparator& comparator,
                     const AttributeSchema& schema) {
    nlohmann::json doc;
    doc["schema_hash"] = schema.hash();
    doc["num_attributes"] = comparator.num_attributes;
    doc["bias"] = comparator.bias;
    doc["weights"] = comparator.weights;
    doc["genuine_pairs"] = comparator.genuine_pairs;
    doc["imposter_pairs"] = comparator.imposter_pairs;
    doc["seed"] = comparator.seed;
    csv::atomic_write(path, doc.dump(2) + "\n");
}

LogRegComparator load_comparator(const std::string& path, const AttributeSchema& schema) {
    std::ifstream in(path);
    if (!in) throw_data("cannot open comparator file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw_data("comparator parse error in " + path + ": " + e.what());
    }
    LogRegComparator comparator;
    try {
        if (doc.at("schema_hash").get<std::uint64_t>() != schema.hash())
            throw_data("comparator schema hash mismatch for " + path);
        comparator.num_attributes = doc.at("num_attributes").get<std::size_t>();
        comparator.bias = doc.at("bias").get<double>();
        comparator.weights = doc.at("weights").get<std::vector<double>>();
        comparator.genuine_pairs = doc.value("genuine_pairs", std::size_t{0});
        comparator.imposter_pairs = doc.value("imposter_pairs", std::size_t{0});
        comparator.seed = doc.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw_data("comparator malformed in " + path + ": " + e.what());
    }
    if (comparator.weights.size() != 3 * comparator.num_attributes ||
        comparator.num_attributes != schema.size())
        throw_data("comparator shape mismatch in " + path);
    return comparator;
}

}  // namespace relabel
