// relabel: reliability-aware attribute annotation transfer and evaluation.
//
// Subcommands wrap single library operations, read one JSON config (with
// per-flag overrides), write artifacts atomically, and stamp every artifact
// with the seed and a config hash. Exit codes: 0 ok, 2 config error, 3 data
// error, 4 stage failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "relabel/calibration.hpp"
#include "relabel/cleaning.hpp"
#include "relabel/csv.hpp"
#include "relabel/dataset.hpp"
#include "relabel/errors.hpp"
#include "relabel/metrics.hpp"
#include "relabel/model_io.hpp"
#include "relabel/recognition.hpp"
#include "relabel/reliability.hpp"
#include "relabel/reports.hpp"
#include "relabel/split.hpp"
#include "relabel/synthetic.hpp"
#include "relabel/train.hpp"
#include "relabel/transfer.hpp"

using nlohmann::json;
using namespace relabel;

namespace {

json default_config() {
    return json{
        {"seed", 1},
        {"workers", 1},
        {"out_dir", "out"},
        {"schema", ""},
        {"sources", json::array()},
        {"target", {{"embeddings", ""}}},
        {"mac",
         {{"trunk_width", 512},
          {"branch_width", 512},
          {"dropout_rate", 0.5},
          {"bn_epsilon", 1e-5},
          {"bn_momentum", 0.9}}},
        {"training",
         {{"epochs", 200},
          {"learning_rate", 1e-3},
          {"lr_decay", nullptr},
          {"lr_floor_fraction", 0.1},
          {"batch_size", 1024}}},
        {"reliability", {{"num_passes", 100}, {"alpha", 0.5}}},
        {"calibration", {{"acc_min", 0.9}, {"d_min", 0.5}}},
        {"pipeline", {{"train_fraction", 0.8}, {"plausibility_scope", "class"}}},
        {"cleaning", {{"window", 10}, {"required_correct", 9}, {"quantile_step", 0.02}}},
        {"recognition",
         {{"train_fraction", 0.2},
          {"min_overlap", 10},
          {"genuine_cap_per_subject", 50},
          {"imposter_ratio", 1.0},
          {"epochs", 200},
          {"learning_rate", 0.05},
          {"l2", 1e-4},
          {"fmr_targets", {0.01, 0.001}},
          {"fusion_mode", "one_minus_eer"},
          {"unenrolled_fraction", 0.2},
          {"hamming_literal", false}}},
        {"synthetic",
         {{"num_sources", 2},
          {"subjects_per_dataset", 50},
          {"samples_per_subject", 10},
          {"embedding_dim", 32},
          {"num_attributes", 10},
          {"separation", 3.0},
          {"annotation_noise", 0.05},
          {"undefined_rate", 0.1},
          {"embedding_noise", 1.0}}},
    };
}

void merge_into(json& base, const json& overlay) {
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object())
            merge_into(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

struct Context {
    json config;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = "out";
    std::uint64_t config_hash = 0;

    std::string header(const std::string& command) const {
        return csv::artifact_header(command, seed, config_hash);
    }

    std::string out(const std::string& filename) const {
        return (std::filesystem::path(out_dir) / filename).string();
    }
};

Context make_context(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                     std::optional<int> workers_flag, std::optional<std::string> out_flag) {
    Context ctx;
    ctx.config = default_config();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw_config("cannot open config file: " + config_path);
        json user;
        try {
            in >> user;
        } catch (const json::exception& e) {
            throw_config("config parse error in " + config_path + ": " + e.what());
        }
        if (!user.is_object()) throw_config("config must be a JSON object: " + config_path);
        merge_into(ctx.config, user);
    }
    if (seed_flag) ctx.config["seed"] = *seed_flag;
    if (workers_flag) ctx.config["workers"] = *workers_flag;
    if (out_flag) ctx.config["out_dir"] = *out_flag;

    try {
        ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
        ctx.workers = ctx.config.at("workers").get<int>();
        ctx.out_dir = ctx.config.at("out_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw_config(std::string("config field error: ") + e.what());
    }
    if (ctx.workers < 1) throw_config("workers must be >= 1");

    // hash over the effective config minus fields that cannot change results
    json canonical = ctx.config;
    canonical.erase("workers");
    ctx.config_hash = csv::fnv1a64(canonical.dump());
    return ctx;
}

template <typename T>
T field(const json& obj, const std::string& key) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw_config("config key '" + key + "': " + e.what());
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw_config(what + " path is empty");
    if (!std::filesystem::exists(path)) throw_config(what + " file does not exist: " + path);
}

struct SourceEntry {
    std::string name;
    std::string embeddings;
    std::string annotations;
};

std::vector<SourceEntry> source_entries(const Context& ctx) {
    std::vector<SourceEntry> sources;
    for (const json& src : ctx.config.at("sources")) {
        SourceEntry entry;
        entry.name = field<std::string>(src, "name");
        entry.embeddings = src.value("embeddings", "");
        entry.annotations = src.value("annotations", "");
        if (entry.name.empty()) throw_config("source entry without a name");
        sources.push_back(std::move(entry));
    }
    if (sources.empty()) throw_config("config lists no sources");
    return sources;
}

SourceEntry source_by_name(const Context& ctx, const std::string& name) {
    for (SourceEntry& entry : source_entries(ctx))
        if (entry.name == name) return entry;
    throw_config("source '" + name + "' not found in config");
}

AttributeSchema load_schema(const Context& ctx) {
    const std::string path = field<std::string>(ctx.config, "schema");
    require_file(path, "schema");
    return AttributeSchema::load_json(path);
}

TrainingConfig training_config(const Context& ctx, std::uint64_t seed) {
    const json& t = ctx.config.at("training");
    TrainingConfig tc;
    tc.epochs = field<std::size_t>(t, "epochs");
    tc.learning_rate = field<double>(t, "learning_rate");
    tc.lr_decay = t.at("lr_decay").is_null() ? -1.0 : field<double>(t, "lr_decay");
    tc.lr_floor_fraction = field<double>(t, "lr_floor_fraction");
    tc.batch_size = field<std::size_t>(t, "batch_size");
    tc.seed = seed;
    tc.validate();
    return tc;
}

ReliabilityConfig reliability_config(const Context& ctx) {
    const json& r = ctx.config.at("reliability");
    ReliabilityConfig rc;
    rc.num_passes = field<std::size_t>(r, "num_passes");
    rc.alpha = field<double>(r, "alpha");
    rc.validate();
    return rc;
}

CalibrationConfig calibration_config(const Context& ctx) {
    const json& c = ctx.config.at("calibration");
    CalibrationConfig cc;
    cc.acc_min = field<double>(c, "acc_min");
    cc.d_min = field<double>(c, "d_min");
    cc.validate();
    return cc;
}

MacConfig mac_config(const Context& ctx, std::size_t input_dim, AttributeSchema schema) {
    const json& m = ctx.config.at("mac");
    MacConfig mc;
    mc.input_dim = input_dim;
    mc.trunk_width = field<std::size_t>(m, "trunk_width");
    mc.branch_width = field<std::size_t>(m, "branch_width");
    mc.dropout_rate = field<double>(m, "dropout_rate");
    mc.bn_epsilon = field<double>(m, "bn_epsilon");
    mc.bn_momentum = field<double>(m, "bn_momentum");
    mc.schema = std::move(schema);
    mc.validate();
    return mc;
}

double pipeline_train_fraction(const Context& ctx) {
    return field<double>(ctx.config.at("pipeline"), "train_fraction");
}

PlausibilityScope plausibility_scope(const Context& ctx) {
    const std::string scope = field<std::string>(ctx.config.at("pipeline"), "plausibility_scope");
    if (scope == "class") return PlausibilityScope::Class;
    if (scope == "row") return PlausibilityScope::Row;
    throw_config("pipeline.plausibility_scope must be 'class' or 'row'");
}

std::vector<std::string> dataset_sample_ids(const AnnotatedDataset& ds) {
    std::vector<std::string> ids;
    ids.reserve(ds.size());
    for (const Sample& s : ds.samples) ids.push_back(s.sample_id);
    return ids;
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const Context& ctx) {
    const json& s = ctx.config.at("synthetic");
    SyntheticSpec spec;
    spec.num_sources = field<std::size_t>(s, "num_sources");
    spec.subjects_per_dataset = field<std::size_t>(s, "subjects_per_dataset");
    spec.samples_per_subject = field<std::size_t>(s, "samples_per_subject");
    spec.embedding_dim = field<std::size_t>(s, "embedding_dim");
    spec.schema = default_synthetic_schema(field<std::size_t>(s, "num_attributes"));
    if (s.at("separation").is_array())
        spec.separation = field<std::vector<double>>(s, "separation");
    else
        spec.separation = {field<double>(s, "separation")};
    spec.annotation_noise = field<double>(s, "annotation_noise");
    spec.undefined_rate = field<double>(s, "undefined_rate");
    spec.embedding_noise = field<double>(s, "embedding_noise");

    const SyntheticData data = generate_synthetic(spec, ctx.seed);
    const std::string header = ctx.header("generate");

    spec.schema.save_json(ctx.out("schema.json"));
    for (std::size_t k = 0; k < data.sources.size(); ++k) {
        const std::string base = "src" + std::to_string(k);
        save_dataset(ctx.out(base + "_embeddings.csv"), ctx.out(base + "_annotations.csv"),
                     data.sources[k], header);
        save_annotations(ctx.out(base + "_truth.csv"), spec.schema,
                         dataset_sample_ids(data.sources[k]), data.source_truths[k], header);
    }
    save_embeddings(ctx.out("target_embeddings.csv"), data.target.samples,
                    data.target.embeddings, header);
    save_annotations(ctx.out("target_truth.csv"), spec.schema, dataset_sample_ids(data.target),
                     data.target_truth, header);
    std::printf("generated %zu source dataset(s) + target under %s\n", data.sources.size(),
                ctx.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// clean

int cmd_clean(const Context& ctx, const std::string& scores_path, const std::string& oracle_path) {
    require_file(scores_path, "scores");
    require_file(oracle_path, "oracle");
    const AttributeSchema schema = load_schema(ctx);
    const ContinuousAnnotations scores = load_continuous_annotations(scores_path, schema);

    // oracle file: sample_id,attribute,correct (0/1); lookups not present are
    // treated as incorrect
    std::unordered_map<std::string, bool> judgments;
    {
        const csv::File file = csv::read_file(oracle_path);
        if (file.header != std::vector<std::string>{"sample_id", "attribute", "correct"})
            throw_data(oracle_path + ": expected header sample_id,attribute,correct");
        for (const csv::Row& row : file.rows) {
            if (row.fields.size() != 3)
                throw_data(oracle_path + ":" + std::to_string(row.line_number) +
                           ": expected 3 fields");
            const int v = csv::parse_int(row.fields[2], oracle_path, row.line_number);
            judgments[row.fields[0] + "\x1f" + row.fields[1]] = v != 0;
        }
    }
    const CorrectnessOracle oracle = [&judgments](const std::string& sample_id,
                                                  const std::string& attribute, int) {
        auto it = judgments.find(sample_id + "\x1f" + attribute);
        return it != judgments.end() && it->second;
    };

    const json& c = ctx.config.at("cleaning");
    ThresholdSearchConfig cfg;
    cfg.window = field<std::size_t>(c, "window");
    cfg.required_correct = field<std::size_t>(c, "required_correct");
    cfg.quantile_step = field<double>(c, "quantile_step");

    std::vector<ThresholdSearchResult> results;
    std::vector<ThresholdPair> pairs;
    for (std::size_t a = 0; a < schema.size(); ++a) {
        results.push_back(search_thresholds(scores, a, schema, oracle, cfg));
        if (results.back().usable) {
            pairs.push_back(results.back().thresholds);
        } else {
            // unusable attribute: binarize nothing on this column
            constexpr double inf = std::numeric_limits<double>::infinity();
            pairs.push_back({-inf, inf});
            std::fprintf(stderr, "clean: attribute '%s' unusable, column left undefined\n",
                         schema.attribute(a).name.c_str());
        }
    }

    const std::string header = ctx.header("clean");
    save_thresholds(ctx.out("thresholds.csv"), schema, results, header);
    const AnnotationMatrix cleaned = binarize(scores, pairs);
    save_annotations(ctx.out("cleaned_annotations.csv"), schema, scores.sample_ids, cleaned,
                     header);
    std::printf("cleaned annotations written to %s\n", ctx.out("cleaned_annotations.csv").c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// train-mac

int cmd_train_mac(const Context& ctx, const std::string& source_name) {
    const SourceEntry entry = source_by_name(ctx, source_name);
    require_file(entry.embeddings, "source embeddings");
    require_file(entry.annotations, "source annotations");
    const AttributeSchema schema = load_schema(ctx);
    const AnnotatedDataset dataset = load_dataset(entry.embeddings, entry.annotations, schema);

    const SubjectSplit split = split_subject_exclusive(
        dataset, pipeline_train_fraction(ctx), derive_seed(ctx.seed, "split:" + entry.name));
    MacModel model = init_model(mac_config(ctx, dataset.dim(), schema),
                                derive_seed(ctx.seed, "init:" + entry.name));
    TrainingConfig tc = training_config(ctx, derive_seed(ctx.seed, "train:" + entry.name));
    const auto tr = train_indices(dataset, split);
    const TrainLog log = mac_train(model, subset(dataset, tr), tc);

    const std::string header = ctx.header("train-mac");
    save_model(ctx.out(entry.name + ".mac"), model);
    save_split(ctx.out(entry.name + "_split.csv"), split, header);
    save_train_log(ctx.out(entry.name + "_train_log.csv"), log, header);
    std::printf("trained %s: %zu train subjects, final loss %.6f\n", entry.name.c_str(),
                split.train_subjects.size(), log.epoch_loss.back());
    for (const std::string& name : log.skipped_attributes)
        std::fprintf(stderr, "train-mac: attribute '%s' had no defined labels, branch skipped\n",
                     name.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate

int cmd_calibrate(const Context& ctx, const std::string& source_name) {
    const SourceEntry entry = source_by_name(ctx, source_name);
    const AttributeSchema schema = load_schema(ctx);
    const AnnotatedDataset dataset = load_dataset(entry.embeddings, entry.annotations, schema);
    const MacModel model = load_model(ctx.out(entry.name + ".mac"), schema);
    const SubjectSplit split = load_split(ctx.out(entry.name + "_split.csv"));

    const std::string target_path = field<std::string>(ctx.config.at("target"), "embeddings");
    require_file(target_path, "target embeddings");
    const AnnotatedDataset target = load_dataset(target_path, "", schema);

    const ReliabilityConfig rc = reliability_config(ctx);
    const auto te = test_indices(dataset, split);
    const AnnotatedDataset test_part = subset(dataset, te);
    const SourcePredictions test_pred =
        predict_with_reliability(model, test_part.embeddings, rc,
                                 derive_seed(ctx.seed, "mc-test:" + entry.name), ctx.workers);
    const SourcePredictions target_pred =
        predict_with_reliability(model, target.embeddings, rc,
                                 derive_seed(ctx.seed, "mc-target:" + entry.name), ctx.workers);

    const CalibrationTable table = calibrate(test_pred.p, test_pred.r, test_part.annotations,
                                             target_pred.r, calibration_config(ctx));

    const std::string header = ctx.header("calibrate");
    save_calibration(ctx.out(entry.name + "_calibration.csv"), ctx.out(entry.name + "_accmap.csv"),
                     schema, table, header);
    save_annotations(ctx.out(entry.name + "_target_pred.csv"), schema, dataset_sample_ids(target),
                     target_pred.p, header);
    save_continuous_annotations(ctx.out(entry.name + "_target_rel.csv"), schema,
                                dataset_sample_ids(target), target_pred.r, header);
    std::size_t retained = 0;
    for (std::size_t a = 0; a < schema.size(); ++a)
        if (table.retained(a)) ++retained;
    std::printf("calibrated %s: %zu/%zu attributes retained\n", entry.name.c_str(), retained,
                schema.size());
    return 0;
}

// ---------------------------------------------------------------------------
// transfer

int cmd_transfer(const Context& ctx) {
    const AttributeSchema schema = load_schema(ctx);
    const auto sources = source_entries(ctx);

    std::vector<AggregationInput> inputs;
    std::vector<std::string> target_ids;
    for (const SourceEntry& entry : sources) {
        CalibrationTable table =
            load_calibration(ctx.out(entry.name + "_calibration.csv"),
                             ctx.out(entry.name + "_accmap.csv"), schema);
        const AnnotationTable pred =
            load_annotations(ctx.out(entry.name + "_target_pred.csv"), schema);
        const ContinuousAnnotations rel =
            load_continuous_annotations(ctx.out(entry.name + "_target_rel.csv"), schema);
        if (pred.sample_ids != rel.sample_ids)
            throw_data("transfer: prediction and reliability files for '" + entry.name +
                       "' list different samples");
        if (target_ids.empty())
            target_ids = pred.sample_ids;
        else if (pred.sample_ids != target_ids)
            throw_data("transfer: sources disagree on the target sample list");
        SourcePredictions sp{pred.annotations, rel.scores};
        AnnotationMatrix labels = transfer(sp, table);
        inputs.push_back({entry.name, std::move(labels), rel.scores, std::move(table)});
    }

    const AggregationResult agg = aggregate(inputs, schema);
    const AnnotationMatrix labels =
        obtain_plausibility(agg.labels, schema, plausibility_scope(ctx));
    const std::vector<AttributeProvenance> provenance =
        build_provenance(agg, inputs, labels, schema);

    const std::string header = ctx.header("transfer");
    save_annotations(ctx.out("target_annotations.csv"), schema, target_ids, labels, header);
    csv::atomic_write(ctx.out("provenance.csv"), provenance_csv(provenance, header));
    csv::atomic_write(ctx.out("provenance.txt"), provenance_text(provenance, schema));
    std::printf("%s", provenance_text(provenance, schema).c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// stats / evaluate-labels

int cmd_stats(const Context& ctx, const std::string& annotations_path) {
    require_file(annotations_path, "annotations");
    const AttributeSchema schema = load_schema(ctx);
    const AnnotationTable table = load_annotations(annotations_path, schema);
    const StatsReport report = compute_stats(table.annotations, schema);
    csv::atomic_write(ctx.out("stats.csv"), stats_csv(report, schema, ctx.header("stats")));
    const std::string text = stats_text(report, schema);
    csv::atomic_write(ctx.out("stats.txt"), text);
    std::printf("%s", text.c_str());
    return 0;
}

int cmd_evaluate_labels(const Context& ctx, const std::string& predicted_path,
                        const std::string& truth_path) {
    require_file(predicted_path, "predicted annotations");
    require_file(truth_path, "truth annotations");
    const AttributeSchema schema = load_schema(ctx);
    const AnnotationTable predicted = load_annotations(predicted_path, schema);
    const AnnotationTable truth = load_annotations(truth_path, schema);
    if (predicted.sample_ids != truth.sample_ids)
        throw_data("evaluate-labels: files list different samples (align them first)");
    const QualityReport report = evaluate_labels(predicted.annotations, truth.annotations, schema);
    csv::atomic_write(ctx.out("quality.csv"),
                      quality_csv(report, schema, ctx.header("evaluate-labels")));
    const std::string text = quality_text(report, schema);
    csv::atomic_write(ctx.out("quality.txt"), text);
    std::printf("%s", text.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// recognition commands

PairSamplingConfig pair_config(const Context& ctx) {
    const json& r = ctx.config.at("recognition");
    PairSamplingConfig cfg;
    cfg.min_overlap = field<std::size_t>(r, "min_overlap");
    cfg.genuine_cap_per_subject = field<std::size_t>(r, "genuine_cap_per_subject");
    cfg.imposter_ratio = field<double>(r, "imposter_ratio");
    cfg.epochs = field<std::size_t>(r, "epochs");
    cfg.learning_rate = field<double>(r, "learning_rate");
    cfg.l2 = field<double>(r, "l2");
    cfg.validate();
    return cfg;
}

AnnotatedDataset recog_dataset(const Context& ctx, const std::string& embeddings_path,
                               const std::string& annotations_path) {
    require_file(embeddings_path, "embeddings");
    require_file(annotations_path, "annotations");
    return load_dataset(embeddings_path, annotations_path, load_schema(ctx));
}

int cmd_recog_train(const Context& ctx, const std::string& embeddings_path,
                    const std::string& annotations_path) {
    const AnnotatedDataset dataset = recog_dataset(ctx, embeddings_path, annotations_path);
    const double fraction = field<double>(ctx.config.at("recognition"), "train_fraction");
    const SubjectSplit split =
        split_subject_exclusive(dataset, fraction, derive_seed(ctx.seed, "recog-split"));
    const auto tr = train_indices(dataset, split);
    const LogRegComparator comparator =
        train_logreg(subset(dataset, tr), pair_config(ctx), derive_seed(ctx.seed, "recog-train"));

    const std::string header = ctx.header("recog-train");
    save_comparator(ctx.out("comparator.json"), comparator, dataset.schema);
    save_split(ctx.out("recog_split.csv"), split, header);
    const AttributeImportance importance = attribute_importance(comparator, dataset.schema);
    csv::atomic_write(ctx.out("importance.csv"),
                      importance_csv(importance, dataset.schema, header));
    std::printf("trained comparator on %zu genuine / %zu imposter pairs\n",
                comparator.genuine_pairs, comparator.imposter_pairs);
    return 0;
}

int cmd_recog_eval(const Context& ctx, const std::string& embeddings_path,
                   const std::string& annotations_path, const std::string& comparator_choice) {
    AnnotatedDataset dataset = recog_dataset(ctx, embeddings_path, annotations_path);
    const json& r = ctx.config.at("recognition");
    const std::size_t min_overlap = field<std::size_t>(r, "min_overlap");
    const std::vector<double> fmr_targets = field<std::vector<double>>(r, "fmr_targets");

    // optional attribute subset (e.g. attributes visible under a face mask):
    // annotations outside the subset become undefined, which removes them from
    // features and from the overlap count alike
    if (r.contains("attribute_subset") && r.at("attribute_subset").is_array() &&
        !r.at("attribute_subset").empty()) {
        std::vector<bool> keep(dataset.schema.size(), false);
        for (const json& name : r.at("attribute_subset")) {
            const auto idx = dataset.schema.index_of(name.get<std::string>());
            if (!idx)
                throw_config("recognition.attribute_subset: unknown attribute '" +
                             name.get<std::string>() + "'");
            keep[*idx] = true;
        }
        for (std::size_t i = 0; i < dataset.size(); ++i)
            for (std::size_t a = 0; a < dataset.schema.size(); ++a)
                if (!keep[a]) dataset.annotations.set(i, a, 0);
    }

    // evaluation runs on the subject-exclusive test part of the recognition split
    const double fraction = field<double>(r, "train_fraction");
    const SubjectSplit split =
        split_subject_exclusive(dataset, fraction, derive_seed(ctx.seed, "recog-split"));
    const AnnotatedDataset testset = subset(dataset, test_indices(dataset, split));

    PairScorer scorer;
    std::string tag;
    LogRegComparator comparator;
    if (comparator_choice == "hamming") {
        scorer = hamming_scorer(dataset.schema.size(), field<bool>(r, "hamming_literal"));
        tag = "hamming";
    } else {
        comparator = load_comparator(comparator_choice, dataset.schema);
        scorer = logreg_scorer(comparator);
        tag = "logreg";
    }

    // verification over every valid pair of the test part
    std::vector<ScoreRecord> records;
    for (std::size_t i = 0; i < testset.size(); ++i) {
        const auto a = testset.annotations.row_span(i);
        for (std::size_t j = i + 1; j < testset.size(); ++j) {
            const auto b = testset.annotations.row_span(j);
            if (overlap_count(a, b) < min_overlap) continue;
            records.push_back({testset.samples[i].sample_id, testset.samples[j].sample_id,
                               testset.samples[i].subject_id == testset.samples[j].subject_id,
                               scorer(a, b)});
        }
    }
    if (records.empty()) throw_data("recog-eval: no valid pairs in the test part");

    const std::string header = ctx.header("recog-eval");
    save_scores(ctx.out(tag + "_scores.csv"), records, header);
    const ScoreSet scores = to_score_set(records);
    const VerificationMetrics metrics = eval_verification(scores, fmr_targets);
    csv::atomic_write(ctx.out(tag + "_roc.csv"), roc_csv(metrics, header));
    csv::atomic_write(ctx.out(tag + "_summary.json"), verification_summary_json(metrics));

    const IdentificationProtocol closed = make_closed_set_protocol(testset);
    const CmcResult cmc = eval_closed_set(testset, closed, scorer, min_overlap);
    csv::atomic_write(ctx.out(tag + "_cmc.csv"), cmc_csv(cmc, header));

    const OpenSetProtocol open = make_open_set_protocol(
        testset, field<double>(r, "unenrolled_fraction"), derive_seed(ctx.seed, "recog-open"));
    const std::vector<DetPoint> det = eval_open_set(testset, open, scorer, min_overlap);
    csv::atomic_write(ctx.out(tag + "_det.csv"), det_csv(det, header));

    std::printf("%s: %zu pairs, AUC %.4f, EER %.4f, rank-1 %.4f (%zu probes, %zu excluded)\n",
                tag.c_str(), records.size(), metrics.auc, metrics.eer,
                cmc.cmc.empty() ? 0.0 : cmc.cmc[0], cmc.num_probes, cmc.excluded_probes);
    return 0;
}

int cmd_fuse(const Context& ctx, const std::string& primary_path,
             const std::string& secondary_path) {
    require_file(primary_path, "primary scores");
    require_file(secondary_path, "secondary scores");
    const auto primary_records = load_scores(primary_path);
    const auto secondary_records = load_scores(secondary_path);
    if (primary_records.size() != secondary_records.size())
        throw_data("fuse: score files have different pair counts");
    for (std::size_t i = 0; i < primary_records.size(); ++i)
        if (primary_records[i].ref_id != secondary_records[i].ref_id ||
            primary_records[i].probe_id != secondary_records[i].probe_id ||
            primary_records[i].genuine != secondary_records[i].genuine)
            throw_data("fuse: score files are not pair-aligned at row " + std::to_string(i + 1));

    const json& r = ctx.config.at("recognition");
    const std::string mode_name = field<std::string>(r, "fusion_mode");
    FusionMode mode;
    if (mode_name == "one_minus_eer")
        mode = FusionMode::OneMinusEer;
    else if (mode_name == "inverse_eer")
        mode = FusionMode::InverseEer;
    else
        throw_config("recognition.fusion_mode must be 'one_minus_eer' or 'inverse_eer'");

    const ScoreSet primary = to_score_set(primary_records);
    const ScoreSet secondary = to_score_set(secondary_records);
    const double eer1 = eval_verification(primary).eer;
    const double eer2 = eval_verification(secondary).eer;
    const ScoreSet fused = fuse_scores(primary, secondary, eer1, eer2, mode);

    // reattach pair ids in input order
    std::vector<ScoreRecord> fused_records = primary_records;
    std::size_t gi = 0, ii = 0;
    for (ScoreRecord& rec : fused_records)
        rec.score = rec.genuine ? fused.genuine[gi++] : fused.imposter[ii++];

    const std::string header = ctx.header("fuse");
    save_scores(ctx.out("fused_scores.csv"), fused_records, header);
    const std::vector<double> fmr_targets = field<std::vector<double>>(r, "fmr_targets");
    const VerificationMetrics metrics = eval_verification(fused, fmr_targets);
    csv::atomic_write(ctx.out("fused_summary.json"), verification_summary_json(metrics));
    const auto [w1, w2] = fusion_weights(eer1, eer2, mode);
    std::printf("fused (w=%.4f/%.4f from EER %.4f/%.4f): AUC %.4f, EER %.4f\n", w1, w2, eer1,
                eer2, metrics.auc, metrics.eer);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reliability-aware attribute annotation transfer toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<int> workers_flag;
    std::optional<std::string> out_flag;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed_flag, "global seed override");
    app.add_option("--workers", workers_flag, "worker threads (results are worker-independent)");
    app.add_option("--out", out_flag, "output directory override");

    auto* generate = app.add_subcommand("generate", "draw synthetic source/target datasets");

    auto* clean = app.add_subcommand("clean", "binarize continuous annotations via threshold search");
    std::string scores_path, oracle_path;
    clean->add_option("--scores", scores_path, "continuous annotation CSV")->required();
    clean->add_option("--oracle", oracle_path, "correctness judgments CSV")->required();

    auto* train_mac = app.add_subcommand("train-mac", "train the attribute classifier of one source");
    std::string source_name;
    train_mac->add_option("--source", source_name, "source name from the config")->required();

    auto* calibrate_cmd = app.add_subcommand("calibrate", "derive reliability thresholds for one source");
    std::string calib_source;
    calibrate_cmd->add_option("--source", calib_source, "source name from the config")->required();

    auto* transfer_cmd = app.add_subcommand("transfer", "aggregate source annotations onto the target");

    auto* stats = app.add_subcommand("stats", "annotation distribution report");
    std::string stats_annotations;
    stats->add_option("--annotations", stats_annotations, "annotation CSV")->required();

    auto* evaluate = app.add_subcommand("evaluate-labels", "accuracy/precision/recall vs a truth file");
    std::string predicted_path, truth_path;
    evaluate->add_option("--predicted", predicted_path, "predicted annotation CSV")->required();
    evaluate->add_option("--truth", truth_path, "ground-truth annotation CSV")->required();

    auto* recog_train = app.add_subcommand("recog-train", "fit the logistic comparator");
    std::string recog_embeddings, recog_annotations;
    recog_train->add_option("--embeddings", recog_embeddings, "embeddings CSV")->required();
    recog_train->add_option("--annotations", recog_annotations, "annotation CSV")->required();

    auto* recog_eval = app.add_subcommand("recog-eval", "verification/identification evaluation");
    std::string eval_embeddings, eval_annotations, comparator_choice = "hamming";
    recog_eval->add_option("--embeddings", eval_embeddings, "embeddings CSV")->required();
    recog_eval->add_option("--annotations", eval_annotations, "annotation CSV")->required();
    recog_eval->add_option("--comparator", comparator_choice,
                           "'hamming' or a comparator JSON path");

    auto* fuse = app.add_subcommand("fuse", "EER-weighted score fusion of two score files");
    std::string primary_scores, secondary_scores;
    fuse->add_option("--primary", primary_scores, "primary score CSV")->required();
    fuse->add_option("--secondary", secondary_scores, "secondary score CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const Context ctx = make_context(config_path, seed_flag, workers_flag, out_flag);
        if (generate->parsed()) return cmd_generate(ctx);
        if (clean->parsed()) return cmd_clean(ctx, scores_path, oracle_path);
        if (train_mac->parsed()) return cmd_train_mac(ctx, source_name);
        if (calibrate_cmd->parsed()) return cmd_calibrate(ctx, calib_source);
        if (transfer_cmd->parsed()) return cmd_transfer(ctx);
        if (stats->parsed()) return cmd_stats(ctx, stats_annotations);
        if (evaluate->parsed()) return cmd_evaluate_labels(ctx, predicted_path, truth_path);
        if (recog_train->parsed()) return cmd_recog_train(ctx, recog_embeddings, recog_annotations);
        if (recog_eval->parsed())
            return cmd_recog_eval(ctx, eval_embeddings, eval_annotations, comparator_choice);
        if (fuse->parsed()) return cmd_fuse(ctx, primary_scores, secondary_scores);
        std::fprintf(stderr, "error: category=config message=\"no subcommand\"\n");
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: category=%s message=\"%s\"\n", category_name(e.category()),
                     e.what());
        switch (e.category()) {
            case ErrorCategory::Config: return 2;
            case ErrorCategory::Data: return 3;
            case ErrorCategory::Stage: return 4;
        }
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: category=stage message=\"%s\"\n", e.what());
        return 4;
    }
}
