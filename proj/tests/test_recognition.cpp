#include <doctest.h>

#include <cmath>

#include "relabel/errors.hpp"
#include "relabel/recognition.hpp"
#include "relabel/rng.hpp"
#include "relabel/split.hpp"
#include "relabel/synthetic.hpp"

#include "support/tmpdir.hpp"

using namespace relabel;

namespace {

std::vector<std::int8_t> row(std::initializer_list<int> values) {
    std::vector<std::int8_t> out;
    for (int v : values) out.push_back(static_cast<std::int8_t>(v));
    return out;
}

// attributes deterministic per identity, optionally noisy per sample
AnnotatedDataset identity_dataset(std::size_t identities, std::size_t samples_per,
                                  std::size_t num_attrs, double flip_rate, std::uint64_t seed) {
    AnnotatedDataset ds;
    ds.schema = default_synthetic_schema(num_attrs);
    Rng rng(seed);
    std::size_t n = identities * samples_per;
    ds.embeddings = Matrix(n, 1);
    ds.annotations = AnnotationMatrix(n, num_attrs);
    std::size_t r = 0;
    for (std::size_t id = 0; id < identities; ++id) {
        std::vector<std::int8_t> latent(num_attrs);
        for (auto& v : latent) v = rng.bernoulli(0.5) ? 1 : -1;
        char subj[32];
        std::snprintf(subj, sizeof(subj), "id%03zu", id);
        for (std::size_t s = 0; s < samples_per; ++s, ++r) {
            char sid[48];
            std::snprintf(sid, sizeof(sid), "id%03zu_s%02zu", id, s);
            ds.samples.push_back({sid, subj});
            for (std::size_t a = 0; a < num_attrs; ++a) {
                std::int8_t v = latent[a];
                if (flip_rate > 0.0 && rng.bernoulli(flip_rate)) v = -v;
                ds.annotations.set(r, a, v);
            }
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("joint features follow the three-slot encoding") {
    const auto f1 = joint_features(row({1}), row({1}));
    CHECK(f1.slots == std::vector<std::uint8_t>{1, 0, 0});
    const auto f2 = joint_features(row({-1}), row({-1}));
    CHECK(f2.slots == std::vector<std::uint8_t>{0, 1, 0});
    const auto f3 = joint_features(row({1}), row({-1}));
    CHECK(f3.slots == std::vector<std::uint8_t>{0, 0, 1});
    const auto f4 = joint_features(row({1}), row({0}));
    CHECK(f4.slots == std::vector<std::uint8_t>{0, 0, 0});
    CHECK_THROWS_AS(joint_features(row({1}), row({1, -1})), Error);
}

TEST_CASE("joint feature slots are exclusive per attribute") {
    Rng rng(3);
    for (int repeat = 0; repeat < 200; ++repeat) {
        std::vector<std::int8_t> a(6), b(6);
        for (auto& v : a) v = static_cast<std::int8_t>(static_cast<int>(rng.bounded(3)) - 1);
        for (auto& v : b) v = static_cast<std::int8_t>(static_cast<int>(rng.bounded(3)) - 1);
        const JointFeature f = joint_features(a, b);
        for (std::size_t at = 0; at < 6; ++at) {
            const int sum = f.slots[3 * at] + f.slots[3 * at + 1] + f.slots[3 * at + 2];
            CHECK(sum <= 1);
            if (a[at] == 0 || b[at] == 0) CHECK(sum == 0);
        }
    }
}

TEST_CASE("hamming score counts disagreements over the attribute count") {
    // identical fully annotated rows
    const auto same = joint_features(row({1, -1, 1, -1}), row({1, -1, 1, -1}));
    CHECK(hamming_score(same, 4) == doctest::Approx(1.0));
    // all four disagree
    const auto diff = joint_features(row({1, -1, 1, -1}), row({-1, 1, -1, 1}));
    CHECK(hamming_score(diff, 4) == doctest::Approx(0.0));
    // 3 agreements + 1 disagreement
    const auto mixed = joint_features(row({1, -1, 1, -1}), row({1, -1, 1, 1}));
    CHECK(hamming_score(mixed, 4) == doctest::Approx(0.75));
    // literal mode counts every set slot; constant 0 for full annotation
    CHECK(hamming_score(same, 4, true) == doctest::Approx(0.0));
    CHECK(hamming_score(mixed, 4, true) == doctest::Approx(0.0));
}

TEST_CASE("hamming score is symmetric") {
    Rng rng(5);
    for (int repeat = 0; repeat < 100; ++repeat) {
        std::vector<std::int8_t> a(8), b(8);
        for (auto& v : a) v = static_cast<std::int8_t>(static_cast<int>(rng.bounded(3)) - 1);
        for (auto& v : b) v = static_cast<std::int8_t>(static_cast<int>(rng.bounded(3)) - 1);
        CHECK(hamming_score(joint_features(a, b), 8) == hamming_score(joint_features(b, a), 8));
    }
}

TEST_CASE("valid filter keeps overlap >= threshold and is monotone") {
    std::vector<ComparisonPair> pairs;
    for (std::size_t overlap : {0u, 5u, 9u, 10u, 11u, 20u})
        pairs.push_back({0, 1, overlap, false});

    const auto kept = valid_filter(pairs, 10);
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].overlap == 10);  // boundary inclusive

    const auto lower = valid_filter(pairs, 5);
    // lowering the threshold never removes a previously retained pair
    for (const auto& p : kept) {
        bool found = false;
        for (const auto& q : lower)
            if (q.overlap == p.overlap) found = true;
        CHECK(found);
    }
}

TEST_CASE("overlap_count counts jointly defined attributes") {
    CHECK(overlap_count(row({1, 0, -1, 1}), row({1, 1, 0, -1})) == 2);
    CHECK(overlap_count(row({0, 0}), row({0, 0})) == 0);
}

TEST_CASE("logreg comparator learns identity-deterministic attributes") {
    const AnnotatedDataset ds = identity_dataset(40, 4, 12, 0.0, 101);
    const SubjectSplit split = split_subject_exclusive(ds, 0.5, 7);
    const auto tr = train_indices(ds, split);
    const auto te = test_indices(ds, split);
    const AnnotatedDataset train_part = subset(ds, tr);
    const AnnotatedDataset test_part = subset(ds, te);

    PairSamplingConfig cfg;
    cfg.min_overlap = 10;
    const LogRegComparator comparator = train_logreg(train_part, cfg, 9);
    CHECK(comparator.weights.size() == 3 * 12);
    CHECK(comparator.genuine_pairs > 0);

    // test AUC via a simple pair sweep
    std::vector<double> genuine, imposter;
    for (std::size_t i = 0; i < test_part.size(); ++i)
        for (std::size_t j = i + 1; j < test_part.size(); ++j) {
            const auto a = test_part.annotations.row_span(i);
            const auto b = test_part.annotations.row_span(j);
            if (overlap_count(a, b) < 10) continue;
            const double s = logreg_score(comparator, joint_features(a, b));
            if (test_part.samples[i].subject_id == test_part.samples[j].subject_id)
                genuine.push_back(s);
            else
                imposter.push_back(s);
        }
    REQUIRE(!genuine.empty());
    REQUIRE(!imposter.empty());
    // rank-sum AUC
    std::size_t wins = 0, ties = 0;
    for (double g : genuine)
        for (double i : imposter) {
            if (g > i) ++wins;
            if (g == i) ++ties;
        }
    const double auc = (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
                       (static_cast<double>(genuine.size()) * static_cast<double>(imposter.size()));
    CHECK(auc >= 0.99);
}

TEST_CASE("logreg on shuffled labels is chance level") {
    AnnotatedDataset ds = identity_dataset(60, 4, 12, 0.5, 303);  // 50% flips: no identity signal
    PairSamplingConfig cfg;
    cfg.min_overlap = 10;
    const LogRegComparator comparator = train_logreg(ds, cfg, 11);

    Rng rng(4);
    std::vector<double> genuine, imposter;
    for (int repeat = 0; repeat < 4000; ++repeat) {
        const std::size_t i = rng.bounded(ds.size());
        const std::size_t j = rng.bounded(ds.size());
        if (i == j) continue;
        const auto a = ds.annotations.row_span(i);
        const auto b = ds.annotations.row_span(j);
        const double s = logreg_score(comparator, joint_features(a, b));
        if (ds.samples[i].subject_id == ds.samples[j].subject_id)
            genuine.push_back(s);
        else
            imposter.push_back(s);
    }
    REQUIRE(genuine.size() > 30);
    std::size_t wins = 0, ties = 0;
    for (double g : genuine)
        for (double i : imposter) {
            if (g > i) ++wins;
            if (g == i) ++ties;
        }
    const double auc = (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
                       (static_cast<double>(genuine.size()) * static_cast<double>(imposter.size()));
    CHECK(auc == doctest::Approx(0.5).epsilon(0.12));
}

TEST_CASE("logreg_score hand values") {
    LogRegComparator comparator;
    comparator.num_attributes = 2;
    comparator.weights = {0.5, -0.25, 1.0, 0.0, 0.0, -2.0};
    comparator.bias = 0.0;

    JointFeature zero;
    zero.slots.assign(6, 0);
    CHECK(logreg_score(comparator, zero) == doctest::Approx(0.5));  // sigmoid(0)

    comparator.bias = 1.5;
    CHECK(logreg_score(comparator, zero) == doctest::Approx(1.0 / (1.0 + std::exp(-1.5))));

    JointFeature f;
    f.slots = {1, 0, 0, 0, 0, 1};  // picks w0 + w5
    const double z = 1.5 + 0.5 - 2.0;
    CHECK(logreg_score(comparator, f) == doctest::Approx(1.0 / (1.0 + std::exp(-z))));
}

TEST_CASE("attribute importance reshapes weights by slot type") {
    const AttributeSchema schema = default_synthetic_schema(3);
    LogRegComparator comparator;
    comparator.num_attributes = 3;
    comparator.weights = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    const AttributeImportance imp = attribute_importance(comparator, schema);
    CHECK(imp.true_true == std::vector<double>{1, 4, 7});
    CHECK(imp.false_false == std::vector<double>{2, 5, 8});
    CHECK(imp.differ == std::vector<double>{3, 6, 9});

    SUBCASE("zero comparator gives zero tables") {
        comparator.weights.assign(9, 0.0);
        const AttributeImportance z = attribute_importance(comparator, schema);
        for (double v : z.true_true) CHECK(v == 0.0);
        for (double v : z.differ) CHECK(v == 0.0);
    }
    SUBCASE("row count matches the schema per slot type") {
        CHECK(imp.true_true.size() == schema.size());
        CHECK(imp.false_false.size() == schema.size());
        CHECK(imp.differ.size() == schema.size());
    }
}

TEST_CASE("a fully identity-determining attribute dominates the differ table") {
    // attribute 0 flips never; attributes 1..5 flip half the time
    AnnotatedDataset ds = identity_dataset(50, 5, 12, 0.0, 42);
    Rng rng(8);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t a = 1; a < 6; ++a)
            if (rng.bernoulli(0.5))
                ds.annotations.set(i, a, static_cast<std::int8_t>(-ds.annotations.at(i, a)));

    PairSamplingConfig cfg;
    cfg.min_overlap = 10;
    const LogRegComparator comparator = train_logreg(ds, cfg, 77);
    const AttributeImportance imp = attribute_importance(comparator, ds.schema);
    // disagreement on the stable attribute is the strongest imposter signal
    for (std::size_t a = 1; a < 6; ++a) CHECK(imp.differ[0] < imp.differ[a]);
}

TEST_CASE("comparator persistence round trips") {
    test_support::TmpDir dir("cmp");
    const AttributeSchema schema = default_synthetic_schema(2);
    LogRegComparator comparator;
    comparator.num_attributes = 2;
    comparator.weights = {0.5, -1.0, 2.0, 0.0, 0.25, -0.125};
    comparator.bias = 0.375;
    comparator.genuine_pairs = 10;
    comparator.imposter_pairs = 12;
    comparator.seed = 3;
    const std::string path = (dir.path() / "comparator.json").string();
    save_comparator(path, comparator, schema);
    const LogRegComparator loaded = load_comparator(path, schema);
    CHECK(loaded.weights == comparator.weights);
    CHECK(loaded.bias == comparator.bias);
    CHECK(loaded.genuine_pairs == 10);
    CHECK_THROWS_AS(load_comparator(path, default_synthetic_schema(3)), Error);
}
