#include <doctest.h>

#include <cmath>
#include <limits>

#include "relabel/errors.hpp"
#include "relabel/metrics.hpp"
#include "relabel/rng.hpp"
#include "relabel/synthetic.hpp"

#include "support/metric_reference.hpp"
#include "support/tmpdir.hpp"

using namespace relabel;

namespace {

AnnotatedDataset identity_dataset(std::size_t identities, std::size_t samples_per,
                                  std::size_t num_attrs, std::uint64_t seed) {
    AnnotatedDataset ds;
    ds.schema = default_synthetic_schema(num_attrs);
    Rng rng(seed);
    ds.embeddings = Matrix(identities * samples_per, 1);
    ds.annotations = AnnotationMatrix(identities * samples_per, num_attrs);
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
            for (std::size_t a = 0; a < num_attrs; ++a) ds.annotations.set(r, a, latent[a]);
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("verification: perfect separation gives EER 0 and AUC 1") {
    ScoreSet scores;
    scores.genuine = {0.9, 0.8, 0.95};
    scores.imposter = {0.1, 0.2, 0.3};
    const VerificationMetrics m = eval_verification(scores);
    CHECK(m.eer == doctest::Approx(0.0));
    CHECK(m.auc == doctest::Approx(1.0));
}

TEST_CASE("verification hand fixtures") {
    SUBCASE("interleaved pairs give EER 0.5") {
        ScoreSet scores;
        scores.genuine = {0.9, 0.1};
        scores.imposter = {0.8, 0.0};
        const VerificationMetrics m = eval_verification(scores);
        CHECK(m.eer == doctest::Approx(0.5));
    }
    SUBCASE("FNMR at FMR target 1/3") {
        ScoreSet scores;
        scores.genuine = {0.9, 0.8, 0.2};
        scores.imposter = {0.7, 0.3, 0.1};
        std::vector<double> targets{1.0 / 3.0};
        const VerificationMetrics m = eval_verification(scores, targets);
        REQUIRE(m.fnmr_at_fmr.size() == 1);
        CHECK(m.fnmr_at_fmr[0].second == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("empty score list errors") {
        ScoreSet scores;
        scores.genuine = {0.5};
        CHECK_THROWS_AS(eval_verification(scores), Error);
    }
}

TEST_CASE("verification matches the brute-force recount on random score sets") {
    Rng rng(123);
    for (int repeat = 0; repeat < 100; ++repeat) {
        const std::size_t ng = 1 + rng.bounded(100);
        const std::size_t ni = 1 + rng.bounded(100);
        std::vector<double> genuine(ng), imposter(ni);
        // quantized scores force ties across and within lists
        for (double& s : genuine) s = 0.05 * static_cast<double>(rng.bounded(21));
        for (double& s : imposter) s = 0.05 * static_cast<double>(rng.bounded(21));

        const std::vector<double> targets{0.01, 0.1, 0.25};
        const VerificationMetrics m =
            eval_verification({genuine, imposter}, targets);
        const auto ref = test_support::verification_reference(genuine, imposter, targets);

        REQUIRE(m.roc.size() == ref.roc.size());
        for (std::size_t k = 0; k < m.roc.size(); ++k) {
            CHECK(std::fabs(m.roc[k].fmr - ref.roc[k].fmr) <= 1e-12);
            CHECK(std::fabs(m.roc[k].fnmr - ref.roc[k].fnmr) <= 1e-12);
        }
        CHECK(std::fabs(m.eer - ref.eer) <= 1e-12);
        CHECK(std::fabs(m.auc - ref.auc) <= 1e-12);
        for (std::size_t t = 0; t < targets.size(); ++t)
            CHECK(std::fabs(m.fnmr_at_fmr[t].second - ref.fnmr_at_fmr[t].second) <= 1e-12);
    }
}

TEST_CASE("EER and CMC are invariant under monotone score transforms") {
    Rng rng(321);
    std::vector<double> genuine(60), imposter(80);
    for (double& s : genuine) s = rng.uniform01();
    for (double& s : imposter) s = rng.uniform01() * 0.9;
    const VerificationMetrics base = eval_verification({genuine, imposter});

    auto transform = [](double s) { return std::exp(3.0 * s) - 0.5; };  // strictly increasing
    std::vector<double> tg = genuine, ti = imposter;
    for (double& s : tg) s = transform(s);
    for (double& s : ti) s = transform(s);
    const VerificationMetrics mapped = eval_verification({tg, ti});
    CHECK(mapped.eer == doctest::Approx(base.eer).epsilon(1e-12));
    CHECK(mapped.auc == doctest::Approx(base.auc).epsilon(1e-12));
}

TEST_CASE("closed-set identification on identity-deterministic attributes") {
    const AnnotatedDataset ds = identity_dataset(20, 4, 14, 77);
    const IdentificationProtocol protocol = make_closed_set_protocol(ds);
    CHECK(protocol.gallery.size() == 20);
    CHECK(protocol.probes.size() == 60);

    const CmcResult result = eval_closed_set(ds, protocol, hamming_scorer(14), 10);
    CHECK(result.num_probes == 60);
    CHECK(result.excluded_probes == 0);
    // distinct identity vectors (checked by construction at this seed): rank-1 everywhere
    CHECK(result.cmc[0] == doctest::Approx(1.0));
    // CMC is nondecreasing and ends at 1
    for (std::size_t k = 1; k < result.cmc.size(); ++k) CHECK(result.cmc[k] >= result.cmc[k - 1]);
    CHECK(result.cmc.back() == doctest::Approx(1.0));
}

TEST_CASE("closed-set matches a literal recount on a random fixture") {
    Rng rng(999);
    const std::size_t identities = 8, samples_per = 3, num_attrs = 12;
    AnnotatedDataset ds = identity_dataset(identities, samples_per, num_attrs, 3);
    // random per-sample noise so ranks are nontrivial
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t a = 0; a < num_attrs; ++a) {
            const auto dice = rng.bounded(10);
            if (dice == 0)
                ds.annotations.set(i, a, 0);
            else if (dice == 1)
                ds.annotations.set(i, a, static_cast<std::int8_t>(-ds.annotations.at(i, a)));
        }

    const IdentificationProtocol protocol = make_closed_set_protocol(ds);
    const PairScorer scorer = hamming_scorer(num_attrs);
    const std::size_t min_overlap = 10;
    const CmcResult result = eval_closed_set(ds, protocol, scorer, min_overlap);

    // literal recount
    std::vector<std::vector<double>> scores;
    std::vector<std::size_t> mated;
    for (std::size_t probe : protocol.probes) {
        std::vector<double> row;
        std::size_t mate = 0;
        for (std::size_t g = 0; g < protocol.gallery.size(); ++g) {
            const std::size_t ref = protocol.gallery[g];
            const auto a = ds.annotations.row_span(ref);
            const auto b = ds.annotations.row_span(probe);
            row.push_back(overlap_count(a, b) >= min_overlap
                              ? scorer(a, b)
                              : -std::numeric_limits<double>::infinity());
            if (ds.samples[ref].subject_id == ds.samples[probe].subject_id) mate = g;
        }
        scores.push_back(std::move(row));
        mated.push_back(mate);
    }
    const std::vector<double> ref_cmc = test_support::cmc_reference(scores, mated);
    REQUIRE(result.cmc.size() == ref_cmc.size());
    for (std::size_t k = 0; k < ref_cmc.size(); ++k)
        CHECK(std::fabs(result.cmc[k] - ref_cmc[k]) <= 1e-12);
}

TEST_CASE("open-set DET endpoints and recount equivalence") {
    const AnnotatedDataset ds = identity_dataset(15, 3, 12, 55);
    const OpenSetProtocol protocol = make_open_set_protocol(ds, 0.2, 9);
    REQUIRE(!protocol.unenrolled_probes.empty());
    REQUIRE(!protocol.gallery.empty());

    const PairScorer scorer = hamming_scorer(12);
    const std::vector<DetPoint> det = eval_open_set(ds, protocol, scorer, 10);

    // extreme thresholds: +inf endpoint rejects everything
    CHECK(det.back().fpir == doctest::Approx(0.0));
    CHECK(det.back().fnir == doctest::Approx(1.0));
    // lowest threshold accepts every unenrolled probe (identity vectors are
    // fully annotated, so every comparison is valid)
    CHECK(det.front().fpir == doctest::Approx(1.0));

    // literal recount
    std::vector<double> unenrolled_max;
    for (std::size_t probe : protocol.unenrolled_probes) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t ref : protocol.gallery) {
            const auto a = ds.annotations.row_span(ref);
            const auto b = ds.annotations.row_span(probe);
            if (overlap_count(a, b) < 10) continue;
            best = std::max(best, scorer(a, b));
        }
        unenrolled_max.push_back(best);
    }
    std::vector<std::pair<double, bool>> enrolled;
    for (std::size_t probe : protocol.enrolled_probes) {
        double mated = -std::numeric_limits<double>::infinity();
        double best_other = -std::numeric_limits<double>::infinity();
        for (std::size_t ref : protocol.gallery) {
            const auto a = ds.annotations.row_span(ref);
            const auto b = ds.annotations.row_span(probe);
            if (overlap_count(a, b) < 10) continue;
            const double s = scorer(a, b);
            if (ds.samples[ref].subject_id == ds.samples[probe].subject_id)
                mated = s;
            else
                best_other = std::max(best_other, s);
        }
        enrolled.emplace_back(mated, mated > best_other);
    }
    const auto ref = test_support::det_reference(unenrolled_max, enrolled);
    REQUIRE(det.size() == ref.points.size());
    for (std::size_t k = 0; k < det.size(); ++k) {
        CHECK(std::fabs(det[k].fpir - ref.points[k].fpir) <= 1e-12);
        CHECK(std::fabs(det[k].fnir - ref.points[k].fnir) <= 1e-12);
    }

    SUBCASE("empty unenrolled set is an error") {
        OpenSetProtocol bad = protocol;
        bad.unenrolled_probes.clear();
        CHECK_THROWS_AS(eval_open_set(ds, bad, scorer, 10), Error);
    }
}

TEST_CASE("fusion weights and ranking invariance") {
    SUBCASE("equal EERs split evenly") {
        const auto [w1, w2] = fusion_weights(0.2, 0.2, FusionMode::OneMinusEer);
        CHECK(w1 == doctest::Approx(0.5));
        CHECK(w2 == doctest::Approx(0.5));
    }
    SUBCASE("EERs (0.0, 0.5) weight 2:1") {
        const auto [w1, w2] = fusion_weights(0.0, 0.5, FusionMode::OneMinusEer);
        CHECK(w1 == doctest::Approx(2.0 / 3.0));
        CHECK(w2 == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("inverse mode favors the lower EER more aggressively") {
        const auto [w1, w2] = fusion_weights(0.01, 0.1, FusionMode::InverseEer);
        CHECK(w1 == doctest::Approx(10.0 / 11.0));
        CHECK(w2 == doctest::Approx(1.0 / 11.0));
    }
    SUBCASE("fusing a system with itself preserves the ranking") {
        Rng rng(77);
        ScoreSet scores;
        scores.genuine.resize(40);
        scores.imposter.resize(40);
        for (double& s : scores.genuine) s = rng.uniform(0.2, 1.0);
        for (double& s : scores.imposter) s = rng.uniform(0.0, 0.8);
        const ScoreSet fused = fuse_scores(scores, scores, 0.1, 0.1);
        const VerificationMetrics base = eval_verification(scores);
        const VerificationMetrics after = eval_verification(fused);
        CHECK(after.eer == doctest::Approx(base.eer).epsilon(1e-12));
        CHECK(after.auc == doctest::Approx(base.auc).epsilon(1e-12));
    }
    SUBCASE("misaligned lists error") {
        ScoreSet a, b;
        a.genuine = {0.5, 0.6};
        a.imposter = {0.1};
        b.genuine = {0.5};
        b.imposter = {0.1};
        CHECK_THROWS_AS(fuse_scores(a, b, 0.1, 0.1), Error);
    }
}

TEST_CASE("score files round trip") {
    test_support::TmpDir dir("scores");
    std::vector<ScoreRecord> records{
        {"r1", "p1", true, 0.875},
        {"r1", "p2", false, 0.125},
        {"r2", "p3", true, 1.0 / 3.0},
    };
    const std::string path = (dir.path() / "scores.csv").string();
    save_scores(path, records);
    const auto loaded = load_scores(path);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].ref_id == "r1");
    CHECK(loaded[1].genuine == false);
    CHECK(loaded[2].score == records[2].score);
    const ScoreSet set = to_score_set(loaded);
    CHECK(set.genuine.size() == 2);
    CHECK(set.imposter.size() == 1);
}
