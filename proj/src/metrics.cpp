#include "relabel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"
#include "relabel/rng.hpp"

namespace relabel {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();
}  // namespace

VerificationMetrics eval_verification(const ScoreSet& scores,
                                      std::span<const double> fmr_targets) {
    if (scores.genuine.empty() || scores.imposter.empty())
        throw_data("eval_verification: genuine and imposter score lists must be nonempty");

    std::vector<double> genuine = scores.genuine;
    std::vector<double> imposter = scores.imposter;
    std::sort(genuine.begin(), genuine.end());
    std::sort(imposter.begin(), imposter.end());

    std::vector<double> thresholds;
    thresholds.reserve(genuine.size() + imposter.size());
    thresholds.insert(thresholds.end(), genuine.begin(), genuine.end());
    thresholds.insert(thresholds.end(), imposter.begin(), imposter.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    VerificationMetrics metrics;
    const double ng = static_cast<double>(genuine.size());
    const double ni = static_cast<double>(imposter.size());
    for (double tau : thresholds) {
        const double fmr =
            static_cast<double>(imposter.end() -
                                std::lower_bound(imposter.begin(), imposter.end(), tau)) / ni;
        const double fnmr =
            static_cast<double>(std::lower_bound(genuine.begin(), genuine.end(), tau) -
                                genuine.begin()) / ng;
        metrics.roc.push_back({tau, fmr, fnmr});
    }
    // full-reject endpoint completes the curve and guarantees an EER crossing
    metrics.roc.push_back({kPosInf, 0.0, 1.0});

    // EER: FMR - FNMR is non-increasing over the sweep; interpolate at the
    // sign change.
    metrics.eer = 0.5;
    for (std::size_t k = 0; k + 1 < metrics.roc.size(); ++k) {
        const double d0 = metrics.roc[k].fmr - metrics.roc[k].fnmr;
        const double d1 = metrics.roc[k + 1].fmr - metrics.roc[k + 1].fnmr;
        if (d0 == 0.0) {
            metrics.eer = metrics.roc[k].fmr;
            metrics.eer_threshold = metrics.roc[k].threshold;
            break;
        }
        if (d0 > 0.0 && d1 <= 0.0) {
            const double t = d0 / (d0 - d1);
            metrics.eer =
                metrics.roc[k].fmr + t * (metrics.roc[k + 1].fmr - metrics.roc[k].fmr);
            metrics.eer_threshold = metrics.roc[k].threshold;
            break;
        }
    }

    // AUC: trapezoid over (FMR, 1-FNMR), swept from FMR=1 down to 0.
    double auc = 0.0;
    for (std::size_t k = 0; k + 1 < metrics.roc.size(); ++k) {
        const double dx = metrics.roc[k].fmr - metrics.roc[k + 1].fmr;
        const double y0 = 1.0 - metrics.roc[k].fnmr;
        const double y1 = 1.0 - metrics.roc[k + 1].fnmr;
        auc += dx * (y0 + y1) * 0.5;
    }
    metrics.auc = auc;

    for (double target : fmr_targets) {
        double fnmr = 1.0;
        for (const RocPoint& point : metrics.roc) {
            if (point.fmr <= target) {  // smallest threshold within the budget
                fnmr = point.fnmr;
                break;
            }
        }
        metrics.fnmr_at_fmr.emplace_back(target, fnmr);
    }
    return metrics;
}

namespace {

std::size_t defined_count(std::span<const std::int8_t> row) {
    std::size_t count = 0;
    for (std::int8_t v : row)
        if (v != 0) ++count;
    return count;
}

// subject -> sample indices, subjects in sorted order
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by_subject(
    const AnnotatedDataset& dataset) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        groups[dataset.samples[i].subject_id].push_back(i);
    return {groups.begin(), groups.end()};
}

// the sample with the most defined annotations; ties by lexicographic sample id
std::size_t pick_reference(const AnnotatedDataset& dataset, const std::vector<std::size_t>& members) {
    std::size_t best = members[0];
    std::size_t best_count = defined_count(dataset.annotations.row_span(best));
    for (std::size_t k = 1; k < members.size(); ++k) {
        const std::size_t candidate = members[k];
        const std::size_t count = defined_count(dataset.annotations.row_span(candidate));
        if (count > best_count ||
            (count == best_count &&
             dataset.samples[candidate].sample_id < dataset.samples[best].sample_id)) {
            best = candidate;
            best_count = count;
        }
    }
    return best;
}

}  // namespace

IdentificationProtocol make_closed_set_protocol(const AnnotatedDataset& testset) {
    IdentificationProtocol protocol;
    for (const auto& [subject, members] : group_by_subject(testset)) {
        const std::size_t ref = pick_reference(testset, members);
        protocol.gallery.push_back(ref);
        for (std::size_t i : members)
            if (i != ref) protocol.probes.push_back(i);
    }
    if (protocol.gallery.empty()) throw_data("closed-set protocol: empty gallery");
    return protocol;
}

CmcResult eval_closed_set(const AnnotatedDataset& testset, const IdentificationProtocol& protocol,
                          const PairScorer& scorer, std::size_t min_overlap) {
    if (protocol.gallery.empty()) throw_data("eval_closed_set: empty gallery");
    CmcResult result;
    result.cmc.assign(protocol.gallery.size(), 0.0);

    std::vector<std::size_t> rank_hits(protocol.gallery.size(), 0);
    for (std::size_t probe : protocol.probes) {
        const auto probe_row = testset.annotations.row_span(probe);
        const std::string& probe_subject = testset.samples[probe].subject_id;

        double mated = kNegInf;
        std::vector<double> nonmated;
        bool any_valid = false;
        for (std::size_t ref : protocol.gallery) {
            const auto ref_row = testset.annotations.row_span(ref);
            double score = kNegInf;
            if (overlap_count(ref_row, probe_row) >= min_overlap) {
                score = scorer(ref_row, probe_row);
                any_valid = true;
            }
            if (testset.samples[ref].subject_id == probe_subject)
                mated = score;
            else
                nonmated.push_back(score);
        }
        if (!any_valid) {
            ++result.excluded_probes;
            continue;
        }
        ++result.num_probes;
        // pessimistic rank: ties count against the mated reference
        std::size_t rank = 1;
        for (double score : nonmated)
            if (score >= mated) ++rank;
        ++rank_hits[rank - 1];
    }

    if (result.num_probes > 0) {
        std::size_t cumulative = 0;
        for (std::size_t k = 0; k < result.cmc.size(); ++k) {
            cumulative += rank_hits[k];
            result.cmc[k] = static_cast<double>(cumulative) / static_cast<double>(result.num_probes);
        }
    }
    return result;
}

OpenSetProtocol make_open_set_protocol(const AnnotatedDataset& testset,
                                       double unenrolled_fraction, std::uint64_t seed) {
    if (!(unenrolled_fraction > 0.0 && unenrolled_fraction < 1.0))
        throw_config("open-set protocol: unenrolled_fraction must be in (0,1)");
    auto groups = group_by_subject(testset);
    if (groups.size() < 2) throw_data("open-set protocol: need at least 2 identities");

    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::size_t unenrolled_count = static_cast<std::size_t>(
        std::ceil(unenrolled_fraction * static_cast<double>(groups.size())));
    unenrolled_count = std::min(unenrolled_count, groups.size() - 1);
    if (unenrolled_count == 0) unenrolled_count = 1;

    OpenSetProtocol protocol;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& [subject, members] = groups[order[k]];
        if (k < unenrolled_count) {
            protocol.unenrolled_probes.insert(protocol.unenrolled_probes.end(), members.begin(),
                                              members.end());
        } else {
            const std::size_t ref = pick_reference(testset, members);
            protocol.gallery.push_back(ref);
            for (std::size_t i : members)
                if (i != ref) protocol.enrolled_probes.push_back(i);
        }
    }
    if (protocol.unenrolled_probes.empty()) throw_data("open-set protocol: empty unenrolled set");
    return protocol;
}

std::vector<DetPoint> eval_open_set(const AnnotatedDataset& testset,
                                    const OpenSetProtocol& protocol, const PairScorer& scorer,
                                    std::size_t min_overlap) {
    if (protocol.unenrolled_probes.empty()) throw_data("eval_open_set: empty unenrolled set");
    if (protocol.gallery.empty()) throw_data("eval_open_set: empty gallery");

    auto gallery_scores = [&](std::size_t probe, double& mated, double& best_nonmated,
                              double& best_any) {
        const auto probe_row = testset.annotations.row_span(probe);
        const std::string& probe_subject = testset.samples[probe].subject_id;
        mated = kNegInf;
        best_nonmated = kNegInf;
        best_any = kNegInf;
        for (std::size_t ref : protocol.gallery) {
            const auto ref_row = testset.annotations.row_span(ref);
            if (overlap_count(ref_row, probe_row) < min_overlap) continue;
            const double score = scorer(ref_row, probe_row);
            best_any = std::max(best_any, score);
            if (testset.samples[ref].subject_id == probe_subject)
                mated = score;
            else
                best_nonmated = std::max(best_nonmated, score);
        }
    };

    // unenrolled probes: max valid gallery score
    std::vector<double> unenrolled_max;
    for (std::size_t probe : protocol.unenrolled_probes) {
        double mated, best_nonmated, best_any;
        gallery_scores(probe, mated, best_nonmated, best_any);
        unenrolled_max.push_back(best_any);
    }
    // enrolled probes: mated score + strict rank-1 flag
    std::vector<std::pair<double, bool>> enrolled;  // (mated score, rank1)
    for (std::size_t probe : protocol.enrolled_probes) {
        double mated, best_nonmated, best_any;
        gallery_scores(probe, mated, best_nonmated, best_any);
        enrolled.emplace_back(mated, mated > best_nonmated);
    }

    std::vector<double> thresholds;
    for (double s : unenrolled_max)
        if (std::isfinite(s)) thresholds.push_back(s);
    for (const auto& [s, _] : enrolled)
        if (std::isfinite(s)) thresholds.push_back(s);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(kPosInf);  // full-reject endpoint

    std::vector<DetPoint> points;
    const double nu = static_cast<double>(unenrolled_max.size());
    const double ne = static_cast<double>(std::max<std::size_t>(enrolled.size(), 1));
    for (double tau : thresholds) {
        std::size_t false_accepts = 0;
        for (double s : unenrolled_max)
            if (s >= tau) ++false_accepts;
        std::size_t misses = 0;
        for (const auto& [score, rank1] : enrolled)
            if (score < tau || !rank1) ++misses;
        points.push_back({tau, static_cast<double>(false_accepts) / nu,
                          static_cast<double>(misses) / ne});
    }
    return points;
}

std::pair<double, double> fusion_weights(double primary_eer, double secondary_eer,
                                         FusionMode mode) {
    double w1, w2;
    if (mode == FusionMode::OneMinusEer) {
        w1 = 1.0 - primary_eer;
        w2 = 1.0 - secondary_eer;
    } else {
        w1 = 1.0 / std::max(primary_eer, 1e-6);
        w2 = 1.0 / std::max(secondary_eer, 1e-6);
    }
    const double total = w1 + w2;
    if (!(total > 0.0)) throw_data("fusion_weights: degenerate weights");
    return {w1 / total, w2 / total};
}

namespace {

// min-max normalization over the pooled genuine+imposter scores
ScoreSet normalize(const ScoreSet& scores) {
    double lo = kPosInf, hi = kNegInf;
    for (double s : scores.genuine) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (double s : scores.imposter) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    ScoreSet out = scores;
    const double range = hi - lo;
    auto apply = [&](std::vector<double>& v) {
        for (double& s : v) s = range > 0.0 ? (s - lo) / range : 0.5;
    };
    apply(out.genuine);
    apply(out.imposter);
    return out;
}

}  // namespace

ScoreSet fuse_scores(const ScoreSet& primary, const ScoreSet& secondary, double primary_eer,
                     double secondary_eer, FusionMode mode) {
    if (primary.genuine.size() != secondary.genuine.size() ||
        primary.imposter.size() != secondary.imposter.size())
        throw_data("fuse_scores: score lists are not pair-aligned");
    const auto [w1, w2] = fusion_weights(primary_eer, secondary_eer, mode);
    const ScoreSet a = normalize(primary);
    const ScoreSet b = normalize(secondary);
    ScoreSet fused;
    fused.genuine.resize(a.genuine.size());
    fused.imposter.resize(a.imposter.size());
    for (std::size_t i = 0; i < fused.genuine.size(); ++i)
        fused.genuine[i] = w1 * a.genuine[i] + w2 * b.genuine[i];
    for (std::size_t i = 0; i < fused.imposter.size(); ++i)
        fused.imposter[i] = w1 * a.imposter[i] + w2 * b.imposter[i];
    return fused;
}

void save_scores(const std::string& path, const std::vector<ScoreRecord>& records,
                 const std::string& header_comment) {
    std::string out = header_comment;
    out += "ref_id,probe_id,is_genuine,score\n";
    for (const ScoreRecord& rec : records) {
        out += rec.ref_id;
        out += ',' + rec.probe_id;
        out += ',';
        out += rec.genuine ? '1' : '0';
        out += ',' + csv::format_double(rec.score);
        out += '\n';
    }
    csv::atomic_write(path, out);
}

std::vector<ScoreRecord> load_scores(const std::string& path) {
    const csv::File file = csv::read_file(path);
    if (file.header != std::vector<std::string>{"ref_id", "probe_id", "is_genuine", "score"})
        throw_data(path + ": expected header ref_id,probe_id,is_genuine,score");
    std::vector<ScoreRecord> records;
    for (const csv::Row& row : file.rows) {
        if (row.fields.size() != 4)
            throw_data(path + ":" + std::to_string(row.line_number) + ": expected 4 fields");
        ScoreRecord rec;
        rec.ref_id = row.fields[0];
        rec.probe_id = row.fields[1];
        const int genuine = csv::parse_int(row.fields[2], path, row.line_number);
        if (genuine != 0 && genuine != 1)
            throw_data(path + ":" + std::to_string(row.line_number) + ": is_genuine must be 0 or 1");
        rec.genuine = genuine == 1;
        rec.score = csv::parse_double(row.fields[3], path, row.line_number);
        records.push_back(std::move(rec));
    }
    return records;
}

ScoreSet to_score_set(const std::vector<ScoreRecord>& records) {
    ScoreSet scores;
    for (const ScoreRecord& rec : records)
        (rec.genuine ? scores.genuine : scores.imposter).push_back(rec.score);
    return scores;
}

std::string roc_csv(const VerificationMetrics& metrics, const std::string& header_comment) {
    std::string out = header_comment;
    out += "threshold,fmr,fnmr\n";
    for (const RocPoint& point : metrics.roc) {
        out += csv::format_double(point.threshold);
        out += ',' + csv::format_double(point.fmr);
        out += ',' + csv::format_double(point.fnmr);
        out += '\n';
    }
    return out;
}

std::string cmc_csv(const CmcResult& result, const std::string& header_comment) {
    std::string out = header_comment;
    out += "rank,cmc\n";
    for (std::size_t k = 0; k < result.cmc.size(); ++k)
        out += std::to_string(k + 1) + "," + csv::format_double(result.cmc[k]) + "\n";
    return out;
}

std::string det_csv(const std::vector<DetPoint>& points, const std::string& header_comment) {
    std::string out = header_comment;
    out += "threshold,fpir,fnir\n";
    for (const DetPoint& point : points) {
        out += csv::format_double(point.threshold);
        out += ',' + csv::format_double(point.fpir);
        out += ',' + csv::format_double(point.fnir);
        out += '\n';
    }
    return out;
}

std::string verification_summary_json(const VerificationMetrics& metrics) {
    nlohmann::json doc;
    doc["auc"] = metrics.auc;
    doc["eer"] = metrics.eer;
    doc["eer_threshold"] = std::isfinite(metrics.eer_threshold)
                               ? nlohmann::json(metrics.eer_threshold)
                               : nlohmann::json(nullptr);
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& [target, fnmr] : metrics.fnmr_at_fmr)
        targets.push_back({{"fmr_target", target}, {"fnmr", fnmr}});
    doc["fnmr_at_fmr"] = targets;
    return doc.dump(2) + "\n";
}

}  // namespace relabel
