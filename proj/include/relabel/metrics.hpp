#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relabel/dataset.hpp"
#include "relabel/recognition.hpp"

namespace relabel {

struct ScoreSet {
    std::vector<double> genuine;
    std::vector<double> imposter;
};

struct RocPoint {
    double threshold;
    double fmr;   // fraction of imposter scores >= threshold
    double fnmr;  // fraction of genuine scores < threshold
};

struct VerificationMetrics {
    std::vector<RocPoint> roc;  // swept over unique scores, ascending threshold
    double auc = 0.0;           // trapezoid over (FMR, 1-FNMR)
    double eer = 0.0;           // linear interpolation at the FMR=FNMR crossing
    double eer_threshold = 0.0;
    std::vector<std::pair<double, double>> fnmr_at_fmr;  // (target, FNMR)
};

// Threshold sweep over the unique scores; FNMR@FMR uses the smallest
// threshold whose FMR does not exceed the target.
VerificationMetrics eval_verification(const ScoreSet& scores,
                                      std::span<const double> fmr_targets = {});

// Closed-set protocol: one reference per identity (most defined annotations,
// ties by lexicographic sample id); every other sample is a probe.
struct IdentificationProtocol {
    std::vector<std::size_t> gallery;
    std::vector<std::size_t> probes;
};

IdentificationProtocol make_closed_set_protocol(const AnnotatedDataset& testset);

struct CmcResult {
    std::vector<double> cmc;   // cmc[k-1] = fraction of probes at rank <= k
    std::size_t num_probes = 0;
    std::size_t excluded_probes = 0;  // no valid gallery comparison
};

// Pairs failing the overlap filter score -inf; ranks are pessimistic (ties
// count against the mated reference).
CmcResult eval_closed_set(const AnnotatedDataset& testset, const IdentificationProtocol& protocol,
                          const PairScorer& scorer, std::size_t min_overlap = 10);

// Open-set protocol: a fraction of identities is left unenrolled; their
// samples probe the gallery of the enrolled identities.
struct OpenSetProtocol {
    std::vector<std::size_t> gallery;
    std::vector<std::size_t> enrolled_probes;
    std::vector<std::size_t> unenrolled_probes;
};

OpenSetProtocol make_open_set_protocol(const AnnotatedDataset& testset,
                                       double unenrolled_fraction, std::uint64_t seed);

struct DetPoint {
    double threshold;
    double fpir;  // unenrolled probes whose max gallery score >= threshold
    double fnir;  // enrolled probes below threshold or not rank-1
};

std::vector<DetPoint> eval_open_set(const AnnotatedDataset& testset,
                                    const OpenSetProtocol& protocol, const PairScorer& scorer,
                                    std::size_t min_overlap = 10);

enum class FusionMode {
    OneMinusEer,  // w_i proportional to (1 - EER_i)
    InverseEer    // w_i proportional to 1 / max(EER_i, 1e-6)
};

// Weighted-score fusion of two pair-aligned score sets. Each system's scores
// are min-max normalized over its pooled genuine+imposter scores first.
ScoreSet fuse_scores(const ScoreSet& primary, const ScoreSet& secondary, double primary_eer,
                     double secondary_eer, FusionMode mode = FusionMode::OneMinusEer);

std::pair<double, double> fusion_weights(double primary_eer, double secondary_eer,
                                         FusionMode mode);

// Score file: CSV `ref_id,probe_id,is_genuine,score`.
struct ScoreRecord {
    std::string ref_id, probe_id;
    bool genuine;
    double score;
};

void save_scores(const std::string& path, const std::vector<ScoreRecord>& records,
                 const std::string& header_comment = {});
std::vector<ScoreRecord> load_scores(const std::string& path);
ScoreSet to_score_set(const std::vector<ScoreRecord>& records);

// Report renderers.
std::string roc_csv(const VerificationMetrics& metrics, const std::string& header_comment = {});
std::string cmc_csv(const CmcResult& result, const std::string& header_comment = {});
std::string det_csv(const std::vector<DetPoint>& points, const std::string& header_comment = {});
std::string verification_summary_json(const VerificationMetrics& metrics);

}  // namespace relabel
