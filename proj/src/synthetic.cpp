#include "relabel/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "relabel/errors.hpp"
#include "relabel/rng.hpp"

namespace relabel {

void SyntheticSpec::validate() const {
    if (num_sources == 0) throw_config("synthetic: num_sources must be >= 1");
    if (subjects_per_dataset < 2) throw_config("synthetic: need at least 2 subjects per dataset");
    if (samples_per_subject == 0) throw_config("synthetic: samples_per_subject must be >= 1");
    if (embedding_dim == 0) throw_config("synthetic: embedding_dim must be >= 1");
    if (schema.size() == 0) throw_config("synthetic: schema is empty");
    if (!(annotation_noise >= 0.0 && annotation_noise <= 1.0))
        throw_config("synthetic: annotation_noise outside [0,1]");
    if (!(undefined_rate >= 0.0 && undefined_rate <= 1.0))
        throw_config("synthetic: undefined_rate outside [0,1]");
    if (!(embedding_noise >= 0.0)) throw_config("synthetic: embedding_noise must be >= 0");
    if (separation.size() != 1 && separation.size() != schema.size())
        throw_config("synthetic: separation must have 1 or num_attributes entries");
    for (double s : separation)
        if (!(s >= 0.0) || !std::isfinite(s)) throw_config("synthetic: separation must be finite and >= 0");
}

AttributeSchema default_synthetic_schema(std::size_t num_attributes) {
    std::vector<AttributeSpec> specs;
    specs.reserve(num_attributes);
    for (std::size_t i = 0; i < num_attributes; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "attr_%02zu", i);
        char cls[32];
        std::snprintf(cls, sizeof(cls), "cls_%02zu", i);
        specs.push_back({name, cls, "synthetic", 2});
    }
    return AttributeSchema::from_specs(std::move(specs));
}

namespace {

// Per-subject latent vector. Single-attribute classes flip a fair coin;
// multi-attribute classes get exactly one positive so the truth always
// respects the schema's exclusivity.
std::vector<std::int8_t> draw_latent(const AttributeSchema& schema, Rng& rng) {
    std::vector<std::int8_t> latent(schema.size(), -1);
    for (const auto& group : schema.class_groups()) {
        if (group.size() == 1) {
            latent[group[0]] = rng.bernoulli(0.5) ? 1 : -1;
        } else {
            const std::size_t pos = static_cast<std::size_t>(rng.bounded(group.size()));
            for (std::size_t g = 0; g < group.size(); ++g)
                latent[group[g]] = (g == pos) ? 1 : -1;
        }
    }
    return latent;
}

struct DatasetDraw {
    AnnotatedDataset dataset;
    AnnotationMatrix truth;
};

DatasetDraw draw_dataset(const SyntheticSpec& spec, const Matrix& directions,
                         const std::string& name, std::uint64_t seed, bool observe_annotations) {
    const std::size_t K = spec.schema.size();
    const std::size_t D = spec.embedding_dim;
    const std::size_t N = spec.subjects_per_dataset * spec.samples_per_subject;

    Rng rng(seed);
    DatasetDraw out;
    out.dataset.schema = spec.schema;
    out.dataset.embeddings = Matrix(N, D);
    out.dataset.annotations = AnnotationMatrix(N, K);
    out.truth = AnnotationMatrix(N, K);

    auto sep = [&](std::size_t a) {
        return spec.separation.size() == 1 ? spec.separation[0] : spec.separation[a];
    };

    std::size_t row = 0;
    for (std::size_t subj = 0; subj < spec.subjects_per_dataset; ++subj) {
        const std::vector<std::int8_t> latent = draw_latent(spec.schema, rng);
        char subject_id[64];
        std::snprintf(subject_id, sizeof(subject_id), "%s_subj%04zu", name.c_str(), subj);
        for (std::size_t s = 0; s < spec.samples_per_subject; ++s, ++row) {
            char sample_id[96];
            std::snprintf(sample_id, sizeof(sample_id), "%s_i%03zu", subject_id, s);
            out.dataset.samples.push_back({sample_id, subject_id});

            double* emb = out.dataset.embeddings.row(row);
            for (std::size_t d = 0; d < D; ++d) emb[d] = spec.embedding_noise * rng.normal();
            for (std::size_t a = 0; a < K; ++a) {
                const double shift = 0.5 * sep(a) * static_cast<double>(latent[a]);
                const double* u = directions.row(a);
                for (std::size_t d = 0; d < D; ++d) emb[d] += shift * u[d];
            }

            for (std::size_t a = 0; a < K; ++a) {
                out.truth.set(row, a, latent[a]);
                if (!observe_annotations) continue;
                std::int8_t observed = latent[a];
                if (rng.bernoulli(spec.undefined_rate))
                    observed = 0;
                else if (rng.bernoulli(spec.annotation_noise))
                    observed = static_cast<std::int8_t>(-observed);
                out.dataset.annotations.set(row, a, observed);
            }
        }
    }
    return out;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t K = spec.schema.size();
    const std::size_t D = spec.embedding_dim;

    // One random unit direction per attribute, shared by all datasets.
    Matrix directions(K, D);
    {
        Rng rng(derive_seed(seed, "directions"));
        for (std::size_t a = 0; a < K; ++a) {
            double norm2 = 0.0;
            double* u = directions.row(a);
            for (std::size_t d = 0; d < D; ++d) {
                u[d] = rng.normal();
                norm2 += u[d] * u[d];
            }
            const double inv = 1.0 / std::sqrt(norm2);
            for (std::size_t d = 0; d < D; ++d) u[d] *= inv;
        }
    }

    SyntheticData data;
    for (std::size_t s = 0; s < spec.num_sources; ++s) {
        const std::string name = "src" + std::to_string(s);
        DatasetDraw draw = draw_dataset(spec, directions, name, derive_seed(seed, "dataset", s), true);
        data.sources.push_back(std::move(draw.dataset));
        data.source_truths.push_back(std::move(draw.truth));
    }
    DatasetDraw target =
        draw_dataset(spec, directions, "target", derive_seed(seed, "dataset", spec.num_sources), false);
    data.target = std::move(target.dataset);
    data.target_truth = std::move(target.truth);
    return data;
}

}  // namespace relabel
