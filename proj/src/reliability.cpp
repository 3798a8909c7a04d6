#include "relabel/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "relabel/errors.hpp"

namespace relabel {

void ReliabilityConfig::validate() const {
    if (num_passes < 2) throw_config("reliability: num_passes must be >= 2");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw_config("reliability: alpha must be in [0,1]");
}

double reliability(std::span<const double> x, double alpha) {
    const std::size_t m = x.size();
    if (m < 2) throw_config("reliability: need at least 2 passes");
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    double pair_sum = 0.0;  // sum over i<j of (x_(j) - x_(i))
    for (std::size_t i = 0; i < m; ++i) {
        sum += sorted[i];
        pair_sum += (2.0 * static_cast<double>(i) - static_cast<double>(m) + 1.0) * sorted[i];
    }
    const double dm = static_cast<double>(m);
    return (1.0 - alpha) / dm * sum - alpha / (dm * dm) * (2.0 * pair_sum);
}

double reliability_reference(std::span<const double> x, double alpha) {
    const std::size_t m = x.size();
    if (m < 2) throw_config("reliability: need at least 2 passes");
    double sum = 0.0;
    for (double v : x) sum += v;
    double dispersion = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) dispersion += std::fabs(x[i] - x[j]);
    const double dm = static_cast<double>(m);
    return (1.0 - alpha) / dm * sum - alpha / (dm * dm) * dispersion;
}

StochasticOutputs stochastic_passes(const MacModel& model, std::span<const double> embedding,
                                    std::size_t num_passes, Rng& rng) {
    if (num_passes < 2) throw_config("stochastic_passes: need at least 2 passes");
    if (embedding.size() != model.config.input_dim)
        throw_data("stochastic_passes: embedding dimension mismatch");

    // One batched forward with m copies of the sample; each row gets an
    // independent dropout pattern.
    Matrix repeated(num_passes, embedding.size());
    for (std::size_t i = 0; i < num_passes; ++i)
        std::copy(embedding.begin(), embedding.end(), repeated.row(i));
    std::vector<Matrix> probs = mac_forward(model, repeated, ForwardMode::Stochastic, &rng);

    StochasticOutputs out;
    out.pass_probs = std::move(probs);
    out.predicted_class.resize(out.pass_probs.size());
    out.x.resize(out.pass_probs.size());
    for (std::size_t a = 0; a < out.pass_probs.size(); ++a) {
        const Matrix& pa = out.pass_probs[a];
        std::vector<double> mean(pa.cols, 0.0);
        for (std::size_t i = 0; i < pa.rows; ++i)
            for (std::size_t c = 0; c < pa.cols; ++c) mean[c] += pa.at(i, c);
        std::size_t best = 0;
        for (std::size_t c = 1; c < pa.cols; ++c)
            if (mean[c] >= mean[best]) best = c;
        out.predicted_class[a] = best;
        out.x[a].resize(pa.rows);
        for (std::size_t i = 0; i < pa.rows; ++i) out.x[a][i] = pa.at(i, best);
    }
    return out;
}

SourcePredictions predict_with_reliability(const MacModel& model, const Matrix& embeddings,
                                           const ReliabilityConfig& config, std::uint64_t seed,
                                           int workers) {
    config.validate();
    for (std::size_t a = 0; a < model.config.schema.size(); ++a)
        if (model.config.schema.attribute(a).num_classes != 2)
            throw_config("predict_with_reliability: attribute '" +
                         model.config.schema.attribute(a).name + "' is not binary");

    const std::size_t n = embeddings.rows;
    const std::size_t num_attrs = model.config.schema.size();
    SourcePredictions out;
    out.p = AnnotationMatrix(n, num_attrs);
    out.r = Matrix(n, num_attrs);

    auto process_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Rng rng(derive_seed(seed, "mc", i));
            const StochasticOutputs so =
                stochastic_passes(model, embeddings.row_span(i), config.num_passes, rng);
            for (std::size_t a = 0; a < num_attrs; ++a) {
                out.p.set(i, a, so.predicted_class[a] == 0 ? 1 : -1);
                out.r.at(i, a) = reliability(so.x[a], config.alpha);
            }
        }
    };

    const std::size_t num_workers =
        std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1));
    if (num_workers <= 1) {
        process_range(0, n);
    } else {
        std::vector<std::thread> threads;
        const std::size_t chunk = (n + num_workers - 1) / num_workers;
        for (std::size_t w = 0; w < num_workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(lo + chunk, n);
            if (lo >= hi) break;
            threads.emplace_back(process_range, lo, hi);
        }
        for (auto& t : threads) t.join();
    }
    return out;
}

}  // namespace relabel
