#include "relabel/mac.hpp"

#include <cmath>

#include "relabel/errors.hpp"
#include "relabel/kernels.hpp"

namespace relabel {

void MacConfig::validate() const {
    if (input_dim == 0) throw_config("mac: input_dim must be >= 1");
    if (trunk_width == 0 || branch_width == 0) throw_config("mac: layer widths must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw_config("mac: dropout_rate must be in [0,1)");
    if (!(bn_epsilon > 0.0)) throw_config("mac: bn_epsilon must be > 0");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0))
        throw_config("mac: bn_momentum must be in [0,1)");
    if (schema.size() == 0) throw_config("mac: schema is empty");
}

namespace {

DenseLayer init_dense(std::size_t in, std::size_t out, Rng& rng) {
    DenseLayer layer;
    layer.weight = Matrix(in, out);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : layer.weight.data) w = scale * rng.normal();
    layer.bias.assign(out, 0.0);
    return layer;
}

BatchNorm init_bn(std::size_t width) {
    BatchNorm bn;
    bn.gamma.assign(width, 1.0);
    bn.beta.assign(width, 0.0);
    bn.running_mean.assign(width, 0.0);
    bn.running_var.assign(width, 1.0);
    return bn;
}

}  // namespace

MacModel init_model(const MacConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    MacModel model;
    model.config = config;
    model.trunk = init_dense(config.input_dim, config.trunk_width, rng);
    model.trunk_bn = init_bn(config.trunk_width);
    model.branches.reserve(config.schema.size());
    for (std::size_t a = 0; a < config.schema.size(); ++a) {
        Branch branch;
        branch.hidden = init_dense(config.trunk_width, config.branch_width, rng);
        branch.hidden_bn = init_bn(config.branch_width);
        branch.output = init_dense(config.branch_width,
                                   static_cast<std::size_t>(config.schema.attribute(a).num_classes),
                                   rng);
        model.branches.push_back(std::move(branch));
    }
    return model;
}

namespace {

template <typename ModelT, typename SpanT>
std::vector<SpanT> blocks_impl(ModelT& model) {
    std::vector<SpanT> blocks;
    blocks.emplace_back(model.trunk.weight.data);
    blocks.emplace_back(model.trunk.bias);
    blocks.emplace_back(model.trunk_bn.gamma);
    blocks.emplace_back(model.trunk_bn.beta);
    for (auto& branch : model.branches) {
        blocks.emplace_back(branch.hidden.weight.data);
        blocks.emplace_back(branch.hidden.bias);
        blocks.emplace_back(branch.hidden_bn.gamma);
        blocks.emplace_back(branch.hidden_bn.beta);
        blocks.emplace_back(branch.output.weight.data);
        blocks.emplace_back(branch.output.bias);
    }
    return blocks;
}

}  // namespace

std::vector<std::span<double>> parameter_blocks(MacModel& model) {
    return blocks_impl<MacModel, std::span<double>>(model);
}

std::vector<std::span<const double>> parameter_blocks(const MacModel& model) {
    return blocks_impl<const MacModel, std::span<const double>>(model);
}

std::size_t parameter_count(const MacModel& model) {
    std::size_t total = 0;
    for (const auto& block : parameter_blocks(model)) total += block.size();
    return total;
}

namespace {

// y = gamma * (x - running_mean) / sqrt(running_var + eps) + beta, per column.
void bn_inference(const BatchNorm& bn, double eps, Matrix& x) {
    const std::size_t cols = x.cols;
    std::vector<double> scale(cols), shift(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        scale[j] = bn.gamma[j] / std::sqrt(bn.running_var[j] + eps);
        shift[j] = bn.beta[j] - scale[j] * bn.running_mean[j];
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
        double* row = x.row(i);
        for (std::size_t j = 0; j < cols; ++j) row[j] = scale[j] * row[j] + shift[j];
    }
}

void apply_dropout(Matrix& x, double rate, Rng& rng) {
    if (rate <= 0.0) return;
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    for (double& v : x.data) v = rng.bernoulli(rate) ? 0.0 : v * inv_keep;
}

void softmax_rows(Matrix& x) {
    for (std::size_t i = 0; i < x.rows; ++i) {
        double* row = x.row(i);
        double mx = row[0];
        for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < x.cols; ++j) row[j] *= inv;
    }
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
    Matrix out(x.rows, layer.weight.cols);
    const auto& k = kernels::active();
    k.gemm_nn(x.rows, x.cols, layer.weight.cols, x.data.data(), layer.weight.data.data(),
              out.data.data());
    k.add_bias_rows(out.rows, out.cols, layer.bias.data(), out.data.data());
    return out;
}

}  // namespace

std::vector<Matrix> mac_forward(const MacModel& model, const Matrix& inputs, ForwardMode mode,
                                Rng* rng) {
    if (inputs.cols != model.config.input_dim)
        throw_data("mac_forward: input dimension " + std::to_string(inputs.cols) +
                   " does not match model input_dim " + std::to_string(model.config.input_dim));
    const bool stochastic = mode == ForwardMode::Stochastic;
    const double rate = model.config.dropout_rate;
    if (stochastic && rate > 0.0 && rng == nullptr)
        throw_config("mac_forward: stochastic mode requires an rng");

    const auto& k = kernels::active();
    Matrix trunk = dense_forward(model.trunk, inputs);
    bn_inference(model.trunk_bn, model.config.bn_epsilon, trunk);
    k.relu(trunk.size(), trunk.data.data(), trunk.data.data());
    if (stochastic) apply_dropout(trunk, rate, *rng);

    std::vector<Matrix> outputs;
    outputs.reserve(model.branches.size());
    for (const Branch& branch : model.branches) {
        Matrix hidden = dense_forward(branch.hidden, trunk);
        bn_inference(branch.hidden_bn, model.config.bn_epsilon, hidden);
        k.relu(hidden.size(), hidden.data.data(), hidden.data.data());
        if (stochastic) apply_dropout(hidden, rate, *rng);
        Matrix logits = dense_forward(branch.output, hidden);
        softmax_rows(logits);
        outputs.push_back(std::move(logits));
    }
    return outputs;
}

DeterministicPrediction mac_predict(const MacModel& model, const Matrix& embeddings) {
    for (std::size_t a = 0; a < model.config.schema.size(); ++a)
        if (model.config.schema.attribute(a).num_classes != 2)
            throw_config("mac_predict: attribute '" + model.config.schema.attribute(a).name +
                         "' is not binary");
    const std::vector<Matrix> probs = mac_forward(model, embeddings, ForwardMode::Deterministic);
    DeterministicPrediction out;
    out.labels = AnnotationMatrix(embeddings.rows, probs.size());
    out.confidence = Matrix(embeddings.rows, probs.size());
    for (std::size_t a = 0; a < probs.size(); ++a) {
        for (std::size_t i = 0; i < embeddings.rows; ++i) {
            const double p_true = probs[a].at(i, 0);
            const double p_false = probs[a].at(i, 1);
            // exact tie resolves to False
            const bool is_true = p_true > p_false;
            out.labels.set(i, a, is_true ? 1 : -1);
            out.confidence.at(i, a) = is_true ? p_true : p_false;
        }
    }
    return out;
}

}  // namespace relabel
