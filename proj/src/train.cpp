#include "relabel/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"
#include "relabel/kernels.hpp"

namespace relabel {

void TrainingConfig::validate() const {
    if (epochs == 0) throw_config("training: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw_config("training: learning_rate must be > 0");
    if (batch_size == 0) throw_config("training: batch_size must be >= 1");
    if (!(lr_floor_fraction > 0.0 && lr_floor_fraction <= 1.0))
        throw_config("training: lr_floor_fraction must be in (0,1]");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw_config("training: adam betas must be in [0,1)");
    if (!(adam_epsilon > 0.0)) throw_config("training: adam_epsilon must be > 0");
}

MacGradients MacGradients::zeros_like(const MacModel& model) {
    MacGradients g;
    g.trunk_weight = Matrix(model.trunk.weight.rows, model.trunk.weight.cols);
    g.trunk_bias.assign(model.trunk.bias.size(), 0.0);
    g.bn_gamma.assign(model.trunk_bn.gamma.size(), 0.0);
    g.bn_beta.assign(model.trunk_bn.beta.size(), 0.0);
    g.branches.resize(model.branches.size());
    for (std::size_t a = 0; a < model.branches.size(); ++a) {
        const Branch& b = model.branches[a];
        BranchGradients& gb = g.branches[a];
        gb.hidden_weight = Matrix(b.hidden.weight.rows, b.hidden.weight.cols);
        gb.hidden_bias.assign(b.hidden.bias.size(), 0.0);
        gb.bn_gamma.assign(b.hidden_bn.gamma.size(), 0.0);
        gb.bn_beta.assign(b.hidden_bn.beta.size(), 0.0);
        gb.output_weight = Matrix(b.output.weight.rows, b.output.weight.cols);
        gb.output_bias.assign(b.output.bias.size(), 0.0);
    }
    return g;
}

std::vector<std::span<double>> MacGradients::blocks() {
    std::vector<std::span<double>> blocks;
    blocks.emplace_back(trunk_weight.data);
    blocks.emplace_back(trunk_bias);
    blocks.emplace_back(bn_gamma);
    blocks.emplace_back(bn_beta);
    for (BranchGradients& gb : branches) {
        blocks.emplace_back(gb.hidden_weight.data);
        blocks.emplace_back(gb.hidden_bias);
        blocks.emplace_back(gb.bn_gamma);
        blocks.emplace_back(gb.bn_beta);
        blocks.emplace_back(gb.output_weight.data);
        blocks.emplace_back(gb.output_bias);
    }
    return blocks;
}

namespace {

// Cache for one dense + batch-norm + relu + dropout block in training mode.
struct LayerCache {
    Matrix pre_bn;       // dense output z
    Matrix normalized;   // xhat
    Matrix post_bn;      // gamma*xhat + beta (relu input)
    Matrix activated;    // after relu and dropout (input to the next dense)
    std::vector<double> mean, var, inv_std;
    std::vector<std::uint8_t> keep_mask;  // empty when dropout is off
};

void bn_train_forward(const BatchNorm& bn, double eps, const Matrix& z, LayerCache& cache) {
    const std::size_t n = z.rows, cols = z.cols;
    cache.mean.assign(cols, 0.0);
    cache.var.assign(cols, 0.0);
    cache.inv_std.assign(cols, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = z.row(i);
        for (std::size_t j = 0; j < cols; ++j) cache.mean[j] += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) cache.mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = z.row(i);
        for (std::size_t j = 0; j < cols; ++j) {
            const double d = row[j] - cache.mean[j];
            cache.var[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < cols; ++j) {
        cache.var[j] /= static_cast<double>(n);
        cache.inv_std[j] = 1.0 / std::sqrt(cache.var[j] + eps);
    }
    cache.normalized = Matrix(n, cols);
    cache.post_bn = Matrix(n, cols);
    for (std::size_t i = 0; i < n; ++i) {
        const double* zrow = z.row(i);
        double* xhat = cache.normalized.row(i);
        double* out = cache.post_bn.row(i);
        for (std::size_t j = 0; j < cols; ++j) {
            xhat[j] = (zrow[j] - cache.mean[j]) * cache.inv_std[j];
            out[j] = bn.gamma[j] * xhat[j] + bn.beta[j];
        }
    }
}

// Backward through batch normalization with batch statistics. dy is consumed;
// returns dz and accumulates dgamma/dbeta.
Matrix bn_train_backward(const BatchNorm& bn, const LayerCache& cache, const Matrix& dy,
                         std::vector<double>& dgamma, std::vector<double>& dbeta) {
    const std::size_t n = dy.rows, cols = dy.cols;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> sum_dxhat(cols, 0.0), sum_dxhat_xhat(cols, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* dyrow = dy.row(i);
        const double* xhat = cache.normalized.row(i);
        for (std::size_t j = 0; j < cols; ++j) {
            dgamma[j] += dyrow[j] * xhat[j];
            dbeta[j] += dyrow[j];
            const double dxhat = dyrow[j] * bn.gamma[j];
            sum_dxhat[j] += dxhat;
            sum_dxhat_xhat[j] += dxhat * xhat[j];
        }
    }
    // dz = inv_std/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
    Matrix dz(n, cols);
    for (std::size_t i = 0; i < n; ++i) {
        const double* dyrow = dy.row(i);
        const double* xhat = cache.normalized.row(i);
        double* out = dz.row(i);
        for (std::size_t j = 0; j < cols; ++j) {
            const double dxhat = dyrow[j] * bn.gamma[j];
            out[j] = cache.inv_std[j] * inv_n *
                     (static_cast<double>(n) * dxhat - sum_dxhat[j] - xhat[j] * sum_dxhat_xhat[j]);
        }
    }
    return dz;
}

void forward_block(const DenseLayer& dense, const BatchNorm& bn, double eps, double dropout_rate,
                   const Matrix& input, Rng& mask_rng, LayerCache& cache) {
    const auto& k = kernels::active();
    cache.pre_bn = Matrix(input.rows, dense.weight.cols);
    k.gemm_nn(input.rows, input.cols, dense.weight.cols, input.data.data(),
              dense.weight.data.data(), cache.pre_bn.data.data());
    k.add_bias_rows(cache.pre_bn.rows, cache.pre_bn.cols, dense.bias.data(),
                    cache.pre_bn.data.data());
    bn_train_forward(bn, eps, cache.pre_bn, cache);
    cache.activated = Matrix(cache.post_bn.rows, cache.post_bn.cols);
    k.relu(cache.post_bn.size(), cache.post_bn.data.data(), cache.activated.data.data());
    if (dropout_rate > 0.0) {
        const double inv_keep = 1.0 / (1.0 - dropout_rate);
        cache.keep_mask.resize(cache.activated.size());
        for (std::size_t i = 0; i < cache.activated.size(); ++i) {
            const bool drop = mask_rng.bernoulli(dropout_rate);
            cache.keep_mask[i] = drop ? 0 : 1;
            cache.activated.data[i] = drop ? 0.0 : cache.activated.data[i] * inv_keep;
        }
    }
}

// Backward through dropout + relu + batch norm of one block. d_activated is
// the gradient at the block output; returns the gradient at the dense output.
Matrix backward_block_activation(const BatchNorm& bn, double dropout_rate, const LayerCache& cache,
                                 Matrix d_activated, std::vector<double>& dgamma,
                                 std::vector<double>& dbeta) {
    if (dropout_rate > 0.0) {
        const double inv_keep = 1.0 / (1.0 - dropout_rate);
        for (std::size_t i = 0; i < d_activated.size(); ++i)
            d_activated.data[i] = cache.keep_mask[i] ? d_activated.data[i] * inv_keep : 0.0;
    }
    kernels::active().relu_backward(d_activated.size(), cache.post_bn.data.data(),
                                    d_activated.data.data(), d_activated.data.data());
    return bn_train_backward(bn, cache, d_activated, dgamma, dbeta);
}

void column_sums(const Matrix& x, std::vector<double>& out) {
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* row = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) out[j] += row[j];
    }
}

}  // namespace

double mac_loss_and_gradients(const MacModel& model, const Matrix& inputs,
                              const AnnotationMatrix& labels, std::uint64_t mask_seed,
                              MacGradients* grads, BnBatchStats* stats) {
    if (inputs.cols != model.config.input_dim) throw_data("train: input dimension mismatch");
    if (labels.rows != inputs.rows || labels.cols != model.branches.size())
        throw_data("train: label matrix shape mismatch");

    const auto& k = kernels::active();
    const std::size_t batch = inputs.rows;
    const double rate = model.config.dropout_rate;
    const double eps = model.config.bn_epsilon;
    Rng mask_rng(mask_seed);

    LayerCache trunk_cache;
    forward_block(model.trunk, model.trunk_bn, eps, rate, inputs, mask_rng, trunk_cache);

    if (stats) {
        stats->trunk_mean = trunk_cache.mean;
        stats->trunk_var = trunk_cache.var;
        stats->branch_mean.resize(model.branches.size());
        stats->branch_var.resize(model.branches.size());
    }

    double total_loss = 0.0;
    Matrix d_trunk_out;  // accumulated over branches
    if (grads) d_trunk_out = Matrix(batch, model.config.trunk_width);

    for (std::size_t a = 0; a < model.branches.size(); ++a) {
        const Branch& branch = model.branches[a];
        LayerCache cache;
        forward_block(branch.hidden, branch.hidden_bn, eps, rate, trunk_cache.activated,
                      mask_rng, cache);
        if (stats) {
            stats->branch_mean[a] = cache.mean;
            stats->branch_var[a] = cache.var;
        }

        const std::size_t classes = branch.output.weight.cols;
        Matrix logits(batch, classes);
        k.gemm_nn(batch, cache.activated.cols, classes, cache.activated.data.data(),
                  branch.output.weight.data.data(), logits.data.data());
        k.add_bias_rows(batch, classes, branch.output.bias.data(), logits.data.data());

        // mean cross-entropy over this attribute's defined rows
        std::size_t defined = 0;
        for (std::size_t i = 0; i < batch; ++i)
            if (labels.at(i, a) != 0) ++defined;
        if (defined == 0) continue;

        Matrix dlogits;
        if (grads) dlogits = Matrix(batch, classes);
        double loss_a = 0.0;
        const double inv_defined = 1.0 / static_cast<double>(defined);
        for (std::size_t i = 0; i < batch; ++i) {
            const int y = labels.at(i, a);
            if (y == 0) continue;
            const std::size_t target = y == 1 ? 0 : 1;
            const double* z = logits.row(i);
            double mx = z[0];
            for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, z[c]);
            double sum = 0.0;
            for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - mx);
            const double lse = mx + std::log(sum);
            loss_a -= (z[target] - lse) * inv_defined;
            if (grads) {
                double* drow = dlogits.row(i);
                for (std::size_t c = 0; c < classes; ++c)
                    drow[c] = (std::exp(z[c] - lse) - (c == target ? 1.0 : 0.0)) * inv_defined;
            }
        }
        total_loss += loss_a;

        if (!grads) continue;
        BranchGradients& gb = grads->branches[a];
        k.gemm_tn(cache.activated.cols, batch, classes, cache.activated.data.data(),
                  dlogits.data.data(), gb.output_weight.data.data());
        column_sums(dlogits, gb.output_bias);

        Matrix d_hidden(batch, cache.activated.cols);
        k.gemm_nt(batch, classes, cache.activated.cols, dlogits.data.data(),
                  branch.output.weight.data.data(), d_hidden.data.data());
        Matrix dz = backward_block_activation(branch.hidden_bn, rate, cache, std::move(d_hidden),
                                              gb.bn_gamma, gb.bn_beta);
        k.gemm_tn(trunk_cache.activated.cols, batch, dz.cols, trunk_cache.activated.data.data(),
                  dz.data.data(), gb.hidden_weight.data.data());
        column_sums(dz, gb.hidden_bias);

        Matrix d_trunk_part(batch, model.config.trunk_width);
        k.gemm_nt(batch, dz.cols, model.config.trunk_width, dz.data.data(),
                  branch.hidden.weight.data.data(), d_trunk_part.data.data());
        for (std::size_t i = 0; i < d_trunk_out.size(); ++i)
            d_trunk_out.data[i] += d_trunk_part.data[i];
    }

    if (grads) {
        Matrix dz = backward_block_activation(model.trunk_bn, rate, trunk_cache,
                                              std::move(d_trunk_out), grads->bn_gamma,
                                              grads->bn_beta);
        k.gemm_tn(inputs.cols, batch, dz.cols, inputs.data.data(), dz.data.data(),
                  grads->trunk_weight.data.data());
        column_sums(dz, grads->trunk_bias);
    }
    return total_loss;
}

namespace {

void zero_gradients(MacGradients& g) {
    for (auto block : g.blocks()) std::fill(block.begin(), block.end(), 0.0);
}

void update_running(std::vector<double>& running, const std::vector<double>& batch,
                    double momentum) {
    for (std::size_t j = 0; j < running.size(); ++j)
        running[j] = momentum * running[j] + (1.0 - momentum) * batch[j];
}

}  // namespace

TrainLog mac_train(MacModel& model, const AnnotatedDataset& trainset,
                   const TrainingConfig& config) {
    config.validate();
    if (trainset.size() == 0) throw_data("train: empty training set");
    if (trainset.dim() != model.config.input_dim) throw_data("train: input dimension mismatch");

    TrainLog log;
    const std::size_t num_attrs = model.branches.size();
    for (std::size_t a = 0; a < num_attrs; ++a) {
        bool any = false;
        for (std::size_t i = 0; i < trainset.size() && !any; ++i)
            any = trainset.annotations.at(i, a) != 0;
        if (!any) log.skipped_attributes.push_back(model.config.schema.attribute(a).name);
    }

    const std::size_t n = trainset.size();
    const std::size_t batch_size = std::min(config.batch_size, n);
    const std::size_t num_batches = (n + batch_size - 1) / batch_size;
    const double alpha = config.learning_rate;
    const double beta = config.decay();
    const double floor = config.lr_floor_fraction * alpha;

    MacGradients grads = MacGradients::zeros_like(model);
    BnBatchStats stats;
    std::vector<double> adam_m(parameter_count(model), 0.0);
    std::vector<double> adam_v(parameter_count(model), 0.0);
    const auto& k = kernels::active();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = std::max(alpha - beta * static_cast<double>(epoch), floor);
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < num_batches; ++b) {
            const std::size_t lo = b * batch_size;
            const std::size_t hi = std::min(lo + batch_size, n);
            Matrix xb(hi - lo, trainset.dim());
            AnnotationMatrix yb(hi - lo, num_attrs);
            for (std::size_t r = lo; r < hi; ++r) {
                const std::size_t src = order[r];
                std::copy_n(trainset.embeddings.row(src), trainset.dim(), xb.row(r - lo));
                for (std::size_t a = 0; a < num_attrs; ++a)
                    yb.set(r - lo, a, trainset.annotations.at(src, a));
            }

            zero_gradients(grads);
            const std::uint64_t mask_seed =
                derive_seed(config.seed, "dropout", epoch * num_batches + b);
            epoch_loss += mac_loss_and_gradients(model, xb, yb, mask_seed, &grads, &stats);

            update_running(model.trunk_bn.running_mean, stats.trunk_mean, model.config.bn_momentum);
            update_running(model.trunk_bn.running_var, stats.trunk_var, model.config.bn_momentum);
            for (std::size_t a = 0; a < num_attrs; ++a) {
                update_running(model.branches[a].hidden_bn.running_mean, stats.branch_mean[a],
                               model.config.bn_momentum);
                update_running(model.branches[a].hidden_bn.running_var, stats.branch_var[a],
                               model.config.bn_momentum);
            }

            ++step;
            const double bias1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
            const double bias2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
            auto params = parameter_blocks(model);
            auto gblocks = grads.blocks();
            std::size_t offset = 0;
            for (std::size_t i = 0; i < params.size(); ++i) {
                k.adam_step(params[i].size(), params[i].data(), gblocks[i].data(),
                            adam_m.data() + offset, adam_v.data() + offset, lr, config.adam_beta1,
                            config.adam_beta2, config.adam_epsilon, bias1, bias2);
                offset += params[i].size();
            }
        }
        log.epoch_loss.push_back(epoch_loss / static_cast<double>(num_batches));
    }
    return log;
}

void save_train_log(const std::string& path, const TrainLog& log,
                    const std::string& header_comment) {
    std::string out = header_comment;
    if (!log.skipped_attributes.empty()) {
        out += "# skipped_attributes=";
        for (std::size_t i = 0; i < log.skipped_attributes.size(); ++i) {
            if (i) out += ';';
            out += log.skipped_attributes[i];
        }
        out += '\n';
    }
    out += "epoch,loss\n";
    for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
        out += std::to_string(e) + "," + csv::format_double(log.epoch_loss[e]) + "\n";
    csv::atomic_write(path, out);
}

}  // namespace relabel
