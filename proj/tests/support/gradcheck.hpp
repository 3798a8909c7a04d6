#pragma once

// Central finite-difference gradient verification for the classifier loss.
// Perturbs every trainable parameter in place; the loss is re-evaluated with
// the same dropout mask seed so it is a smooth function of the parameters.

#include <cmath>
#include <cstdint>

#include "relabel/mac.hpp"
#include "relabel/train.hpp"

namespace test_support {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

inline GradCheckResult gradient_check(relabel::MacModel& model, const relabel::Matrix& inputs,
                                      const relabel::AnnotationMatrix& labels,
                                      std::uint64_t mask_seed, double step = 1e-5) {
    using namespace relabel;
    MacGradients grads = MacGradients::zeros_like(model);
    mac_loss_and_gradients(model, inputs, labels, mask_seed, &grads);

    GradCheckResult result;
    auto params = parameter_blocks(model);
    auto gblocks = grads.blocks();
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size(); ++i) {
            double& p = params[b][i];
            const double saved = p;
            p = saved + step;
            const double up = mac_loss_and_gradients(model, inputs, labels, mask_seed, nullptr);
            p = saved - step;
            const double down = mac_loss_and_gradients(model, inputs, labels, mask_seed, nullptr);
            p = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = gblocks[b][i];
            const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
            result.max_rel_error = std::max(result.max_rel_error,
                                            std::fabs(numeric - analytic) / denom);
            ++result.checked;
        }
    }
    return result;
}

}  // namespace test_support
