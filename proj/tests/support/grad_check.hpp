#pragma once

// Central finite-difference oracle for network gradients. Kept independent of
// backprop: it only calls the training forward pass and the loss.

#include <algorithm>
#include <cmath>

#include "alrl/nn/network.hpp"

namespace alrl::testing {

inline double net_loss(nn::Network net, const nn::Tensor& x, const nn::Tensor& t, const nn::Tensor* mask) {
    // copy: the training pass mutates batchnorm running stats, which must not leak between probes
    nn::Tensor out = net.forward_train(x);
    return nn::loss_and_grad(net.loss(), out, t, mask, nullptr);
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

inline double rel_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

/// Compares `grads` against central differences with step h for every parameter.
inline GradCheckResult grad_check(const nn::Network& net, const nn::GradientSet& grads, const nn::Tensor& x,
                                  const nn::Tensor& t, const nn::Tensor* mask = nullptr, double h = 1e-5) {
    GradCheckResult res;
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        if (!net.layers()[li].has_params()) continue;
        for (int which = 0; which < 2; ++which) {
            const std::size_t n =
                which == 0 ? net.layers()[li].weight.size() : net.layers()[li].bias.size();
            for (std::size_t k = 0; k < n; ++k) {
                nn::Network plus = net;
                nn::Network minus = net;
                auto& pp = which == 0 ? plus.layers()[li].weight : plus.layers()[li].bias;
                auto& pm = which == 0 ? minus.layers()[li].weight : minus.layers()[li].bias;
                pp[k] += h;
                pm[k] -= h;
                const double numeric = (net_loss(plus, x, t, mask) - net_loss(minus, x, t, mask)) / (2.0 * h);
                const double analytic = which == 0 ? grads.layers[li].weight[k] : grads.layers[li].bias[k];
                res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic, numeric));
                ++res.checked;
            }
        }
    }
    return res;
}

}  // namespace alrl::testing
