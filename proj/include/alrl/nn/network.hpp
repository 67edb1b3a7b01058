#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "alrl/nn/tensor.hpp"

namespace alrl::nn {

using Rng = std::mt19937_64;

enum class LayerKind : std::uint8_t { dense = 0, conv2d = 1, batchnorm = 2, flatten = 3 };
enum class Activation : std::uint8_t { none = 0, relu = 1, leaky_relu = 2, softmax = 3 };
enum class Loss : std::uint8_t { mse = 0, cross_entropy = 1 };

/// Training mode uses batch statistics in batchnorm layers and caches
/// intermediates for backward(); eval mode uses running statistics.
enum class Mode { train, eval };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);

struct ConvGeometry {
    std::size_t in_channels = 0;
    std::size_t filters = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
};

/// One sequential layer. Parameters live in `weight`/`bias`:
///   dense     weight [out, in], bias [out]
///   conv2d    weight [filters, in_channels, k, k], bias [filters] (valid padding)
///   batchnorm weight = gamma [features], bias = beta [features]
///   flatten   no parameters
struct Layer {
    LayerKind kind = LayerKind::flatten;
    Activation activation = Activation::none;
    double leaky_slope = 0.3;
    double l2 = 0.0;
    ConvGeometry conv;
    Tensor weight;
    Tensor bias;

    // batchnorm only
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.99;
    double epsilon = 1e-5;

    static Layer dense(std::size_t in, std::size_t out, Activation act = Activation::none, double l2 = 0.0);
    static Layer conv2d(std::size_t in_channels, std::size_t filters, std::size_t kernel, std::size_t stride,
                        Activation act = Activation::none, double l2 = 0.0);
    static Layer batchnorm(std::size_t features);
    static Layer flatten();

    bool has_params() const noexcept { return kind != LayerKind::flatten; }

    /// Output shape (without the batch dimension) for the given input shape.
    Shape output_shape(const Shape& input) const;
};

struct ParamGrad {
    Tensor weight;
    Tensor bias;
};

/// d loss / d param for every layer (empty entries for flatten) plus the loss value.
struct GradientSet {
    std::vector<ParamGrad> layers;
    double loss = 0.0;
};

/// Intermediates from the last training-mode forward pass.
struct LayerCache {
    Tensor input;
    Tensor pre_activation;
    Tensor output;
    Tensor normalized;  // batchnorm x_hat
    std::vector<double> inv_std;
};

class Network {
public:
    Network() = default;
    Network(std::vector<Layer> layers, Loss loss);

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    Loss loss() const noexcept { return loss_; }

    /// Shape of one input sample as implied by the first layer, if determinable.
    std::optional<Shape> input_shape() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const;

    /// Throws ConfigError if adjacent layers do not compose for `sample_shape`.
    void validate(const Shape& sample_shape) const;

    /// Training-mode pass: updates batchnorm running stats and fills caches.
    Tensor forward_train(const Tensor& batch);
    /// Eval-mode pass; pure, safe to call concurrently on a shared network.
    Tensor predict(const Tensor& batch) const;

    /// Backpropagates from d loss / d output through the cached training pass.
    GradientSet backprop(const Tensor& output_grad) const;

private:
    std::vector<Layer> layers_;
    Loss loss_ = Loss::mse;
    std::vector<LayerCache> caches_;
};

Tensor forward(Network& net, const Tensor& batch, Mode mode);

/// Runs a training-mode forward pass and returns gradients of the loss.
///   mse:           L = 1/(2N) * sum_i sum_k mask_ik (y_ik - t_ik)^2
///   cross_entropy: L = -1/N * sum_i sum_k t_ik log(clamp(y_ik, 1e-12, 1))
/// `mask` (same shape as target) restricts which outputs contribute; used to
/// regress only the taken action's Q-value.
GradientSet backward(Network& net, const Tensor& batch, const Tensor& target, const Tensor* mask = nullptr);

/// Loss value of `output` against `target` under `loss`, plus its gradient.
double loss_and_grad(Loss loss, const Tensor& output, const Tensor& target, const Tensor* mask, Tensor* grad);

/// param <- param - lr * (grad + l2 * param). Batchnorm running stats untouched.
void sgd_step(Network& net, const GradientSet& grads, double lr);

/// Uniform samples in [-sqrt(6/fan_in), sqrt(6/fan_in)].
Tensor he_uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng);

/// He-uniform weights, zero biases, identity batchnorm.
void initialize(Network& net, Rng& rng);

/// Row-wise softmax over the last axis, computed as exp((v - max)/tau).
Tensor softmax(const Tensor& v, double temperature = 1.0);
std::vector<double> softmax(std::span<const double> v, double temperature = 1.0);

}  // namespace alrl::nn
