#include "alrl/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "alrl/errors.hpp"

namespace alrl::nn {

namespace {

constexpr double kProbFloor = 1e-12;

void apply_activation(const Layer& layer, Tensor& t) {
    switch (layer.activation) {
        case Activation::none:
            return;
        case Activation::relu:
            for (auto& v : t.values()) v = v > 0.0 ? v : 0.0;
            return;
        case Activation::leaky_relu:
            for (auto& v : t.values()) v = v > 0.0 ? v : layer.leaky_slope * v;
            return;
        case Activation::softmax:
            t = softmax(t, 1.0);
            return;
    }
}

// d loss / d pre-activation, given d loss / d activation.
Tensor activation_backward(const Layer& layer, const Tensor& grad, const LayerCache& cache) {
    Tensor out = grad;
    switch (layer.activation) {
        case Activation::none:
            break;
        case Activation::relu: {
            const auto z = cache.pre_activation.values();
            auto g = out.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = z[i] > 0.0 ? g[i] : 0.0;
            break;
        }
        case Activation::leaky_relu: {
            const auto z = cache.pre_activation.values();
            auto g = out.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = z[i] > 0.0 ? g[i] : layer.leaky_slope * g[i];
            break;
        }
        case Activation::softmax: {
            const std::size_t rows = out.dim(0);
            for (std::size_t r = 0; r < rows; ++r) {
                auto y = cache.output.row(r);
                auto g = out.row(r);
                double dot = 0.0;
                for (std::size_t k = 0; k < g.size(); ++k) dot += g[k] * y[k];
                for (std::size_t k = 0; k < g.size(); ++k) g[k] = y[k] * (g[k] - dot);
            }
            break;
        }
    }
    return out;
}

Tensor dense_forward(const Layer& layer, const Tensor& x) {
    const std::size_t n = x.dim(0);
    const std::size_t in = layer.weight.dim(1);
    const std::size_t out = layer.weight.dim(0);
    Tensor z({n, out});
    const double* w = layer.weight.data();
    const double* b = layer.bias.data();
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.data() + r * in;
        double* zr = z.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wo = w + o * in;
            double acc = b[o];
            for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xr[i];
            zr[o] = acc;
        }
    }
    return z;
}

struct ConvDims {
    std::size_t n, c, h, w, f, k, s, oh, ow;
};

ConvDims conv_dims(const Layer& layer, const Tensor& x) {
    ConvDims d{};
    d.n = x.dim(0);
    d.c = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.f = layer.conv.filters;
    d.k = layer.conv.kernel;
    d.s = layer.conv.stride;
    d.oh = (d.h - d.k) / d.s + 1;
    d.ow = (d.w - d.k) / d.s + 1;
    return d;
}

// Patches of sample n as rows [oh * ow, c * k * k], ordered like the weight's (c, ky, kx).
void im2col(const ConvDims& d, const double* xn, std::vector<double>& cols) {
    const std::size_t kk = d.c * d.k * d.k;
    cols.resize(d.oh * d.ow * kk);
    double* out = cols.data();
    for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
            for (std::size_t c = 0; c < d.c; ++c) {
                const double* xc = xn + (c * d.h + oy * d.s) * d.w + ox * d.s;
                for (std::size_t ky = 0; ky < d.k; ++ky) {
                    const double* xrow = xc + ky * d.w;
                    for (std::size_t kx = 0; kx < d.k; ++kx) *out++ = xrow[kx];
                }
            }
        }
    }
}

Tensor conv_forward(const Layer& layer, const Tensor& x) {
    const auto d = conv_dims(layer, x);
    const std::size_t kk = d.c * d.k * d.k;
    const std::size_t np = d.oh * d.ow;
    Tensor z({d.n, d.f, d.oh, d.ow});
    const double* w = layer.weight.data();
    std::vector<double> cols;
    for (std::size_t n = 0; n < d.n; ++n) {
        im2col(d, x.data() + n * d.c * d.h * d.w, cols);
        double* zn = z.data() + n * d.f * np;
        for (std::size_t f = 0; f < d.f; ++f) {
            const double* wf = w + f * kk;
            for (std::size_t p = 0; p < np; ++p) {
                const double* col = cols.data() + p * kk;
                double acc = layer.bias[f];
                for (std::size_t i = 0; i < kk; ++i) acc += wf[i] * col[i];
                zn[f * np + p] = acc;
            }
        }
    }
    return z;
}

void conv_backward(const Layer& layer, const Tensor& x, const Tensor& dz, ParamGrad& g, Tensor& dx) {
    const auto d = conv_dims(layer, x);
    const std::size_t kk = d.c * d.k * d.k;
    const std::size_t np = d.oh * d.ow;
    g.weight = Tensor(layer.weight.shape());
    g.bias = Tensor(layer.bias.shape());
    dx = Tensor(x.shape());
    const double* w = layer.weight.data();
    double* gw = g.weight.data();
    std::vector<double> cols, dcols(np * kk);
    for (std::size_t n = 0; n < d.n; ++n) {
        im2col(d, x.data() + n * d.c * d.h * d.w, cols);
        std::fill(dcols.begin(), dcols.end(), 0.0);
        const double* dzn = dz.data() + n * d.f * np;
        for (std::size_t f = 0; f < d.f; ++f) {
            const double* wf = w + f * kk;
            double* gwf = gw + f * kk;
            for (std::size_t p = 0; p < np; ++p) {
                const double gz = dzn[f * np + p];
                if (gz == 0.0) continue;
                g.bias[f] += gz;
                const double* col = cols.data() + p * kk;
                double* dcol = dcols.data() + p * kk;
                for (std::size_t i = 0; i < kk; ++i) {
                    gwf[i] += gz * col[i];
                    dcol[i] += gz * wf[i];
                }
            }
        }
        // scatter patch gradients back onto the input
        double* dxn = dx.data() + n * d.c * d.h * d.w;
        const double* src = dcols.data();
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
            for (std::size_t ox = 0; ox < d.ow; ++ox) {
                for (std::size_t c = 0; c < d.c; ++c) {
                    double* dc = dxn + (c * d.h + oy * d.s) * d.w + ox * d.s;
                    for (std::size_t ky = 0; ky < d.k; ++ky) {
                        double* drow = dc + ky * d.w;
                        for (std::size_t kx = 0; kx < d.k; ++kx) drow[kx] += *src++;
                    }
                }
            }
        }
    }
}

Tensor batchnorm_eval(const Layer& layer, const Tensor& x) {
    const std::size_t n = x.dim(0);
    const std::size_t f = x.row_size();
    Tensor y(x.shape());
    for (std::size_t j = 0; j < f; ++j) {
        const double inv = 1.0 / std::sqrt(layer.running_var[j] + layer.epsilon);
        for (std::size_t r = 0; r < n; ++r) {
            const double xh = (x[r * f + j] - layer.running_mean[j]) * inv;
            y[r * f + j] = layer.weight[j] * xh + layer.bias[j];
        }
    }
    return y;
}

Tensor batchnorm_train(Layer& layer, const Tensor& x, LayerCache& cache) {
    const std::size_t n = x.dim(0);
    const std::size_t f = x.row_size();
    Tensor y(x.shape());
    cache.normalized = Tensor(x.shape());
    cache.inv_std.assign(f, 0.0);
    for (std::size_t j = 0; j < f; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += x[r * f + j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double dv = x[r * f + j] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + layer.epsilon);
        cache.inv_std[j] = inv;
        for (std::size_t r = 0; r < n; ++r) {
            const double xh = (x[r * f + j] - mean) * inv;
            cache.normalized[r * f + j] = xh;
            y[r * f + j] = layer.weight[j] * xh + layer.bias[j];
        }
        layer.running_mean[j] = layer.momentum * layer.running_mean[j] + (1.0 - layer.momentum) * mean;
        layer.running_var[j] = layer.momentum * layer.running_var[j] + (1.0 - layer.momentum) * var;
    }
    return y;
}

Tensor flatten(const Tensor& x) {
    Tensor y = x;
    y.reshape({x.dim(0), x.row_size()});
    return y;
}

Tensor linear_part_eval(const Layer& layer, const Tensor& x) {
    switch (layer.kind) {
        case LayerKind::dense:
            return dense_forward(layer, x);
        case LayerKind::conv2d:
            return conv_forward(layer, x);
        case LayerKind::batchnorm:
            return batchnorm_eval(layer, x);
        case LayerKind::flatten:
            return flatten(x);
    }
    return x;
}

void check_batch(const Network& net, const Tensor& batch) {
    if (batch.rank() < 2) throw ConfigError("batch must have a leading batch dimension, got " + shape_str(batch.shape()));
    Shape sample(batch.shape().begin() + 1, batch.shape().end());
    net.validate(sample);
}

void check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite values in ") + where);
}

}  // namespace

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

std::string to_string(Activation act) {
    switch (act) {
        case Activation::none: return "none";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

Layer Layer::dense(std::size_t in, std::size_t out, Activation act, double l2) {
    if (in == 0 || out == 0) throw ConfigError("dense layer needs positive in/out");
    if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
    Layer l;
    l.kind = LayerKind::dense;
    l.activation = act;
    l.l2 = l2;
    l.weight = Tensor({out, in});
    l.bias = Tensor({out});
    return l;
}

Layer Layer::conv2d(std::size_t in_channels, std::size_t filters, std::size_t kernel, std::size_t stride,
                    Activation act, double l2) {
    if (in_channels == 0 || filters == 0 || kernel == 0 || stride == 0) {
        throw ConfigError("conv2d needs positive channels, filters, kernel and stride");
    }
    if (act == Activation::softmax) throw ConfigError("softmax is only supported on dense layers");
    if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
    Layer l;
    l.kind = LayerKind::conv2d;
    l.activation = act;
    l.l2 = l2;
    l.conv = {in_channels, filters, kernel, stride};
    l.weight = Tensor({filters, in_channels, kernel, kernel});
    l.bias = Tensor({filters});
    return l;
}

Layer Layer::batchnorm(std::size_t features) {
    if (features == 0) throw ConfigError("batchnorm needs positive feature count");
    Layer l;
    l.kind = LayerKind::batchnorm;
    l.weight = Tensor({features}, 1.0);
    l.bias = Tensor({features});
    l.running_mean = Tensor({features});
    l.running_var = Tensor({features}, 1.0);
    return l;
}

Layer Layer::flatten() {
    Layer l;
    l.kind = LayerKind::flatten;
    return l;
}

Shape Layer::output_shape(const Shape& in) const {
    switch (kind) {
        case LayerKind::dense:
            if (in.size() != 1 || in[0] != weight.dim(1)) {
                throw ConfigError("dense layer expects input [" + std::to_string(weight.dim(1)) + "], got " +
                                  shape_str(in));
            }
            return {weight.dim(0)};
        case LayerKind::conv2d: {
            if (in.size() != 3 || in[0] != conv.in_channels || in[1] < conv.kernel || in[2] < conv.kernel) {
                throw ConfigError("conv2d expects input [" + std::to_string(conv.in_channels) + ", >=" +
                                  std::to_string(conv.kernel) + ", >=" + std::to_string(conv.kernel) + "], got " +
                                  shape_str(in));
            }
            return {conv.filters, (in[1] - conv.kernel) / conv.stride + 1, (in[2] - conv.kernel) / conv.stride + 1};
        }
        case LayerKind::batchnorm:
            if (in.size() != 1 || in[0] != weight.dim(0)) {
                throw ConfigError("batchnorm expects input [" + std::to_string(weight.dim(0)) + "], got " +
                                  shape_str(in));
            }
            return in;
        case LayerKind::flatten:
            return {shape_size(in)};
    }
    return in;
}

Network::Network(std::vector<Layer> layers, Loss loss) : layers_(std::move(layers)), loss_(loss) {
    if (layers_.empty()) throw ConfigError("network needs at least one layer");
    if (auto s = input_shape()) validate(*s);
}

std::optional<Shape> Network::input_shape() const {
    if (layers_.empty()) return std::nullopt;
    const auto& first = layers_.front();
    switch (first.kind) {
        case LayerKind::dense: return Shape{first.weight.dim(1)};
        case LayerKind::batchnorm: return Shape{first.weight.dim(0)};
        default: return std::nullopt;
    }
}

std::size_t Network::output_size() const {
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        if (it->kind == LayerKind::dense || it->kind == LayerKind::batchnorm) return it->weight.dim(0);
    }
    return 0;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

void Network::validate(const Shape& sample_shape) const {
    Shape s = sample_shape;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        try {
            s = layers_[i].output_shape(s);
        } catch (const ConfigError& e) {
            throw ConfigError("layer " + std::to_string(i) + " (" + to_string(layers_[i].kind) + "): " + e.what());
        }
        if (layers_[i].activation == Activation::softmax && s.size() != 1) {
            throw ConfigError("softmax activation requires a flat output");
        }
    }
}

Tensor Network::forward_train(const Tensor& batch) {
    check_batch(*this, batch);
    caches_.assign(layers_.size(), LayerCache{});
    Tensor x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto& layer = layers_[i];
        auto& cache = caches_[i];
        cache.input = x;
        Tensor z = layer.kind == LayerKind::batchnorm ? batchnorm_train(layer, x, cache) : linear_part_eval(layer, x);
        Tensor a = z;
        apply_activation(layer, a);
        cache.pre_activation = std::move(z);
        cache.output = a;
        x = std::move(a);
    }
    check_finite(x, "forward pass");
    return x;
}

Tensor Network::predict(const Tensor& batch) const {
    check_batch(*this, batch);
    Tensor x = batch;
    for (const auto& layer : layers_) {
        x = linear_part_eval(layer, x);
        apply_activation(layer, x);
    }
    check_finite(x, "forward pass");
    return x;
}

GradientSet Network::backprop(const Tensor& output_grad) const {
    if (caches_.size() != layers_.size()) throw LogicError("backprop requires a preceding training forward pass");
    GradientSet grads;
    grads.layers.resize(layers_.size());
    Tensor g = output_grad;
    for (std::size_t idx = layers_.size(); idx-- > 0;) {
        const auto& layer = layers_[idx];
        const auto& cache = caches_[idx];
        Tensor dz = activation_backward(layer, g, cache);
        auto& pg = grads.layers[idx];
        switch (layer.kind) {
            case LayerKind::dense: {
                const std::size_t n = cache.input.dim(0);
                const std::size_t in = layer.weight.dim(1);
                const std::size_t out = layer.weight.dim(0);
                pg.weight = Tensor(layer.weight.shape());
                pg.bias = Tensor(layer.bias.shape());
                Tensor dx(cache.input.shape());
                for (std::size_t r = 0; r < n; ++r) {
                    const double* xr = cache.input.data() + r * in;
                    const double* dzr = dz.data() + r * out;
                    double* dxr = dx.data() + r * in;
                    for (std::size_t o = 0; o < out; ++o) {
                        const double d = dzr[o];
                        if (d == 0.0) continue;
                        pg.bias[o] += d;
                        double* gw = pg.weight.data() + o * in;
                        const double* w = layer.weight.data() + o * in;
                        for (std::size_t i = 0; i < in; ++i) {
                            gw[i] += d * xr[i];
                            dxr[i] += d * w[i];
                        }
                    }
                }
                g = std::move(dx);
                break;
            }
            case LayerKind::conv2d: {
                Tensor dx;
                conv_backward(layer, cache.input, dz, pg, dx);
                g = std::move(dx);
                break;
            }
            case LayerKind::batchnorm: {
                const std::size_t n = dz.dim(0);
                const std::size_t f = dz.row_size();
                pg.weight = Tensor(layer.weight.shape());
                pg.bias = Tensor(layer.bias.shape());
                Tensor dx(dz.shape());
                const double nn = static_cast<double>(n);
                for (std::size_t j = 0; j < f; ++j) {
                    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                    for (std::size_t r = 0; r < n; ++r) {
                        const double dy = dz[r * f + j];
                        const double xh = cache.normalized[r * f + j];
                        pg.weight[j] += dy * xh;
                        pg.bias[j] += dy;
                        const double dxh = dy * layer.weight[j];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh;
                    }
                    for (std::size_t r = 0; r < n; ++r) {
                        const double dxh = dz[r * f + j] * layer.weight[j];
                        const double xh = cache.normalized[r * f + j];
                        dx[r * f + j] = cache.inv_std[j] / nn * (nn * dxh - sum_dxh - xh * sum_dxh_xh);
                    }
                }
                g = std::move(dx);
                break;
            }
            case LayerKind::flatten: {
                Tensor dx = dz;
                dx.reshape(cache.input.shape());
                g = std::move(dx);
                break;
            }
        }
    }
    return grads;
}

Tensor forward(Network& net, const Tensor& batch, Mode mode) {
    return mode == Mode::train ? net.forward_train(batch) : net.predict(batch);
}

double loss_and_grad(Loss loss, const Tensor& output, const Tensor& target, const Tensor* mask, Tensor* grad) {
    if (output.shape() != target.shape()) {
        throw ConfigError("target shape " + shape_str(target.shape()) + " does not match output " +
                          shape_str(output.shape()));
    }
    if (mask && mask->shape() != target.shape()) throw ConfigError("mask shape does not match target");
    const double n = static_cast<double>(output.dim(0));
    if (grad) *grad = Tensor(output.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double m = mask ? (*mask)[i] : 1.0;
        if (m == 0.0) continue;
        if (loss == Loss::mse) {
            const double diff = output[i] - target[i];
            total += m * diff * diff;
            if (grad) (*grad)[i] = m * diff / n;
        } else {
            const double t = target[i];
            if (t == 0.0) continue;
            const double p = output[i];
            const bool clamped = p < kProbFloor;
            total -= m * t * std::log(clamped ? kProbFloor : std::min(p, 1.0));
            if (grad && !clamped) (*grad)[i] = -m * t / p / n;
        }
    }
    return loss == Loss::mse ? total / (2.0 * n) : total / n;
}

GradientSet backward(Network& net, const Tensor& batch, const Tensor& target, const Tensor* mask) {
    Tensor out = net.forward_train(batch);
    Tensor grad;
    const double loss = loss_and_grad(net.loss(), out, target, mask, &grad);
    GradientSet gs = net.backprop(grad);
    gs.loss = loss;
    return gs;
}

void sgd_step(Network& net, const GradientSet& grads, double lr) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    auto& layers = net.layers();
    if (grads.layers.size() != layers.size()) throw ConfigError("gradient set does not match network");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = layers[i];
        if (!l.has_params()) continue;
        const auto& g = grads.layers[i];
        auto update = [&](Tensor& p, const Tensor& dp) {
            if (dp.size() != p.size()) throw ConfigError("gradient shape mismatch in layer " + std::to_string(i));
            for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * (dp[k] + l.l2 * p[k]);
            check_finite(p, "sgd update");
        };
        update(l.weight, g.weight);
        update(l.bias, g.bias);
    }
}

Tensor he_uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw ConfigError("fan_in must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(shape);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

void initialize(Network& net, Rng& rng) {
    for (auto& l : net.layers()) {
        switch (l.kind) {
            case LayerKind::dense:
                l.weight = he_uniform_init(l.weight.shape(), l.weight.dim(1), rng);
                l.bias.fill(0.0);
                break;
            case LayerKind::conv2d:
                l.weight = he_uniform_init(l.weight.shape(), l.conv.in_channels * l.conv.kernel * l.conv.kernel, rng);
                l.bias.fill(0.0);
                break;
            case LayerKind::batchnorm:
                l.weight.fill(1.0);
                l.bias.fill(0.0);
                l.running_mean.fill(0.0);
                l.running_var.fill(1.0);
                break;
            case LayerKind::flatten:
                break;
        }
    }
}

std::vector<double> softmax(std::span<const double> v, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be positive");
    std::vector<double> out(v.size());
    if (v.empty()) return out;
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp((v[i] - mx) / temperature);
        sum += out[i];
    }
    for (auto& o : out) o /= sum;
    return out;
}

Tensor softmax(const Tensor& v, double temperature) {
    Tensor out(v.shape());
    if (v.rank() <= 1) {
        auto s = softmax(v.values(), temperature);
        std::copy(s.begin(), s.end(), out.values().begin());
        return out;
    }
    for (std::size_t r = 0; r < v.dim(0); ++r) {
        auto s = softmax(v.row(r), temperature);
        std::copy(s.begin(), s.end(), out.row(r).begin());
    }
    return out;
}

}  // namespace alrl::nn
