#include "alrl/classifier/ic_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "alrl/errors.hpp"
#include "alrl/nn/checkpoint.hpp"

namespace alrl::classifier {

namespace {

constexpr std::size_t kPredictChunk = 256;

nn::Network build_network(const ICModelConfig& c, const nn::Shape& sample, int classes) {
    if (sample.size() != 3) throw ConfigError("classifier input must be [channels, height, width]");
    using nn::Activation;
    using nn::Layer;
    std::vector<Layer> layers;
    layers.push_back(Layer::conv2d(sample[0], c.conv1_filters, c.conv1_kernel, c.conv1_stride, Activation::relu));
    layers.push_back(Layer::conv2d(c.conv1_filters, c.conv2_filters, c.conv2_kernel, c.conv2_stride, Activation::relu));
    layers.push_back(Layer::flatten());
    nn::Shape s = sample;
    for (const auto& l : layers) s = l.output_shape(s);
    layers.push_back(Layer::dense(s[0], c.dense_units, Activation::relu));
    layers.push_back(Layer::dense(c.dense_units, static_cast<std::size_t>(classes), Activation::softmax));
    nn::Network net(std::move(layers), nn::Loss::cross_entropy);
    net.validate(sample);
    return net;
}

nn::Tensor one_hot(std::span<const int> labels, int classes) {
    nn::Tensor t({labels.size(), static_cast<std::size_t>(classes)});
    for (std::size_t i = 0; i < labels.size(); ++i) t[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(labels[i])] = 1.0;
    return t;
}

}  // namespace

ICModelConfig ICModelConfig::halved() {
    ICModelConfig c;
    c.conv1_filters /= 2;
    c.conv2_filters /= 2;
    c.dense_units /= 2;
    return c;
}

ICModel::ICModel(ICModelConfig config, nn::Shape sample_shape, int num_classes)
    : config_(config), sample_shape_(std::move(sample_shape)), num_classes_(num_classes) {
    if (num_classes_ < 2) throw ConfigError("classifier needs at least 2 classes");
    if (config_.batch_size == 0 || config_.max_epochs < 1 || config_.patience < 1 || !(config_.learning_rate > 0.0)) {
        throw ConfigError("invalid classifier training configuration");
    }
    net_ = build_network(config_, sample_shape_, num_classes_);
}

void ICModel::reinitialize(Rng& rng) { nn::initialize(net_, rng); }

nn::Tensor ICModel::predict_proba(const nn::Tensor& images) const {
    const std::size_t n = images.dim(0);
    const std::size_t per = images.row_size();
    const auto c = static_cast<std::size_t>(num_classes_);
    nn::Tensor out({n, c});
    for (std::size_t start = 0; start < n; start += kPredictChunk) {
        const std::size_t m = std::min(kPredictChunk, n - start);
        nn::Shape shape = images.shape();
        shape[0] = m;
        nn::Tensor chunk(shape, std::vector<double>(images.data() + start * per, images.data() + (start + m) * per));
        auto p = net_.predict(chunk);
        std::copy(p.values().begin(), p.values().end(), out.data() + start * c);
    }
    return out;
}

std::vector<int> ICModel::predict(const nn::Tensor& images) const {
    auto p = predict_proba(images);
    std::vector<int> out(p.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = p.row(i);
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

double ICModel::loss(const data::Dataset& ds) const {
    auto p = predict_proba(ds.images);
    auto t = one_hot(ds.labels, num_classes_);
    return nn::loss_and_grad(nn::Loss::cross_entropy, p, t, nullptr, nullptr);
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("early stopping patience must be >= 1");
}

bool EarlyStopping::observe(double val_loss) {
    if (stopped_) return false;
    ++epochs_;
    if (epochs_ == 1 || val_loss < previous_) {
        streak_ = 0;
        keep_epoch_ = epochs_;
    } else if (++streak_ >= patience_) {
        stopped_ = true;
    }
    previous_ = val_loss;
    return !stopped_;
}

FitReport fit(ICModel& model, const data::DataPool& pool, const data::Dataset& reduced_val, Rng& rng) {
    const auto& labeled = pool.labeled();
    if (labeled.empty()) throw ConfigError("cannot fit the classifier on an empty labeled set");
    const auto& cfg = model.config();
    const auto& ds = pool.dataset();

    FitReport report;
    EarlyStopping stop(cfg.patience);
    std::vector<data::Id> order(labeled.begin(), labeled.end());
    nn::Network kept = model.network();

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t m = std::min(cfg.batch_size, order.size() - start);
            std::span<const data::Id> ids(order.data() + start, m);
            auto x = data::gather_images(ds, ids);
            auto labels = data::gather_labels(ds, ids);
            auto y = one_hot(labels, model.num_classes());
            auto g = nn::backward(model.network(), x, y);
            nn::sgd_step(model.network(), g, cfg.learning_rate);
        }
        const double vl = model.loss(reduced_val);
        report.val_losses.push_back(vl);
        ++report.epochs_run;
        const bool go_on = stop.observe(vl);
        if (stop.best_epoch() == report.epochs_run) kept = model.network();
        if (!go_on) break;
    }
    report.stopped_early = stop.stopped();
    report.kept_epoch = stop.best_epoch();
    if (report.stopped_early) model.network() = std::move(kept);
    return report;
}

double macro_f1(std::span<const int> predicted, std::span<const int> truth, int num_classes) {
    if (predicted.size() != truth.size()) throw ConfigError("prediction and label counts differ");
    if (truth.empty()) throw ConfigError("macro F1 of an empty set");
    const auto c = static_cast<std::size_t>(num_classes);
    std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto p = static_cast<std::size_t>(predicted[i]);
        const auto t = static_cast<std::size_t>(truth[i]);
        if (p == t) {
            ++tp[t];
        } else {
            ++fp[p];
            ++fn[t];
        }
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        const double denom = static_cast<double>(2 * tp[k] + fp[k] + fn[k]);
        sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[k]) / denom : 0.0;
    }
    return sum / static_cast<double>(c);
}

double macro_f1(const ICModel& model, const data::Dataset& ds) {
    const auto pred = model.predict(ds.images);
    return macro_f1(pred, ds.labels, model.num_classes());
}

double F1Tracker::update(double raw) {
    if (!initialized_) {
        current_ = raw;
        initialized_ = true;
    } else {
        current_ = alpha_ * current_ + (1.0 - alpha_) * raw;
    }
    return current_;
}

ModelMetrics extract_metrics(const ICModel& model) {
    ModelMetrics out{};
    std::size_t slot = 0;
    auto add = [&](const nn::Tensor& t) {
        if (slot + 3 > out.size()) throw ConfigError("classifier has more than 8 parameter tensors");
        const auto v = t.values();
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0, sq = 0.0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
            sq += x * x;
        }
        out[slot++] = mean;
        out[slot++] = std::sqrt(ss / n);
        out[slot++] = std::sqrt(sq);
    };
    for (const auto& l : model.network().layers()) {
        if (!l.has_params()) continue;
        add(l.weight);
        add(l.bias);
    }
    if (slot != out.size()) throw ConfigError("classifier must have exactly 8 parameter tensors");
    return out;
}

namespace {

nlohmann::json config_to_json(const ICModelConfig& c) {
    return {{"conv1_filters", c.conv1_filters}, {"conv1_kernel", c.conv1_kernel}, {"conv1_stride", c.conv1_stride},
            {"conv2_filters", c.conv2_filters}, {"conv2_kernel", c.conv2_kernel}, {"conv2_stride", c.conv2_stride},
            {"dense_units", c.dense_units},     {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},       {"patience", c.patience}};
}

}  // namespace

void save_model(const std::filesystem::path& path, const ICModel& model) {
    nlohmann::json meta = {{"kind", "ic_model"},
                     {"config", config_to_json(model.config())},
                     {"num_classes", model.num_classes()},
                     {"sample_shape", model.sample_shape()}};
    nn::save_checkpoint(path, model.network(), meta.dump());
}

ICModel load_model(const std::filesystem::path& path) {
    auto ck = nn::load_checkpoint(path);
    auto meta = nlohmann::json::parse(ck.metadata);
    if (meta.value("kind", "") != "ic_model") throw ConfigError(path.string() + " is not a classifier checkpoint");
    const auto& j = meta.at("config");
    ICModelConfig c;
    c.conv1_filters = j.at("conv1_filters");
    c.conv1_kernel = j.at("conv1_kernel");
    c.conv1_stride = j.at("conv1_stride");
    c.conv2_filters = j.at("conv2_filters");
    c.conv2_kernel = j.at("conv2_kernel");
    c.conv2_stride = j.at("conv2_stride");
    c.dense_units = j.at("dense_units");
    c.learning_rate = j.at("learning_rate");
    c.batch_size = j.at("batch_size");
    c.max_epochs = j.at("max_epochs");
    c.patience = j.at("patience");
    ICModel model(c, meta.at("sample_shape").get<nn::Shape>(), meta.at("num_classes").get<int>());
    if (ck.network.parameter_count() != model.network().parameter_count()) {
        throw ConfigError("checkpoint parameters do not match the recorded architecture");
    }
    model.network() = std::move(ck.network);
    return model;
}

}  // namespace alrl::classifier
