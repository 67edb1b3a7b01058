#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "alrl/data/dataset.hpp"
#include "alrl/data/pool.hpp"
#include "alrl/nn/network.hpp"

namespace alrl::classifier {

using data::Rng;

/// Conv(k, stride) -> Conv(k, stride) -> Flatten -> Dense(relu) -> Dense(C, softmax).
struct ICModelConfig {
    std::size_t conv1_filters = 64;
    std::size_t conv1_kernel = 3;
    std::size_t conv1_stride = 3;
    std::size_t conv2_filters = 32;
    std::size_t conv2_kernel = 3;
    std::size_t conv2_stride = 1;
    std::size_t dense_units = 24;

    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    int max_epochs = 50;
    int patience = 1;

    /// Same architecture with every layer width halved.
    static ICModelConfig halved();
};

class ICModel {
public:
    ICModel(ICModelConfig config, nn::Shape sample_shape, int num_classes);

    const ICModelConfig& config() const noexcept { return config_; }
    int num_classes() const noexcept { return num_classes_; }
    const nn::Shape& sample_shape() const noexcept { return sample_shape_; }

    const nn::Network& network() const noexcept { return net_; }
    nn::Network& network() noexcept { return net_; }

    /// Fresh He-uniform parameters.
    void reinitialize(Rng& rng);

    /// Class probabilities [N, C], evaluated in chunks.
    nn::Tensor predict_proba(const nn::Tensor& images) const;
    std::vector<int> predict(const nn::Tensor& images) const;

    /// Mean cross-entropy of the model on `ds`.
    double loss(const data::Dataset& ds) const;

private:
    ICModelConfig config_;
    nn::Shape sample_shape_;
    int num_classes_;
    nn::Network net_;
};

/// Patience-based stop rule on a sequence of validation losses: an epoch whose
/// loss is not strictly below the previous epoch's extends a streak; once the
/// streak reaches `patience`, training stops and the parameters from the epoch
/// just before the streak are kept. The first epoch is always accepted.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience);

    /// Records the validation loss of the next epoch. Returns true to continue.
    bool observe(double val_loss);

    bool stopped() const noexcept { return stopped_; }
    /// 1-based epoch whose parameters should be kept.
    int best_epoch() const noexcept { return keep_epoch_; }
    int epochs_seen() const noexcept { return epochs_; }

private:
    int patience_;
    int epochs_ = 0;
    int streak_ = 0;
    int keep_epoch_ = 0;
    double previous_ = 0.0;
    bool stopped_ = false;
};

struct FitReport {
    int epochs_run = 0;
    int kept_epoch = 0;
    bool stopped_early = false;
    std::vector<double> val_losses;
};

/// Trains on the labeled set of `pool` starting from the current parameters
/// (plain SGD, shuffled minibatches), evaluating cross-entropy on
/// `reduced_val` after every epoch and stopping per EarlyStopping.
FitReport fit(ICModel& model, const data::DataPool& pool, const data::Dataset& reduced_val, Rng& rng);

/// Per-class F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0;
/// macro = unweighted mean over all `num_classes` classes.
double macro_f1(std::span<const int> predicted, std::span<const int> truth, int num_classes);
double macro_f1(const ICModel& model, const data::Dataset& ds);

/// Exponential moving average of F1: the first value is taken as is,
/// afterwards current <- alpha * current + (1 - alpha) * raw.
class F1Tracker {
public:
    explicit F1Tracker(double alpha = 0.7) : alpha_(alpha) {}

    double update(double raw);
    void reset() noexcept { initialized_ = false; current_ = 0.0; }

    double current() const noexcept { return current_; }
    bool initialized() const noexcept { return initialized_; }
    double alpha() const noexcept { return alpha_; }

private:
    double alpha_;
    double current_ = 0.0;
    bool initialized_ = false;
};

inline constexpr std::size_t kModelMetricCount = 24;
using ModelMetrics = std::array<double, kModelMetricCount>;

/// Mean, population std and L2 norm of each parameter tensor in layer order
/// (conv1.W, conv1.b, conv2.W, conv2.b, dense.W, dense.b, out.W, out.b).
ModelMetrics extract_metrics(const ICModel& model);

void save_model(const std::filesystem::path& path, const ICModel& model);
ICModel load_model(const std::filesystem::path& path);

}  // namespace alrl::classifier
