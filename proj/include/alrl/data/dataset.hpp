#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "alrl/data/idx.hpp"
#include "alrl/nn/tensor.hpp"

namespace alrl::data {

using Rng = std::mt19937_64;
using Id = std::size_t;

/// Images [N, 1, H, W] with pixel values in [0, 1] and labels in [0, C).
struct Dataset {
    nn::Tensor images;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t height() const { return images.dim(2); }
    std::size_t width() const { return images.dim(3); }
    nn::Shape sample_shape() const { return {1, height(), width()}; }

    /// Throws ConfigError unless every invariant holds.
    void validate() const;
};

/// Maps 0..255 to [0, 1]; 0 -> 0.0 and 255 -> 1.0 exactly.
inline double normalize_pixel(std::uint8_t v) { return static_cast<double>(v) / 255.0; }

Dataset make_dataset(const IdxArray& images, const IdxArray& labels, int num_classes = 0);
/// Inverse of make_dataset for datasets whose pixels are multiples of 1/255.
std::pair<IdxArray, IdxArray> to_idx(const Dataset& ds);

/// Rows of `ds.images` for `ids`, as a batch tensor [ids.size(), 1, H, W].
nn::Tensor gather_images(const Dataset& ds, std::span<const Id> ids);
std::vector<int> gather_labels(const Dataset& ds, std::span<const Id> ids);
Dataset subset(const Dataset& ds, std::span<const Id> ids);

struct ValidationSplit {
    Dataset full;
    Dataset reduced;
};

/// Reduced set = first `reduced_size` samples of `full` after a seeded shuffle.
ValidationSplit make_validation_split(Dataset full, std::size_t reduced_size, Rng& rng);

struct MnistData {
    Dataset train;
    Dataset test;
};

/// Loads the four standard MNIST files from `dir` (plain or .gz).
MnistData load_mnist(const std::filesystem::path& dir);

/// Class-conditional blob images shaped like MNIST, for fast tests. Each class
/// owns `styles_per_class` prototypes built from Gaussian blobs (the first
/// style is the common one); samples jitter position and intensity and add
/// pixel noise. `prototype_seed` fixes the class structure so train and
/// validation sets drawn with different `seed`s come from one distribution.
struct SyntheticSpec {
    int classes = 10;
    std::size_t side = 12;
    std::size_t samples = 2000;
    int styles_per_class = 2;
    double common_style_weight = 0.75;
    int blobs_per_style = 3;
    double pixel_noise = 40.0;
    int max_shift = 1;
    std::uint64_t prototype_seed = 7;
    std::uint64_t seed = 1;
};

std::pair<IdxArray, IdxArray> generate_synthetic_idx(const SyntheticSpec& spec);
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace alrl::data
