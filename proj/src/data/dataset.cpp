#include "alrl/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alrl/errors.hpp"

namespace alrl::data {

void Dataset::validate() const {
    if (images.rank() != 4 || images.dim(1) != 1) {
        throw ConfigError("dataset images must be [N, 1, H, W], got " + nn::shape_str(images.shape()));
    }
    if (images.dim(0) != labels.size()) throw ConfigError("image and label counts differ");
    if (num_classes < 2) throw ConfigError("dataset needs at least 2 classes");
    for (int l : labels) {
        if (l < 0 || l >= num_classes) throw ConfigError("label " + std::to_string(l) + " outside [0, C)");
    }
    for (double v : images.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("pixel value outside [0, 1]");
    }
}

Dataset make_dataset(const IdxArray& images, const IdxArray& labels, int num_classes) {
    if (!images.is_images()) throw ConfigError("expected a 3-dimensional IDX image array");
    if (!labels.is_labels()) throw ConfigError("expected a 1-dimensional IDX label array");
    if (images.dims[0] != labels.dims[0]) throw ConfigError("image and label files disagree on sample count");
    if (images.dims[0] == 0) throw ConfigError("empty dataset");
    Dataset ds;
    std::vector<double> px(images.values.size());
    std::transform(images.values.begin(), images.values.end(), px.begin(), normalize_pixel);
    ds.images = nn::Tensor({images.dims[0], 1, images.dims[1], images.dims[2]}, std::move(px));
    ds.labels.assign(labels.values.begin(), labels.values.end());
    const int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
    ds.num_classes = num_classes > 0 ? num_classes : max_label + 1;
    ds.validate();
    return ds;
}

std::pair<IdxArray, IdxArray> to_idx(const Dataset& ds) {
    IdxArray img, lab;
    img.dims = {static_cast<std::uint32_t>(ds.size()), static_cast<std::uint32_t>(ds.height()),
                static_cast<std::uint32_t>(ds.width())};
    img.values.reserve(ds.images.size());
    for (double v : ds.images.values()) img.values.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    lab.dims = {static_cast<std::uint32_t>(ds.size())};
    for (int l : ds.labels) lab.values.push_back(static_cast<std::uint8_t>(l));
    return {std::move(img), std::move(lab)};
}

nn::Tensor gather_images(const Dataset& ds, std::span<const Id> ids) {
    const std::size_t per = ds.height() * ds.width();
    nn::Tensor out({ids.size(), 1, ds.height(), ds.width()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= ds.size()) throw LogicError("datapoint id " + std::to_string(ids[i]) + " out of range");
        std::copy_n(ds.images.data() + ids[i] * per, per, out.data() + i * per);
    }
    return out;
}

std::vector<int> gather_labels(const Dataset& ds, std::span<const Id> ids) {
    std::vector<int> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(ds.labels.at(id));
    return out;
}

Dataset subset(const Dataset& ds, std::span<const Id> ids) {
    Dataset out;
    out.images = gather_images(ds, ids);
    out.labels = gather_labels(ds, ids);
    out.num_classes = ds.num_classes;
    return out;
}

ValidationSplit make_validation_split(Dataset full, std::size_t reduced_size, Rng& rng) {
    if (reduced_size == 0 || reduced_size > full.size()) {
        throw ConfigError("reduced validation size must be in [1, " + std::to_string(full.size()) + "]");
    }
    std::vector<Id> order(full.size());
    std::iota(order.begin(), order.end(), Id{0});
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(reduced_size);
    ValidationSplit split;
    split.reduced = subset(full, order);
    split.full = std::move(full);
    return split;
}

MnistData load_mnist(const std::filesystem::path& dir) {
    auto find = [&](const std::string& stem) {
        for (const auto& name : {stem, stem + ".gz"}) {
            if (std::filesystem::exists(dir / name)) return dir / name;
        }
        throw ConfigError("MNIST file " + stem + " not found in " + dir.string());
    };
    MnistData out;
    out.train = make_dataset(read_idx_file(find("train-images-idx3-ubyte")),
                             read_idx_file(find("train-labels-idx1-ubyte")), 10);
    out.test = make_dataset(read_idx_file(find("t10k-images-idx3-ubyte")),
                            read_idx_file(find("t10k-labels-idx1-ubyte")), 10);
    return out;
}

namespace {

struct Blob {
    double cy, cx, sigma, amp;
};

std::vector<double> render(const std::vector<Blob>& blobs, std::size_t side, double dy, double dx, double gain) {
    std::vector<double> img(side * side, 0.0);
    for (const auto& b : blobs) {
        const double inv = 1.0 / (2.0 * b.sigma * b.sigma);
        for (std::size_t y = 0; y < side; ++y) {
            for (std::size_t x = 0; x < side; ++x) {
                const double ry = static_cast<double>(y) - (b.cy + dy);
                const double rx = static_cast<double>(x) - (b.cx + dx);
                img[y * side + x] += gain * b.amp * std::exp(-(ry * ry + rx * rx) * inv);
            }
        }
    }
    return img;
}

}  // namespace

std::pair<IdxArray, IdxArray> generate_synthetic_idx(const SyntheticSpec& spec) {
    if (spec.classes < 2 || spec.classes > 256) throw ConfigError("synthetic classes must be in [2, 256]");
    if (spec.side < 4 || spec.samples == 0 || spec.styles_per_class < 1 || spec.blobs_per_style < 1) {
        throw ConfigError("invalid synthetic dataset spec");
    }
    Rng proto_rng(spec.prototype_seed);
    const double side = static_cast<double>(spec.side);
    std::uniform_real_distribution<double> pos(1.0, side - 2.0);
    std::uniform_real_distribution<double> sig(0.8, 1.6);
    std::uniform_real_distribution<double> amp(150.0, 255.0);
    std::vector<std::vector<std::vector<Blob>>> styles(spec.classes);
    for (auto& cls : styles) {
        cls.resize(spec.styles_per_class);
        for (auto& style : cls) {
            for (int b = 0; b < spec.blobs_per_style; ++b) style.push_back({pos(proto_rng), pos(proto_rng), sig(proto_rng), amp(proto_rng)});
        }
    }

    Rng rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> shift(-spec.max_shift, spec.max_shift);
    std::uniform_real_distribution<double> gain(0.7, 1.1);
    std::normal_distribution<double> noise(0.0, spec.pixel_noise);

    IdxArray images, labels;
    images.dims = {static_cast<std::uint32_t>(spec.samples), static_cast<std::uint32_t>(spec.side),
                   static_cast<std::uint32_t>(spec.side)};
    labels.dims = {static_cast<std::uint32_t>(spec.samples)};
    images.values.reserve(spec.samples * spec.side * spec.side);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        // round-robin classes keep the set balanced; the style draw is random
        const int c = static_cast<int>(i % static_cast<std::size_t>(spec.classes));
        int style = 0;
        if (spec.styles_per_class > 1 && unit(rng) >= spec.common_style_weight) {
            style = 1 + static_cast<int>(unit(rng) * (spec.styles_per_class - 1));
            style = std::min(style, spec.styles_per_class - 1);
        }
        const double dy = shift(rng);
        const double dx = shift(rng);
        auto img = render(styles[c][style], spec.side, dy, dx, gain(rng));
        for (double v : img) {
            const double px = std::clamp(v + noise(rng), 0.0, 255.0);
            images.values.push_back(static_cast<std::uint8_t>(std::lround(px)));
        }
        labels.values.push_back(static_cast<std::uint8_t>(c));
    }
    // shuffle sample order so ids carry no class information
    std::vector<std::size_t> order(spec.samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    IdxArray img2 = images, lab2 = labels;
    const std::size_t per = spec.side * spec.side;
    for (std::size_t i = 0; i < spec.samples; ++i) {
        std::copy_n(images.values.begin() + static_cast<std::ptrdiff_t>(order[i] * per), per,
                    img2.values.begin() + static_cast<std::ptrdiff_t>(i * per));
        lab2.values[i] = labels.values[order[i]];
    }
    return {std::move(img2), std::move(lab2)};
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    auto [images, labels] = generate_synthetic_idx(spec);
    return make_dataset(images, labels, spec.classes);
}

}  // namespace alrl::data
