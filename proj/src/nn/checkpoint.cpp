#include "alrl/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "alrl/errors.hpp"

namespace alrl::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'A', 'L', 'R', 'L', 'N', 'E', 'T', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
    T get() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) throw ParseError("truncated checkpoint", offset_);
        offset_ += sizeof(T);
        return v;
    }

    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) throw ParseError("truncated checkpoint", offset_);
        offset_ += n;
    }

    std::size_t offset() const { return offset_; }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

void put_tensor(std::ostream& out, const Tensor& t) {
    if (t.empty()) {
        put<std::uint32_t>(out, 0);
        put<std::uint64_t>(out, 0);
        return;
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    put<std::uint64_t>(out, t.size());
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor get_tensor(Reader& r) {
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw ParseError("implausible tensor rank " + std::to_string(rank), r.offset());
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    const auto count = r.get<std::uint64_t>();
    if (rank == 0) {
        if (count != 0) throw ParseError("rank-0 tensor with data", r.offset());
        return {};
    }
    if (count != shape_size(shape)) throw ParseError("tensor element count does not match its shape", r.offset());
    std::vector<double> values(count);
    r.bytes(reinterpret_cast<char*>(values.data()), count * sizeof(double));
    return Tensor(std::move(shape), std::move(values));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Network& net, const std::string& metadata) {
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(metadata.size()));
    out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(net.loss()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& l : net.layers()) {
        put<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
        put<double>(out, l.leaky_slope);
        put<double>(out, l.l2);
        put<std::uint64_t>(out, l.conv.in_channels);
        put<std::uint64_t>(out, l.conv.filters);
        put<std::uint64_t>(out, l.conv.kernel);
        put<std::uint64_t>(out, l.conv.stride);
        put<double>(out, l.momentum);
        put<double>(out, l.epsilon);
        put_tensor(out, l.weight);
        put_tensor(out, l.bias);
        put_tensor(out, l.running_mean);
        put_tensor(out, l.running_var);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
    Reader r(in);
    std::array<char, 8> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != kMagic) throw ParseError("not a network checkpoint (bad magic)", 0);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version), r.offset() - 4);
    }
    Checkpoint ck;
    const auto meta_len = r.get<std::uint32_t>();
    ck.metadata.resize(meta_len);
    r.bytes(ck.metadata.data(), meta_len);
    const auto loss = r.get<std::uint8_t>();
    if (loss > 1) throw ParseError("unknown loss id", r.offset() - 1);
    const auto count = r.get<std::uint32_t>();
    std::vector<Layer> layers(count);
    for (auto& l : layers) {
        const auto kind = r.get<std::uint8_t>();
        const auto act = r.get<std::uint8_t>();
        if (kind > 3 || act > 3) throw ParseError("unknown layer kind or activation", r.offset() - 1);
        l.kind = static_cast<LayerKind>(kind);
        l.activation = static_cast<Activation>(act);
        l.leaky_slope = r.get<double>();
        l.l2 = r.get<double>();
        l.conv.in_channels = r.get<std::uint64_t>();
        l.conv.filters = r.get<std::uint64_t>();
        l.conv.kernel = r.get<std::uint64_t>();
        l.conv.stride = r.get<std::uint64_t>();
        l.momentum = r.get<double>();
        l.epsilon = r.get<double>();
        l.weight = get_tensor(r);
        l.bias = get_tensor(r);
        l.running_mean = get_tensor(r);
        l.running_var = get_tensor(r);
    }
    ck.network = Network(std::move(layers), static_cast<Loss>(loss));
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, const std::string& metadata) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_checkpoint(out, net, metadata);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace alrl::nn
