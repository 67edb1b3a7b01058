#include "alrl/data/idx.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>
#include <limits>

#include "alrl/errors.hpp"

namespace alrl::data {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
    if (off + 4 > b.size()) throw ParseError("truncated header", b.size());
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
    const auto magic = read_be32(bytes, 0);
    if (magic != kIdxImageMagic && magic != kIdxLabelMagic) {
        throw ParseError("bad IDX magic", 0);
    }
    const std::size_t ndims = magic & 0xff;
    IdxArray out;
    out.dims.resize(ndims);
    std::size_t offset = 4;
    std::size_t count = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
        out.dims[i] = read_be32(bytes, offset);
        if (out.dims[i] != 0 && count > std::numeric_limits<std::size_t>::max() / out.dims[i]) {
            throw ParseError("dimension product overflows", offset);
        }
        count *= out.dims[i];
        offset += 4;
    }
    const std::size_t available = bytes.size() - offset;
    if (available < count) {
        throw ParseError("truncated payload: expected " + std::to_string(count) + " bytes, found " +
                             std::to_string(available),
                         bytes.size());
    }
    if (available > count) {
        throw ParseError("trailing bytes after payload", offset + count);
    }
    out.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return out;
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& array) {
    if (!array.is_images() && !array.is_labels()) {
        throw ConfigError("IDX arrays must have 1 (labels) or 3 (images) dimensions");
    }
    std::size_t count = 1;
    for (auto d : array.dims) count *= d;
    if (count != array.values.size()) throw ConfigError("IDX payload size does not match dims");
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * array.dims.size() + array.values.size());
    put_be32(out, array.is_images() ? kIdxImageMagic : kIdxLabelMagic);
    for (auto d : array.dims) put_be32(out, d);
    out.insert(out.end(), array.values.begin(), array.values.end());
    return out;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw std::runtime_error("inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    std::vector<std::uint8_t> out;
    std::uint8_t chunk[1 << 16];
    int ret = Z_OK;
    while (ret != Z_STREAM_END) {
        zs.next_out = chunk;
        zs.avail_out = sizeof(chunk);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            const auto at = zs.total_in;
            inflateEnd(&zs);
            throw ParseError("corrupt gzip stream", at);
        }
        out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
        if (ret == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            const auto at = zs.total_in;
            inflateEnd(&zs);
            throw ParseError("truncated gzip stream", at);
        }
    }
    inflateEnd(&zs);
    return out;
}

IdxArray read_idx_file(const std::filesystem::path& path) {
    auto bytes = read_all(path);
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) bytes = gunzip(bytes);
    return parse_idx(bytes);
}

void write_idx_file(const std::filesystem::path& path, const IdxArray& array) {
    const auto bytes = serialize_idx(array);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace alrl::data
