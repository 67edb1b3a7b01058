#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace alrl::data {

/// Decoded IDX container with an unsigned-byte payload.
struct IdxArray {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> values;

    bool is_images() const { return dims.size() == 3; }
    bool is_labels() const { return dims.size() == 1; }
    friend bool operator==(const IdxArray&, const IdxArray&) = default;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Decodes a big-endian IDX byte stream. Accepts exactly the image (0x803,
/// three dims) and label (0x801, one dim) magics; the payload must match
/// the declared dims exactly. Throws ParseError with the failing offset.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_idx(const IdxArray& array);

/// Reads an IDX file; a 0x1f 0x8b prefix is treated as gzip and inflated first.
IdxArray read_idx_file(const std::filesystem::path& path);
void write_idx_file(const std::filesystem::path& path, const IdxArray& array);

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);

}  // namespace alrl::data
