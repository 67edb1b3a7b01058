#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "alrl/nn/network.hpp"

namespace alrl::nn {

/// Binary network container, little-endian throughout:
///
///   char[8]  magic "ALRLNET\0"
///   u32      version (1)
///   u32      metadata length M, then M bytes of UTF-8 (JSON by convention, may be empty)
///   u8       loss (0 = mse, 1 = cross_entropy)
///   u32      layer count
///   per layer:
///     u8 kind, u8 activation, f64 leaky_slope, f64 l2,
///     u64 in_channels, u64 filters, u64 kernel, u64 stride,
///     f64 momentum, f64 epsilon,
///     4 tensors in order weight, bias, running_mean, running_var, each
///       u32 rank, u64 dims[rank], u64 element count, f64 values[count]
///
/// An absent tensor is written as rank 0 with element count 0.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Network network;
    std::string metadata;
};

void write_checkpoint(std::ostream& out, const Network& net, const std::string& metadata = {});
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Network& net, const std::string& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace alrl::nn
