#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evrecon/nn/unet.hpp"

namespace evrecon::nn {

inline constexpr std::uint32_t kWeightsVersion = 1;

// "E2VW", u32 version, u32 field count + i32 config fields, u32 block count,
// per block (u32 rank, u32 dims[rank], float32 values), trailing CRC32 of all
// preceding bytes. Little-endian throughout.
std::vector<unsigned char> serialize_weights(const NetworkWeights& weights);
NetworkWeights deserialize_weights(const std::vector<unsigned char>& bytes);

void save_weights(const NetworkWeights& weights, const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path);

/// Throws ConfigError if the network was not built for this B and K.
void require_compatible(const NetConfig& config, int bins, int recurrent_frames);

}  // namespace evrecon::nn
