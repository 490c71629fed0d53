#pragma once

// HYCW checkpoint file, little-endian throughout:
//
//   "HYCW"            4 bytes magic
//   version           u16 (currently 1)
//   bands             u32
//   group_depth       u32
//   embed_dim         u32
//   blocks            u32
//   heads             u32
//   hidden_dim        u32
//   latent_channels   u32
//   block_mlp_dim     u32
//   leaky_slope       f64
//   use_bias          u8
//   seed              u64
//   weights           f32 each, arrays in ModelWeights::parameters() order,
//                     each array row-major
//   fingerprint       u64, FNV-1a 64 over every preceding byte
//
// The fingerprint identifies the model in compressed files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hycot/model.hpp"

namespace hycot {

inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 4 + 2 + 8 * 4 + 8 + 1 + 8;

std::vector<std::uint8_t> serialize_checkpoint(const ModelWeights& weights);
/// Throws FormatError on bad magic, version, truncation or fingerprint mismatch.
ModelWeights deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_checkpoint(const std::filesystem::path& path);

/// Fingerprint the weights would carry once written to disk.
std::uint64_t model_fingerprint(const ModelWeights& weights);

/// Rounds every weight to 32-bit precision, i.e. what a save/load cycle does.
ModelWeights round_to_checkpoint_precision(const ModelWeights& weights);

}  // namespace hycot
