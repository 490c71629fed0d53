#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hycot/dataio.hpp"
#include "hycot/model.hpp"

namespace hycot {

/// Latent representation of one cube: gamma values per pixel, pixel-interleaved,
/// stored at 32-bit precision with no further entropy coding.
struct CompressedImage {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t gamma = 0;
  std::uint64_t model_fingerprint = 0;
  double raw_min = 0.0;
  double raw_max = 1.0;
  std::vector<float> latents;

  bool operator==(const CompressedImage&) const = default;
};

/// Throws ConfigError when the cube's band count differs from the model's.
CompressedImage compress(const HsiCube& cube, const ModelWeights& weights, unsigned threads = 1);

/// Throws ModelMismatchError unless `weights` carries the embedded fingerprint.
HsiCube decompress(const CompressedImage& image, const ModelWeights& weights, unsigned threads = 1);

// ---- HYC1 container ---------------------------------------------------------
//
//   offset size  field
//   0      4     magic "HYC1"
//   4      2     version (u16, currently 1)
//   6      4     H (u32)
//   10     4     W (u32)
//   14     4     gamma (u32)
//   18     8     model fingerprint (u64)
//   26     8     raw_min (f64)
//   34     8     raw_max (f64)
//   42     4*HW*gamma latents, f32
//
// All fields little-endian.

inline constexpr std::uint16_t kCodecVersion = 1;
inline constexpr std::size_t kCodecHeaderBytes = 42;

std::vector<std::uint8_t> encode_compressed(const CompressedImage& image);
CompressedImage decode_compressed(std::span<const std::uint8_t> bytes);
void write_compressed(const CompressedImage& image, const std::filesystem::path& path);
CompressedImage read_compressed(const std::filesystem::path& path);

}  // namespace hycot
