#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hycot {

/// H x W x C hyperspectral raster, values normalized to [0, 1] and stored
/// pixel-interleaved (band index innermost). raw_min/raw_max undo the
/// normalization; both default to the identity mapping.
struct HsiCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<double> data;
  double raw_min = 0.0;
  double raw_max = 1.0;

  HsiCube() = default;
  HsiCube(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0);

  std::size_t pixel_count() const { return height * width; }
  std::span<const double> pixel(std::size_t index) const;
  std::span<double> pixel(std::size_t index);
  std::span<const double> pixel(std::size_t row, std::size_t col) const {
    return pixel(row * width + col);
  }

  /// Throws DimensionError if the extents and data length disagree.
  void check_shape() const;
};

// ---- HSC1 raster file ------------------------------------------------------
//
//   offset size  field
//   0      4     magic "HSC1"
//   4      2     version (u16, currently 1)
//   6      4     H (u32)
//   10     4     W (u32)
//   14     4     C (u32)
//   18     8     raw_min (f64)
//   26     8     raw_max (f64)
//   34     4*HWC payload, f32, pixel-interleaved
//
// All fields little-endian.

inline constexpr std::uint16_t kCubeFormatVersion = 1;
inline constexpr std::size_t kCubeHeaderBytes = 34;

std::vector<std::uint8_t> encode_cube(const HsiCube& cube);
HsiCube decode_cube(std::span<const std::uint8_t> bytes);
void write_cube(const HsiCube& cube, const std::filesystem::path& path);
HsiCube read_cube(const std::filesystem::path& path);

// ---- normalization ----------------------------------------------------------

/// (x - lo) / (hi - lo) clipped to [0, 1]. Requires hi > lo.
std::vector<double> normalize(std::span<const double> raw, double lo, double hi);
std::vector<double> denormalize(std::span<const double> unit, double lo, double hi);

/// Builds a cube from raw band values using the data's own min and max.
HsiCube cube_from_raw(std::size_t h, std::size_t w, std::size_t c, std::span<const double> raw);

// ---- synthetic data ---------------------------------------------------------

struct SynthConfig {
  std::size_t cubes = 12;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t bands = 32;
  std::size_t endmembers = 4;
  double noise_sd = 0.01;
  std::uint64_t seed = 0;
};

struct SyntheticSet {
  std::vector<HsiCube> cubes;
  /// endmembers[e] is a C-band spectrum inside [0.05, 0.95].
  std::vector<std::vector<double>> endmembers;
};

/// Linear-mixing scenes: every pixel is a Dirichlet(1)-weighted combination
/// of smooth random endmember spectra plus Gaussian noise, clipped to [0, 1].
/// Deterministic per seed.
SyntheticSet synth_dataset(const SynthConfig& config);

// ---- splits and manifests ---------------------------------------------------

struct SplitFractions {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

/// Indices into the input cube list.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded random partition. Part sizes are rounded from the fractions and
/// every part with a positive fraction receives at least one cube.
DatasetSplit split_dataset(std::size_t cube_count, const SplitFractions& fractions, std::uint64_t seed);

struct ManifestEntry {
  std::string split;  // "train", "val" or "test"
  std::filesystem::path path;
};

/// One "<split> <relative path>" line per cube. Paths are relative to the
/// manifest's directory.
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

struct LoadedSplit {
  std::vector<HsiCube> train;
  std::vector<HsiCube> val;
  std::vector<HsiCube> test;
};

LoadedSplit load_manifest_cubes(const std::filesystem::path& manifest);

}  // namespace hycot
