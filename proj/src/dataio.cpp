#include "hycot/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "byte_io.hpp"
#include "hycot/errors.hpp"
#include "hycot/rng.hpp"

namespace hycot {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace detail

// ---- HsiCube ----------------------------------------------------------------

HsiCube::HsiCube(std::size_t h, std::size_t w, std::size_t c, double fill)
    : height(h), width(w), bands(c), data(h * w * c, fill) {}

std::span<const double> HsiCube::pixel(std::size_t index) const {
  return std::span<const double>(data).subspan(index * bands, bands);
}

std::span<double> HsiCube::pixel(std::size_t index) {
  return std::span<double>(data).subspan(index * bands, bands);
}

void HsiCube::check_shape() const {
  if (height == 0 || width == 0 || bands == 0)
    throw DimensionError("cube extents must be positive");
  if (data.size() != height * width * bands)
    throw DimensionError("cube data holds " + std::to_string(data.size()) + " values, expected " +
                         std::to_string(height * width * bands));
}

// ---- HSC1 -------------------------------------------------------------------

std::vector<std::uint8_t> encode_cube(const HsiCube& cube) {
  cube.check_shape();
  detail::ByteWriter w;
  w.bytes("HSC1");
  w.u16(kCubeFormatVersion);
  w.u32(static_cast<std::uint32_t>(cube.height));
  w.u32(static_cast<std::uint32_t>(cube.width));
  w.u32(static_cast<std::uint32_t>(cube.bands));
  w.f64(cube.raw_min);
  w.f64(cube.raw_max);
  for (double v : cube.data) w.f32(static_cast<float>(v));
  return w.take();
}

HsiCube decode_cube(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "HSC1 cube");
  if (r.remaining() < 4 || r.bytes(4) != "HSC1") throw FormatError("not an HSC1 cube file (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kCubeFormatVersion)
    throw FormatError("unsupported HSC1 version " + std::to_string(version));
  HsiCube cube;
  cube.height = r.u32();
  cube.width = r.u32();
  cube.bands = r.u32();
  cube.raw_min = r.f64();
  cube.raw_max = r.f64();
  if (cube.height == 0 || cube.width == 0 || cube.bands == 0)
    throw FormatError("HSC1 header has a zero extent");
  const unsigned __int128 n128 = static_cast<unsigned __int128>(cube.height * cube.width) * cube.bands;
  if (n128 > r.remaining() / 4)
    throw FormatError("HSC1 cube: truncated payload (header announces more values than present)");
  const auto n = static_cast<std::size_t>(n128);
  cube.data.resize(n);
  for (double& v : cube.data) v = r.f32();
  if (r.remaining() != 0) throw FormatError("HSC1 cube has " + std::to_string(r.remaining()) + " trailing bytes");
  return cube;
}

void write_cube(const HsiCube& cube, const std::filesystem::path& path) {
  detail::write_file(path, encode_cube(cube));
}

HsiCube read_cube(const std::filesystem::path& path) { return decode_cube(detail::read_file(path)); }

// ---- normalization ----------------------------------------------------------

std::vector<double> normalize(std::span<const double> raw, double lo, double hi) {
  if (!(hi > lo)) throw ContractError("normalize requires max > min");
  std::vector<double> out(raw.size());
  const double span = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::clamp((raw[i] - lo) / span, 0.0, 1.0);
  return out;
}

std::vector<double> denormalize(std::span<const double> unit, double lo, double hi) {
  if (!(hi > lo)) throw ContractError("denormalize requires max > min");
  std::vector<double> out(unit.size());
  const double span = hi - lo;
  for (std::size_t i = 0; i < unit.size(); ++i) out[i] = lo + unit[i] * span;
  return out;
}

HsiCube cube_from_raw(std::size_t h, std::size_t w, std::size_t c, std::span<const double> raw) {
  if (raw.size() != h * w * c) throw DimensionError("raw data length does not match H*W*C");
  HsiCube cube(h, w, c);
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  if (raw.empty() || !(*hi_it > *lo_it)) {
    // Constant scene: keep values as-is under the identity mapping.
    std::transform(raw.begin(), raw.end(), cube.data.begin(), [](double v) { return std::clamp(v, 0.0, 1.0); });
    return cube;
  }
  cube.raw_min = *lo_it;
  cube.raw_max = *hi_it;
  cube.data = normalize(raw, cube.raw_min, cube.raw_max);
  return cube;
}

// ---- synthetic scenes -------------------------------------------------------

namespace {

std::vector<double> smooth_spectrum(std::size_t bands, Rng& rng) {
  const double c = static_cast<double>(bands);
  std::vector<double> s(bands, rng.uniform(0.0, 0.3));
  for (int bump = 0; bump < 3; ++bump) {
    const double centre = rng.uniform(0.0, c);
    const double width = rng.uniform(c / 10.0, c / 3.0) + 0.5;
    const double amp = rng.uniform(-0.5, 1.0);
    for (std::size_t b = 0; b < bands; ++b) {
      const double z = (static_cast<double>(b) - centre) / width;
      s[b] += amp * std::exp(-0.5 * z * z);
    }
  }
  const double lo = rng.uniform(0.05, 0.3);
  const double hi = rng.uniform(0.6, 0.95);
  const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
  const double smin = *mn, smax = *mx;
  for (double& v : s) v = smax > smin ? lo + (v - smin) / (smax - smin) * (hi - lo) : 0.5 * (lo + hi);
  return s;
}

}  // namespace

SyntheticSet synth_dataset(const SynthConfig& config) {
  if (config.endmembers == 0) throw ConfigError("synthetic dataset needs at least one endmember");
  if (config.bands == 0 || config.height == 0 || config.width == 0)
    throw ConfigError("synthetic cube extents must be positive");
  Rng rng(config.seed);
  SyntheticSet set;
  for (std::size_t e = 0; e < config.endmembers; ++e) set.endmembers.push_back(smooth_spectrum(config.bands, rng));

  std::vector<double> weights(config.endmembers);
  for (std::size_t n = 0; n < config.cubes; ++n) {
    HsiCube cube(config.height, config.width, config.bands);
    for (std::size_t p = 0; p < cube.pixel_count(); ++p) {
      double total = 0.0;
      for (double& wt : weights) {
        double u;
        do {
          u = rng.uniform();
        } while (u <= 0.0);
        wt = -std::log(u);
        total += wt;
      }
      auto px = cube.pixel(p);
      for (std::size_t b = 0; b < config.bands; ++b) {
        double v = 0.0;
        for (std::size_t e = 0; e < config.endmembers; ++e) v += weights[e] / total * set.endmembers[e][b];
        if (config.noise_sd > 0.0) v += rng.normal(0.0, config.noise_sd);
        px[b] = std::clamp(v, 0.0, 1.0);
      }
    }
    set.cubes.push_back(std::move(cube));
  }
  return set;
}

// ---- splits -----------------------------------------------------------------

DatasetSplit split_dataset(std::size_t cube_count, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  const double fr[3] = {f.train, f.val, f.test};
  const std::size_t parts = static_cast<std::size_t>((f.train > 0) + (f.val > 0) + (f.test > 0));
  if (cube_count < parts)
    throw ConfigError("cannot split " + std::to_string(cube_count) + " cubes into " + std::to_string(parts) + " parts");

  const double n = static_cast<double>(cube_count);
  long sizes[3];
  for (int i = 0; i < 3; ++i) sizes[i] = fr[i] > 0 ? std::lround(fr[i] * n) : 0;
  const auto largest = [&] { return static_cast<int>(std::max_element(sizes, sizes + 3) - sizes); };
  sizes[largest()] += static_cast<long>(cube_count) - (sizes[0] + sizes[1] + sizes[2]);
  for (int i = 0; i < 3; ++i) {
    if (fr[i] > 0 && sizes[i] == 0) {
      --sizes[largest()];
      sizes[i] = 1;
    }
  }

  std::vector<std::size_t> order(cube_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = cube_count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  DatasetSplit split;
  auto it = order.begin();
  split.train.assign(it, it + sizes[0]);
  it += sizes[0];
  split.val.assign(it, it + sizes[1]);
  it += sizes[1];
  split.test.assign(it, order.end());
  return split;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries) os << e.split << ' ' << e.path.generic_string() << '\n';
  const std::string text = os.str();
  detail::write_file(manifest, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string path;
    if (!(ls >> e.split >> path) || (e.split != "train" && e.split != "val" && e.split != "test"))
      throw FormatError(manifest.string() + ":" + std::to_string(lineno) + ": expected '<train|val|test> <path>'");
    e.path = path;
    entries.push_back(std::move(e));
  }
  return entries;
}

LoadedSplit load_manifest_cubes(const std::filesystem::path& manifest) {
  LoadedSplit out;
  const auto base = manifest.parent_path();
  for (const auto& e : read_manifest(manifest)) {
    HsiCube cube = read_cube(e.path.is_absolute() ? e.path : base / e.path);
    if (e.split == "train")
      out.train.push_back(std::move(cube));
    else if (e.split == "val")
      out.val.push_back(std::move(cube));
    else
      out.test.push_back(std::move(cube));
  }
  return out;
}

}  // namespace hycot
