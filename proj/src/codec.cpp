#include "hycot/codec.hpp"

#include "byte_io.hpp"
#include "hycot/checkpoint.hpp"
#include "hycot/errors.hpp"

namespace hycot {

namespace {

std::uint32_t narrow_extent(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw DimensionError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

CompressedImage compress(const HsiCube& cube, const ModelWeights& weights, unsigned threads) {
  cube.check_shape();
  if (cube.bands != weights.config.bands)
    throw ConfigError("cube has " + std::to_string(cube.bands) + " bands, model expects " +
                      std::to_string(weights.config.bands));
  const LatentCube latents = encode_image(cube, weights, threads);
  CompressedImage out;
  out.height = narrow_extent(cube.height, "height");
  out.width = narrow_extent(cube.width, "width");
  out.gamma = weights.config.latent_channels;
  out.model_fingerprint = model_fingerprint(weights);
  out.raw_min = cube.raw_min;
  out.raw_max = cube.raw_max;
  out.latents.assign(latents.data.begin(), latents.data.end());
  return out;
}

HsiCube decompress(const CompressedImage& image, const ModelWeights& weights, unsigned threads) {
  if (image.model_fingerprint != model_fingerprint(weights))
    throw ModelMismatchError("compressed image was produced by a different model (fingerprint mismatch)");
  if (image.gamma != weights.config.latent_channels)
    throw ModelMismatchError("compressed image has gamma=" + std::to_string(image.gamma) + ", model has gamma=" +
                             std::to_string(weights.config.latent_channels));
  LatentCube latents;
  latents.height = image.height;
  latents.width = image.width;
  latents.channels = image.gamma;
  latents.data.assign(image.latents.begin(), image.latents.end());
  HsiCube out = decode_image(latents, weights, threads);
  out.raw_min = image.raw_min;
  out.raw_max = image.raw_max;
  return out;
}

std::vector<std::uint8_t> encode_compressed(const CompressedImage& image) {
  const std::size_t expected = std::size_t{image.height} * image.width * image.gamma;
  if (image.latents.size() != expected)
    throw DimensionError("latent count " + std::to_string(image.latents.size()) + " != H*W*gamma = " +
                         std::to_string(expected));
  detail::ByteWriter w;
  w.bytes("HYC1");
  w.u16(kCodecVersion);
  w.u32(image.height);
  w.u32(image.width);
  w.u32(image.gamma);
  w.u64(image.model_fingerprint);
  w.f64(image.raw_min);
  w.f64(image.raw_max);
  for (float v : image.latents) w.f32(v);
  return w.take();
}

CompressedImage decode_compressed(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "HYC1 file");
  if (r.remaining() < 4 || r.bytes(4) != "HYC1") throw FormatError("not an HYC1 file (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kCodecVersion) throw FormatError("unsupported HYC1 version " + std::to_string(version));
  CompressedImage out;
  out.height = r.u32();
  out.width = r.u32();
  out.gamma = r.u32();
  out.model_fingerprint = r.u64();
  out.raw_min = r.f64();
  out.raw_max = r.f64();
  const unsigned __int128 count128 = static_cast<unsigned __int128>(std::uint64_t{out.height} * out.width) * out.gamma;
  if (count128 > r.remaining() / 4)
    throw FormatError("HYC1 file: truncated payload (header announces more latents than present)");
  const auto count = static_cast<std::size_t>(count128);
  out.latents.resize(count);
  for (float& v : out.latents) v = r.f32();
  if (r.remaining() != 0) throw FormatError("HYC1 file has trailing bytes");
  return out;
}

void write_compressed(const CompressedImage& image, const std::filesystem::path& path) {
  detail::write_file(path, encode_compressed(image));
}

CompressedImage read_compressed(const std::filesystem::path& path) {
  return decode_compressed(detail::read_file(path));
}

}  // namespace hycot
