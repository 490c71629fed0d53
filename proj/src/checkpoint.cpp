#include "hycot/checkpoint.hpp"

#include "byte_io.hpp"
#include "hycot/errors.hpp"

namespace hycot {

std::vector<std::uint8_t> serialize_checkpoint(const ModelWeights& weights) {
  const ModelConfig& c = weights.config;
  detail::ByteWriter w;
  w.bytes("HYCW");
  w.u16(kCheckpointVersion);
  for (std::uint32_t v : {c.bands, c.group_depth, c.embed_dim, c.blocks, c.heads, c.hidden_dim,
                          c.latent_channels, c.block_mlp_dim})
    w.u32(v);
  w.f64(c.leaky_slope);
  w.u8(c.use_bias ? 1 : 0);
  w.u64(c.seed);
  for (const auto& p : weights.parameters())
    for (double v : p.tensor.values()) w.f32(static_cast<float>(v));
  w.u64(detail::fnv1a64(w.buffer()));
  return w.take();
}

ModelWeights deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "HYCW checkpoint");
  if (r.remaining() < 4 || r.bytes(4) != "HYCW") throw FormatError("not an HYCW checkpoint (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) throw FormatError("unsupported HYCW version " + std::to_string(version));
  ModelConfig c;
  c.bands = r.u32();
  c.group_depth = r.u32();
  c.embed_dim = r.u32();
  c.blocks = r.u32();
  c.heads = r.u32();
  c.hidden_dim = r.u32();
  c.latent_channels = r.u32();
  c.block_mlp_dim = r.u32();
  c.leaky_slope = r.f64();
  c.use_bias = r.u8() != 0;
  c.seed = r.u64();
  std::uint64_t count = 0;
  try {
    count = param_count(c);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("HYCW checkpoint holds an invalid configuration: ") + e.what());
  }
  if (r.remaining() < 8 || count > (r.remaining() - 8) / 4)
    throw FormatError("HYCW checkpoint: truncated payload (configuration announces more weights than present)");
  ModelWeights w = ModelWeights::zeros(c);
  for (auto& p : w.parameters()) {
    auto values = p.tensor.values_mut();
    r.need(4 * values.size());
    for (double& v : values) v = r.f32();
  }
  const std::size_t body = r.position();
  const std::uint64_t stored = r.u64();
  if (r.remaining() != 0) throw FormatError("HYCW checkpoint has trailing bytes");
  if (stored != detail::fnv1a64(bytes.first(body))) throw FormatError("HYCW checkpoint fingerprint mismatch (corrupted file)");
  return w;
}

void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path) {
  detail::write_file(path, serialize_checkpoint(weights));
}

ModelWeights load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(detail::read_file(path));
}

std::uint64_t model_fingerprint(const ModelWeights& weights) {
  const auto bytes = serialize_checkpoint(weights);
  detail::ByteReader r(std::span<const std::uint8_t>(bytes).last(8), "fingerprint");
  return r.u64();
}

ModelWeights round_to_checkpoint_precision(const ModelWeights& weights) {
  ModelWeights w = weights.clone();
  for (auto& p : w.parameters())
    for (double& v : p.tensor.values_mut()) v = static_cast<float>(v);
  return w;
}

}  // namespace hycot
