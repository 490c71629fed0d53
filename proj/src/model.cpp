#include "hycot/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <thread>

#include "hycot/errors.hpp"
#include "hycot/rng.hpp"

namespace hycot {

// ---- configuration ------------------------------------------------------------

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (bands < 1) fail("bands must be >= 1");
  if (group_depth < 1) fail("group_depth must be >= 1");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (embed_dim % heads != 0)
    fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " + std::to_string(heads));
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (block_mlp_dim < 1) fail("block_mlp_dim must be >= 1");
  if (latent_channels < 1 || latent_channels > bands)
    fail("gamma must lie in [1, bands]; got gamma=" + std::to_string(latent_channels) +
         " with bands=" + std::to_string(bands));
  if (!std::isfinite(leaky_slope)) fail("leaky_slope must be finite");
}

std::size_t padding_for(std::size_t bands, std::size_t group_depth) {
  if (group_depth < 1) throw ContractError("group depth must be >= 1");
  return (group_depth - bands % group_depth) % group_depth;
}

std::size_t padded_bands(const ModelConfig& c) { return c.bands + padding_for(c.bands, c.group_depth); }
std::size_t group_count(const ModelConfig& c) { return padded_bands(c) / c.group_depth; }
std::size_t n_tokens(const ModelConfig& c) { return group_count(c) + 1; }

std::vector<std::vector<double>> pad_and_group(std::span<const double> pixel, std::size_t group_depth) {
  if (group_depth < 1) throw ContractError("group depth must be >= 1");
  if (pixel.empty()) throw DimensionError("pad_and_group: empty spectrum");
  const std::size_t padded = pixel.size() + padding_for(pixel.size(), group_depth);
  std::vector<std::vector<double>> groups(padded / group_depth, std::vector<double>(group_depth, 0.0));
  for (std::size_t b = 0; b < pixel.size(); ++b) groups[b / group_depth][b % group_depth] = pixel[b];
  return groups;
}

std::string Ratio::str(int digits) const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value());
  return buf;
}

Ratio cr_of(const ModelConfig& c) {
  const std::uint64_t g = std::gcd<std::uint64_t>(c.bands, c.latent_channels);
  return Ratio{c.bands / g, c.latent_channels / g};
}

// ---- weights ------------------------------------------------------------------

namespace {

struct Shapes {
  std::size_t g, d, n, m, hid, gamma, bands;
  explicit Shapes(const ModelConfig& c)
      : g(c.group_depth), d(c.embed_dim), n(n_tokens(c)), m(c.block_mlp_dim), hid(c.hidden_dim),
        gamma(c.latent_channels), bands(c.bands) {}
};

// Allocation in serialization order. `make(shape, kind)` decides the values.
enum class Init { Linear, Bias, Gain, Shift, Embedding };

template <typename Make>
ModelWeights build(const ModelConfig& config, Make&& make) {
  config.validate();
  const Shapes s(config);
  const bool bias = config.use_bias;
  ModelWeights w;
  w.config = config;
  auto maybe_bias = [&](std::size_t out, std::size_t fan_in) {
    return bias ? make(Shape{out}, Init::Bias, fan_in) : Tensor();
  };
  w.patch_w = make(Shape{s.g, s.d}, Init::Linear, s.g);
  w.patch_b = maybe_bias(s.d, s.g);
  w.cls_token = make(Shape{s.d}, Init::Embedding, 0);
  w.pos_embed = make(Shape{s.n, s.d}, Init::Embedding, 0);
  for (std::uint32_t l = 0; l < config.blocks; ++l) {
    BlockWeights b;
    b.ln1_gain = make(Shape{s.d}, Init::Gain, 0);
    b.ln1_bias = make(Shape{s.d}, Init::Shift, 0);
    b.qkv_w = make(Shape{s.d, 3 * s.d}, Init::Linear, s.d);
    b.qkv_b = maybe_bias(3 * s.d, s.d);
    b.proj_w = make(Shape{s.d, s.d}, Init::Linear, s.d);
    b.proj_b = maybe_bias(s.d, s.d);
    b.ln2_gain = make(Shape{s.d}, Init::Gain, 0);
    b.ln2_bias = make(Shape{s.d}, Init::Shift, 0);
    b.mlp_w1 = make(Shape{s.d, s.m}, Init::Linear, s.d);
    b.mlp_b1 = maybe_bias(s.m, s.d);
    b.mlp_w2 = make(Shape{s.m, s.d}, Init::Linear, s.m);
    b.mlp_b2 = maybe_bias(s.d, s.m);
    w.blocks.push_back(std::move(b));
  }
  w.enc_w1 = make(Shape{s.d, s.hid}, Init::Linear, s.d);
  w.enc_b1 = maybe_bias(s.hid, s.d);
  w.enc_w2 = make(Shape{s.hid, s.gamma}, Init::Linear, s.hid);
  w.enc_b2 = maybe_bias(s.gamma, s.hid);
  w.dec_w1 = make(Shape{s.gamma, s.hid}, Init::Linear, s.gamma);
  w.dec_b1 = maybe_bias(s.hid, s.gamma);
  w.dec_w2 = make(Shape{s.hid, s.bands}, Init::Linear, s.hid);
  w.dec_b2 = maybe_bias(s.bands, s.hid);
  return w;
}

}  // namespace

ModelWeights ModelWeights::initialize(const ModelConfig& config) {
  Rng rng(config.seed);
  return build(config, [&](Shape shape, Init kind, std::size_t fan_in) {
    std::vector<double> v(shape_numel(shape));
    switch (kind) {
      case Init::Linear:
      case Init::Bias: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& x : v) x = rng.uniform(-bound, bound);
        break;
      }
      case Init::Gain:
        std::fill(v.begin(), v.end(), 1.0);
        break;
      case Init::Shift:
        break;
      case Init::Embedding:
        for (double& x : v) x = rng.normal(0.0, 0.02);
        break;
    }
    return Tensor(std::move(shape), std::move(v));
  });
}

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  return build(config, [](Shape shape, Init, std::size_t) { return Tensor::zeros(std::move(shape)); });
}

std::vector<NamedTensor> ModelWeights::parameters() const {
  std::vector<NamedTensor> out;
  auto add = [&](std::string name, const Tensor& t) {
    if (t.defined()) out.push_back({std::move(name), t});
  };
  add("patch_w", patch_w);
  add("patch_b", patch_b);
  add("cls_token", cls_token);
  add("pos_embed", pos_embed);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    add(p + "ln1_gain", b.ln1_gain);
    add(p + "ln1_bias", b.ln1_bias);
    add(p + "qkv_w", b.qkv_w);
    add(p + "qkv_b", b.qkv_b);
    add(p + "proj_w", b.proj_w);
    add(p + "proj_b", b.proj_b);
    add(p + "ln2_gain", b.ln2_gain);
    add(p + "ln2_bias", b.ln2_bias);
    add(p + "mlp_w1", b.mlp_w1);
    add(p + "mlp_b1", b.mlp_b1);
    add(p + "mlp_w2", b.mlp_w2);
    add(p + "mlp_b2", b.mlp_b2);
  }
  add("enc_w1", enc_w1);
  add("enc_b1", enc_b1);
  add("enc_w2", enc_w2);
  add("enc_b2", enc_b2);
  add("dec_w1", dec_w1);
  add("dec_b1", dec_b1);
  add("dec_w2", dec_w2);
  add("dec_b2", dec_b2);
  return out;
}

std::size_t ModelWeights::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

ModelWeights ModelWeights::clone() const {
  ModelWeights copy = *this;
  auto dup = [](Tensor& t) {
    if (t.defined()) t = t.clone();
  };
  for (Tensor* t : {&copy.patch_w, &copy.patch_b, &copy.cls_token, &copy.pos_embed, &copy.enc_w1, &copy.enc_b1,
                    &copy.enc_w2, &copy.enc_b2, &copy.dec_w1, &copy.dec_b1, &copy.dec_w2, &copy.dec_b2})
    dup(*t);
  for (auto& b : copy.blocks)
    for (Tensor* t : {&b.ln1_gain, &b.ln1_bias, &b.qkv_w, &b.qkv_b, &b.proj_w, &b.proj_b, &b.ln2_gain,
                      &b.ln2_bias, &b.mlp_w1, &b.mlp_b1, &b.mlp_w2, &b.mlp_b2})
      dup(*t);
  return copy;
}

void ModelWeights::set_requires_grad(bool on) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(on);
}

void ModelWeights::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

// ---- accounting ----------------------------------------------------------------

std::uint64_t param_count(const ModelConfig& c) {
  c.validate();
  // 128-bit so that configurations read from untrusted headers cannot wrap.
  using u128 = unsigned __int128;
  const u128 b = c.use_bias ? 1 : 0;
  const u128 g = c.group_depth, d = c.embed_dim, n = n_tokens(c), m = c.block_mlp_dim;
  const u128 hid = c.hidden_dim, gamma = c.latent_channels, bands = c.bands;
  const u128 embedding = g * d + b * d + d + n * d;
  const u128 block = 4 * d                 // two layer norms
                     + d * 3 * d + b * 3 * d  // qkv
                     + d * d + b * d          // output projection
                     + d * m + b * m + m * d + b * d;
  const u128 encoder_mlp = d * hid + b * hid + hid * gamma + b * gamma;
  const u128 decoder_mlp = gamma * hid + b * hid + hid * bands + b * bands;
  const u128 total = embedding + c.blocks * block + encoder_mlp + decoder_mlp;
  if (total > std::numeric_limits<std::uint64_t>::max()) throw ConfigError("model config: parameter count overflows");
  return static_cast<std::uint64_t>(total);
}

std::uint64_t flops_estimate(const ModelConfig& c, std::size_t height, std::size_t width) {
  c.validate();
  const std::uint64_t b = c.use_bias ? 1 : 0;
  const std::uint64_t g = c.group_depth, d = c.embed_dim, n = n_tokens(c), m = c.block_mlp_dim;
  const std::uint64_t groups = group_count(c), k = c.heads;
  const std::uint64_t hid = c.hidden_dim, gamma = c.latent_channels, bands = c.bands;

  const std::uint64_t embedding = groups * (2 * g * d + b * d) + n * d;
  const std::uint64_t attention = 7 * n * d                      // LN1
                                  + n * (2 * d * 3 * d + b * 3 * d)  // qkv
                                  + 2 * n * n * d                  // q k^T over all heads
                                  + k * n * n * (1 + 5)            // scaling + softmax
                                  + 2 * n * n * d                  // A v
                                  + n * (2 * d * d + b * d)        // output projection
                                  + n * d;                         // residual
  const std::uint64_t feed_forward = 7 * n * d                      // LN2
                                     + n * (2 * d * m + b * m) + 6 * n * m  // up + GELU
                                     + n * (2 * m * d + b * d)      // down
                                     + n * d;                       // residual
  const std::uint64_t encoder_mlp = 2 * d * hid + b * hid + hid + 2 * hid * gamma + b * gamma + 4 * gamma;
  const std::uint64_t decoder_mlp = 2 * gamma * hid + b * hid + hid + 2 * hid * bands + b * bands + 4 * bands;
  const std::uint64_t per_pixel = embedding + c.blocks * (attention + feed_forward) + encoder_mlp + decoder_mlp;
  return per_pixel * static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width);
}

// ---- forward ---------------------------------------------------------------------

Tensor embed(Graph& g, const ModelWeights& w, const Tensor& pixels) {
  const ModelConfig& c = w.config;
  if (pixels.rank() != 2 || pixels.dim(1) != c.bands)
    throw DimensionError("embed: expected pixels [B x " + std::to_string(c.bands) + "], got " +
                         shape_string(pixels.shape()));
  const std::size_t batch = pixels.dim(0), groups = group_count(c), gd = c.group_depth;
  // Padding acts on data, never on trainable tensors, so it is not recorded.
  std::vector<double> padded(batch * groups * gd, 0.0);
  auto pv = pixels.values();
  for (std::size_t r = 0; r < batch; ++r)
    std::copy_n(pv.data() + r * c.bands, c.bands, padded.data() + r * groups * gd);
  Tensor grouped({batch * groups, gd}, std::move(padded));
  Tensor tokens = linear(g, grouped, w.patch_w, w.patch_b);
  tokens = reshape(g, tokens, {batch, groups, c.embed_dim});
  tokens = prepend_token(g, w.cls_token, tokens);
  return add_trailing(g, tokens, w.pos_embed);
}

Tensor msa(Graph& g, const Tensor& tokens, const BlockWeights& block, std::size_t heads, bool use_bias) {
  const bool flat = tokens.rank() == 2;
  const Tensor t = flat ? reshape(g, tokens, {1, tokens.dim(0), tokens.dim(1)}) : tokens;
  if (t.rank() != 3) throw DimensionError("msa: expected [B x n x d] tokens, got " + shape_string(tokens.shape()));
  const std::size_t n = t.dim(1), d = t.dim(2);
  if (d % heads != 0) throw ConfigError("msa: embed_dim not divisible by heads");
  const std::size_t dh = d / heads;

  const Tensor qkv = linear(g, t, block.qkv_w, use_bias ? block.qkv_b : Tensor());
  const Tensor q = split_heads(g, slice_last(g, qkv, 0, d), heads);
  const Tensor k = split_heads(g, slice_last(g, qkv, d, d), heads);
  const Tensor v = split_heads(g, slice_last(g, qkv, 2 * d, d), heads);
  const Tensor scores = scale(g, bmm(g, q, k, /*transpose_b=*/true), 1.0 / std::sqrt(static_cast<double>(dh)));
  const Tensor attn = softmax_rows(g, scores);
  const Tensor heads_out = merge_heads(g, bmm(g, attn, v), heads);
  Tensor out = linear(g, heads_out, block.proj_w, use_bias ? block.proj_b : Tensor());
  return flat ? reshape(g, out, {n, d}) : out;
}

Tensor transformer_block(Graph& g, const Tensor& tokens, const BlockWeights& block, const ModelConfig& c) {
  const Tensor attended =
      add(g, msa(g, layer_norm(g, tokens, block.ln1_gain, block.ln1_bias), block, c.heads, c.use_bias), tokens);
  const Tensor normed = layer_norm(g, attended, block.ln2_gain, block.ln2_bias);
  const Tensor hidden = gelu(g, linear(g, normed, block.mlp_w1, c.use_bias ? block.mlp_b1 : Tensor()));
  const Tensor mlp_out = linear(g, hidden, block.mlp_w2, c.use_bias ? block.mlp_b2 : Tensor());
  return add(g, mlp_out, attended);
}

Tensor encode(Graph& g, const ModelWeights& w, const Tensor& pixels) {
  Tensor t = embed(g, w, pixels);
  for (const auto& block : w.blocks) t = transformer_block(g, t, block, w.config);
  const Tensor ct = select_token(g, t, 0);
  const Tensor hidden = leaky_relu(g, linear(g, ct, w.enc_w1, w.enc_b1), w.config.leaky_slope);
  return sigmoid(g, linear(g, hidden, w.enc_w2, w.enc_b2));
}

Tensor decode(Graph& g, const ModelWeights& w, const Tensor& latents) {
  if (latents.rank() != 2 || latents.dim(1) != w.config.latent_channels)
    throw DimensionError("decode: expected latents [B x " + std::to_string(w.config.latent_channels) + "], got " +
                         shape_string(latents.shape()));
  const Tensor hidden = leaky_relu(g, linear(g, latents, w.dec_w1, w.dec_b1), w.config.leaky_slope);
  return sigmoid(g, linear(g, hidden, w.dec_w2, w.dec_b2));
}

Tensor embed_pixel(std::span<const double> pixel, const ModelWeights& w) {
  if (pixel.size() != w.config.bands)
    throw DimensionError("embed_pixel: spectrum has " + std::to_string(pixel.size()) + " bands, model expects " +
                         std::to_string(w.config.bands));
  Graph g(false);
  const Tensor tokens = embed(g, w, Tensor({1, pixel.size()}, {pixel.begin(), pixel.end()}));
  return Tensor({tokens.dim(1), tokens.dim(2)}, {tokens.values().begin(), tokens.values().end()});
}

std::vector<double> encode_pixel(std::span<const double> pixel, const ModelWeights& w) {
  if (pixel.size() != w.config.bands)
    throw DimensionError("encode_pixel: spectrum has " + std::to_string(pixel.size()) + " bands, model expects " +
                         std::to_string(w.config.bands));
  Graph g(false);
  const Tensor z = encode(g, w, Tensor({1, pixel.size()}, {pixel.begin(), pixel.end()}));
  return {z.values().begin(), z.values().end()};
}

std::vector<double> decode_pixel(std::span<const double> latent, const ModelWeights& w) {
  if (latent.size() != w.config.latent_channels)
    throw DimensionError("decode_pixel: latent has " + std::to_string(latent.size()) + " channels, model expects " +
                         std::to_string(w.config.latent_channels));
  Graph g(false);
  const Tensor x = decode(g, w, Tensor({1, latent.size()}, {latent.begin(), latent.end()}));
  return {x.values().begin(), x.values().end()};
}

// ---- images ----------------------------------------------------------------------

namespace {

// Runs `fn(first, count)` over [0, total) in kInferenceBatch-sized batches,
// spreading batches over up to `threads` workers.
template <typename Fn>
void for_each_batch(std::size_t total, unsigned threads, Fn&& fn) {
  const std::size_t batches = (total + kInferenceBatch - 1) / kInferenceBatch;
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(batches, 1)));
  auto run = [&](unsigned worker) {
    for (std::size_t b = worker; b < batches; b += workers) {
      const std::size_t first = b * kInferenceBatch;
      fn(first, std::min(kInferenceBatch, total - first));
    }
  };
  if (workers <= 1) {
    run(0);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned i = 0; i < workers; ++i) pool.emplace_back(run, i);
}

}  // namespace

LatentCube encode_image(const HsiCube& cube, const ModelWeights& w, unsigned threads) {
  cube.check_shape();
  if (cube.bands != w.config.bands)
    throw ConfigError("cube has " + std::to_string(cube.bands) + " bands, model expects " +
                      std::to_string(w.config.bands));
  const std::size_t gamma = w.config.latent_channels;
  LatentCube out{cube.height, cube.width, gamma, std::vector<double>(cube.pixel_count() * gamma)};
  for_each_batch(cube.pixel_count(), threads, [&](std::size_t first, std::size_t count) {
    Graph g(false);
    const auto src = std::span(cube.data).subspan(first * cube.bands, count * cube.bands);
    const Tensor z = encode(g, w, Tensor({count, cube.bands}, {src.begin(), src.end()}));
    std::copy(z.values().begin(), z.values().end(), out.data.begin() + static_cast<std::ptrdiff_t>(first * gamma));
  });
  return out;
}

HsiCube decode_image(const LatentCube& latents, const ModelWeights& w, unsigned threads) {
  const std::size_t gamma = w.config.latent_channels;
  if (latents.channels != gamma)
    throw ConfigError("latents have " + std::to_string(latents.channels) + " channels, model expects " +
                      std::to_string(gamma));
  const std::size_t pixels = latents.height * latents.width;
  if (latents.data.size() != pixels * gamma) throw DimensionError("latent cube data length mismatch");
  HsiCube out(latents.height, latents.width, w.config.bands);
  for_each_batch(pixels, threads, [&](std::size_t first, std::size_t count) {
    Graph g(false);
    const auto src = std::span(latents.data).subspan(first * gamma, count * gamma);
    const Tensor x = decode(g, w, Tensor({count, gamma}, {src.begin(), src.end()}));
    std::copy(x.values().begin(), x.values().end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(first * out.bands));
  });
  return out;
}

ImageForward forward_image(const HsiCube& cube, const ModelWeights& w, unsigned threads) {
  ImageForward result;
  result.latents = encode_image(cube, w, threads);
  result.reconstruction = decode_image(result.latents, w, threads);
  result.reconstruction.raw_min = cube.raw_min;
  result.reconstruction.raw_max = cube.raw_max;
  return result;
}

}  // namespace hycot
