#pragma once

// Pixelwise transformer autoencoder.
//
// Encoder, per pixel: zero-pad the spectrum to a multiple of the group depth,
// cut it into groups of neighbouring bands, project each group to a token,
// prepend a learned compression token, add learned position embeddings, run
// a stack of pre-norm transformer blocks, then map the compression token
// through a two-layer MLP (LeakyReLU, sigmoid) to `gamma` latent channels.
// Decoder: a two-layer MLP from `gamma` back to `bands` with a sigmoid output.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hycot/dataio.hpp"
#include "hycot/tensor.hpp"

namespace hycot {

struct ModelConfig {
  std::uint32_t bands = 202;          // C
  std::uint32_t group_depth = 4;      // bands per token
  std::uint32_t embed_dim = 64;
  std::uint32_t blocks = 5;
  std::uint32_t heads = 4;
  std::uint32_t hidden_dim = 1024;    // encoder/decoder MLP width
  std::uint32_t latent_channels = 7;  // gamma
  std::uint32_t block_mlp_dim = 8;    // per-block MLP width
  double leaky_slope = 0.01;
  bool use_bias = true;               // bias terms on every linear layer
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// (g_d - C mod g_d) mod g_d; zero when C is already a multiple.
std::size_t padding_for(std::size_t bands, std::size_t group_depth);
std::size_t padded_bands(const ModelConfig& config);
std::size_t group_count(const ModelConfig& config);
/// Groups plus the compression token.
std::size_t n_tokens(const ModelConfig& config);

/// Zero-pads a spectrum and splits it into consecutive groups.
std::vector<std::vector<double>> pad_and_group(std::span<const double> pixel, std::size_t group_depth);

/// Exact rational; CR = bands / gamma.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  /// Decimal rendering rounded to `digits` places.
  std::string str(int digits = 2) const;
  auto operator<=>(const Ratio& other) const {
    return static_cast<unsigned __int128>(num) * other.den <=> static_cast<unsigned __int128>(other.num) * den;
  }
  bool operator==(const Ratio& other) const { return (*this <=> other) == 0; }
};

Ratio cr_of(const ModelConfig& config);

struct BlockWeights {
  Tensor ln1_gain, ln1_bias;
  Tensor qkv_w, qkv_b;    // [d x 3d], [3d]
  Tensor proj_w, proj_b;  // [d x d], [d]
  Tensor ln2_gain, ln2_bias;
  Tensor mlp_w1, mlp_b1;  // [d x m], [m]
  Tensor mlp_w2, mlp_b2;  // [m x d], [d]
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ModelWeights {
  ModelConfig config;

  Tensor patch_w, patch_b;  // [g_d x d], [d]
  Tensor cls_token;         // [d]
  Tensor pos_embed;         // [n_t x d]
  std::vector<BlockWeights> blocks;
  Tensor enc_w1, enc_b1;  // [d x hid], [hid]
  Tensor enc_w2, enc_b2;  // [hid x gamma], [gamma]
  Tensor dec_w1, dec_b1;  // [gamma x hid], [hid]
  Tensor dec_w2, dec_b2;  // [hid x C], [C]

  /// Seeded initialization: linear weights and biases uniform in
  /// +-1/sqrt(fan_in), layer-norm gains 1 and biases 0, compression token and
  /// position embeddings normal(0, 0.02).
  static ModelWeights initialize(const ModelConfig& config);
  /// Every array allocated and zero, layer-norm gains included.
  static ModelWeights zeros(const ModelConfig& config);

  /// All learnable arrays in serialization order. Bias entries are absent
  /// when config.use_bias is false.
  std::vector<NamedTensor> parameters() const;
  std::size_t scalar_count() const;

  ModelWeights clone() const;
  void set_requires_grad(bool on);
  void zero_grad();
};

/// Closed-form parameter total from the configuration alone.
std::uint64_t param_count(const ModelConfig& config);

/// FLOPs to encode and decode an H x W image. Convention: 2 FLOPs per
/// multiply-accumulate in every linear map and attention product, plus
/// 1 per bias add, residual add, position-embedding add, attention scaling
/// and LeakyReLU element; 5 per softmax element (max, subtract, exp, sum,
/// divide); 7 per layer-norm element (mean, centre, square, accumulate,
/// normalize, gain, bias); 4 per sigmoid element (negate, exp, add, divide);
/// 6 per GELU element in the block MLPs.
std::uint64_t flops_estimate(const ModelConfig& config, std::size_t height, std::size_t width);

// ---- forward pieces (batched over pixels) ------------------------------------

/// pixels [B x C] -> tokens [B x n_t x d]
Tensor embed(Graph& g, const ModelWeights& w, const Tensor& pixels);
/// tokens [B x n x d] -> [B x n x d]
Tensor msa(Graph& g, const Tensor& tokens, const BlockWeights& block, std::size_t heads, bool use_bias);
/// t' = MSA(LN(t)) + t; out = MLP(LN(t')) + t', block MLP activation GELU.
Tensor transformer_block(Graph& g, const Tensor& tokens, const BlockWeights& block, const ModelConfig& config);
/// pixels [B x C] -> latents [B x gamma]
Tensor encode(Graph& g, const ModelWeights& w, const Tensor& pixels);
/// latents [B x gamma] -> reconstruction [B x C]
Tensor decode(Graph& g, const ModelWeights& w, const Tensor& latents);

// ---- single-pixel convenience ------------------------------------------------

/// [n_t x d] token matrix for one pixel.
Tensor embed_pixel(std::span<const double> pixel, const ModelWeights& w);
std::vector<double> encode_pixel(std::span<const double> pixel, const ModelWeights& w);
std::vector<double> decode_pixel(std::span<const double> latent, const ModelWeights& w);

// ---- whole images ------------------------------------------------------------

struct LatentCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> data;  // pixel-interleaved
};

struct ImageForward {
  LatentCube latents;
  HsiCube reconstruction;
};

/// Pixels per forward batch used by the image-level helpers.
inline constexpr std::size_t kInferenceBatch = 256;

/// Encodes every pixel of `cube`. `threads` = 0 uses hardware concurrency.
/// Output does not depend on `threads` or batching.
LatentCube encode_image(const HsiCube& cube, const ModelWeights& w, unsigned threads = 1);
HsiCube decode_image(const LatentCube& latents, const ModelWeights& w, unsigned threads = 1);
ImageForward forward_image(const HsiCube& cube, const ModelWeights& w, unsigned threads = 1);

}  // namespace hycot
