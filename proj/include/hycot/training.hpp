#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hycot/dataio.hpp"
#include "hycot/model.hpp"
#include "hycot/rng.hpp"
#include "hycot/tensor.hpp"

namespace hycot {

struct TrainConfig {
  double lr = 1e-3;
  std::uint32_t epochs = 2000;
  std::size_t batch_pixels = 4096;  // cap on pixels per optimizer step
  std::uint64_t reduction = 64;     // r: sample ceil(W*H / r) pixels per image per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::uint32_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
  unsigned threads = 1;  // validation only; optimization is single-threaded

  void validate() const;
};

/// ceil(pixel_count / r), at least 1.
std::size_t pixels_per_epoch(std::size_t pixel_count, std::uint64_t reduction);

/// Distinct pixel indices drawn uniformly without replacement.
std::vector<std::size_t> sample_pixel_indices(std::size_t pixel_count, std::uint64_t reduction, Rng& rng);

/// Spectra of the sampled pixels as an [n x C] tensor.
Tensor sample_pixels(const HsiCube& cube, std::uint64_t reduction, Rng& rng);

/// Mean squared error over all elements, differentiable.
Tensor mse_loss(Graph& g, const Tensor& reconstruction, const Tensor& target);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over `params`. Every parameter must hold a
/// gradient. State arrays are sized on first use.
void adam_step(std::span<Tensor> params, AdamState& state, const TrainConfig& config);
void adam_step(const ModelWeights& weights, AdamState& state, const TrainConfig& config);

struct EpochRecord {
  std::uint32_t epoch = 0;
  double train_mse = 0.0;
  double val_psnr_db = 0.0;  // NaN when there is no validation data
  double seconds = 0.0;
};

inline constexpr std::string_view kTrainLogHeader = "epoch,train_mse,val_psnr_db,seconds";
std::string format_log_line(const EpochRecord& record);

struct TrainResult {
  ModelWeights best;  // highest validation PSNR (last epoch when no validation data)
  std::vector<EpochRecord> log;
  std::uint32_t best_epoch = 0;
  double best_val_psnr_db = 0.0;
  std::size_t steps = 0;
};

/// Per epoch and per training image (image order shuffled each epoch):
/// sample pixels, split into batches of at most batch_pixels, and take one
/// Adam step per batch on the reconstruction MSE. Validation PSNR is computed
/// after every epoch on all pixels. `weights` holds the final state on return.
/// Lines are appended to `log` (header first) when it is non-null.
TrainResult train(const std::vector<HsiCube>& train_set, const std::vector<HsiCube>& val_set,
                  ModelWeights& weights, const TrainConfig& config, std::ostream* log = nullptr);

using Reconstructor = std::function<HsiCube(const HsiCube&)>;

/// Mean over cubes of per-cube PSNR (peak 1). +inf if any cube is exact.
double evaluate(const std::vector<HsiCube>& cubes, const Reconstructor& reconstruct);
double evaluate(const std::vector<HsiCube>& cubes, const ModelWeights& weights, unsigned threads = 1);

}  // namespace hycot
