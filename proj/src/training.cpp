#include "hycot/training.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "hycot/checkpoint.hpp"
#include "hycot/errors.hpp"
#include "hycot/kernels.hpp"
#include "hycot/metrics.hpp"

namespace hycot {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be > 0");
  if (reduction < 1) fail("reduction factor r must be >= 1");
  if (batch_pixels < 1) fail("batch_pixels must be >= 1");
  if (!(beta1 > 0.0 && beta1 < 1.0)) fail("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) fail("beta2 must lie in (0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
}

namespace {

// Every op allocates its output, and large activation buffers would otherwise
// go through mmap/munmap on each step. Keeping them on the heap halves the
// wall time of a typical run.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)once;
#endif
}

}  // namespace

std::size_t pixels_per_epoch(std::size_t pixel_count, std::uint64_t reduction) {
  if (reduction < 1) throw ContractError("reduction factor must be >= 1");
  if (pixel_count == 0) return 0;
  const std::size_t n = static_cast<std::size_t>((pixel_count + reduction - 1) / reduction);
  return std::max<std::size_t>(n, 1);
}

std::vector<std::size_t> sample_pixel_indices(std::size_t pixel_count, std::uint64_t reduction, Rng& rng) {
  const std::size_t n = pixels_per_epoch(pixel_count, reduction);
  std::vector<std::size_t> pool(pixel_count);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + rng.below(pixel_count - i)]);
  pool.resize(n);
  return pool;
}

Tensor sample_pixels(const HsiCube& cube, std::uint64_t reduction, Rng& rng) {
  cube.check_shape();
  const auto idx = sample_pixel_indices(cube.pixel_count(), reduction, rng);
  std::vector<double> values(idx.size() * cube.bands);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto px = cube.pixel(idx[i]);
    std::copy(px.begin(), px.end(), values.begin() + static_cast<std::ptrdiff_t>(i * cube.bands));
  }
  return Tensor({idx.size(), cube.bands}, std::move(values));
}

Tensor mse_loss(Graph& g, const Tensor& reconstruction, const Tensor& target) {
  return mse(g, reconstruction, target);
}

void adam_step(std::span<Tensor> params, AdamState& state, const TrainConfig& config) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("Adam state does not match the parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    if (state.m[i].size() != params[i].numel()) throw ContractError("Adam state shape mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const kernels::AdamParams ap{config.lr,
                               config.beta1,
                               config.beta2,
                               config.adam_eps,
                               1.0 - std::pow(config.beta1, t),
                               1.0 - std::pow(config.beta2, t)};
  const auto& kt = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    kt.adam_update(p.numel(), ap, p.grad().data(), p.values_mut().data(), state.m[i].data(), state.v[i].data());
  }
}

void adam_step(const ModelWeights& weights, AdamState& state, const TrainConfig& config) {
  std::vector<Tensor> params;
  for (auto& p : weights.parameters()) params.push_back(p.tensor);
  adam_step(std::span(params), state, config);
}

std::string format_log_line(const EpochRecord& r) {
  char psnr[32];
  if (std::isnan(r.val_psnr_db))
    std::snprintf(psnr, sizeof psnr, "nan");
  else if (std::isinf(r.val_psnr_db))
    std::snprintf(psnr, sizeof psnr, "inf");
  else
    std::snprintf(psnr, sizeof psnr, "%.6f", r.val_psnr_db);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%u,%.9g,%s,%.3f", r.epoch, r.train_mse, psnr, r.seconds);
  return buf;
}

TrainResult train(const std::vector<HsiCube>& train_set, const std::vector<HsiCube>& val_set, ModelWeights& weights,
                  const TrainConfig& config, std::ostream* log) {
  config.validate();
  keep_large_blocks_on_heap();
  if (train_set.empty()) throw ConfigError("training set is empty");
  for (const auto* set : {&train_set, &val_set})
    for (const HsiCube& cube : *set) {
      cube.check_shape();
      if (cube.bands != weights.config.bands)
        throw ConfigError("dataset cube has " + std::to_string(cube.bands) + " bands, model expects " +
                          std::to_string(weights.config.bands));
    }
  if (!config.checkpoint_dir.empty() && config.checkpoint_every > 0)
    std::filesystem::create_directories(config.checkpoint_dir);

  weights.set_requires_grad(true);
  std::vector<Tensor> params;
  for (auto& p : weights.parameters()) params.push_back(p.tensor);

  Rng rng(config.seed);
  AdamState adam;
  TrainResult result;
  result.best_val_psnr_db = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  if (log) *log << kTrainLogHeader << '\n';

  std::vector<std::size_t> order(train_set.size());
  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double sq_error = 0.0;
    std::size_t elements = 0;
    for (std::size_t idx : order) {
      const HsiCube& cube = train_set[idx];
      const Tensor sampled = sample_pixels(cube, config.reduction, rng);
      const std::size_t n = sampled.dim(0);
      for (std::size_t first = 0; first < n; first += config.batch_pixels) {
        const std::size_t count = std::min(config.batch_pixels, n - first);
        const auto src = sampled.values().subspan(first * cube.bands, count * cube.bands);
        const Tensor batch({count, cube.bands}, {src.begin(), src.end()});
        for (Tensor& p : params) p.zero_grad();
        Graph g;
        const Tensor loss = mse_loss(g, decode(g, weights, encode(g, weights, batch)), batch);
        g.backward(loss);
        adam_step(std::span(params), adam, config);
        ++result.steps;
        sq_error += loss.item() * static_cast<double>(batch.numel());
        elements += batch.numel();
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = sq_error / static_cast<double>(elements);
    rec.val_psnr_db = val_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : evaluate(val_set, weights, config.threads);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (log) *log << format_log_line(rec) << '\n' << std::flush;

    const bool improved = val_set.empty() || !have_best || rec.val_psnr_db > result.best_val_psnr_db;
    if (improved) {
      result.best = weights.clone();
      result.best_epoch = epoch;
      result.best_val_psnr_db = rec.val_psnr_db;
      have_best = true;
    }
    if (!config.checkpoint_dir.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%05u.hycw", epoch);
      save_checkpoint(weights, config.checkpoint_dir / name);
    }
  }
  if (!have_best) result.best = weights.clone();
  return result;
}

double evaluate(const std::vector<HsiCube>& cubes, const Reconstructor& reconstruct) {
  if (cubes.empty()) throw ConfigError("evaluation set is empty");
  double total = 0.0;
  for (const HsiCube& cube : cubes) total += psnr(reconstruct(cube), cube);
  return total / static_cast<double>(cubes.size());
}

double evaluate(const std::vector<HsiCube>& cubes, const ModelWeights& weights, unsigned threads) {
  return evaluate(cubes, [&](const HsiCube& cube) { return forward_image(cube, weights, threads).reconstruction; });
}

}  // namespace hycot
