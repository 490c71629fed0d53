// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance <path-to-hycot-cli> [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hycot/checkpoint.hpp"
#include "hycot/codec.hpp"
#include "hycot/dataio.hpp"
#include "hycot/metrics.hpp"
#include "hycot/model.hpp"
#include "hycot/rng.hpp"
#include "hycot/training.hpp"

namespace fs = std::filesystem;
using namespace hycot;

namespace {

std::string g_cli;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hycot_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double loss_value(const ModelWeights& w, const Tensor& x) {
  Graph g(false);
  return mse(g, decode(g, w, encode(g, w, x)), x).item();
}

// 1. Analytic gradients vs central differences on the tiny configuration.
Outcome gradient_integrity() {
  ModelConfig c;
  c.bands = 8;
  c.group_depth = 4;
  c.embed_dim = 4;
  c.blocks = 1;
  c.heads = 2;
  c.hidden_dim = 8;
  c.latent_channels = 2;
  c.block_mlp_dim = 8;
  c.seed = derive_seed(1, "model");
  ModelWeights w = ModelWeights::initialize(c);
  Rng rng(derive_seed(1, "gradcheck"));
  std::vector<double> px(2 * c.bands);
  for (double& v : px) v = rng.uniform(0.05, 0.95);
  const Tensor x({2, c.bands}, px);

  w.set_requires_grad(true);
  {
    Graph g;
    g.backward(mse(g, decode(g, w, encode(g, w, x)), x));
  }
  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (const auto& p : w.parameters()) {
    const auto analytic = p.tensor.grad();
    auto values = p.tensor.values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss_value(w, x);
      values[i] = saved - h;
      const double down = loss_value(w, x);
      values[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-7});
      const double rel = std::abs(analytic[i] - numeric) / scale;
      if (rel > worst) {
        worst = rel;
        worst_name = p.name + "[" + std::to_string(i) + "]";
      }
      ++checked;
    }
  }
  return {worst < 1e-4, std::to_string(checked) + " scalars, max rel err " + fmt("%.3e", worst) + " at " +
                            worst_name + " (bound 1e-4)"};
}

// 2. CR column for C=202.
Outcome cr_table() {
  const std::vector<std::pair<std::uint32_t, std::string>> expected = {
      {51, "3.96"}, {26, "7.77"}, {13, "15.54"}, {7, "28.86"}};
  std::string got;
  bool ok = true;
  for (const auto& [gamma, text] : expected) {
    ModelConfig c;
    c.latent_channels = gamma;
    const std::string s = cr_of(c).str(2);
    ok = ok && s == text;
    got += (got.empty() ? "" : " ") + s;
  }
  return {ok, "CR(202/{51,26,13,7}) = " + got};
}

// 3. Memorize 8 pixels.
Outcome overfit() {
  SynthConfig sc;
  sc.cubes = 1;
  sc.height = 1;
  sc.width = 8;
  sc.bands = 32;
  sc.seed = derive_seed(3, "synth");
  const std::vector<HsiCube> data = synth_dataset(sc).cubes;

  ModelConfig c;
  c.bands = 32;
  c.group_depth = 4;
  c.embed_dim = 32;
  c.blocks = 1;
  c.heads = 4;
  c.hidden_dim = 256;
  c.latent_channels = 8;
  c.block_mlp_dim = 32;
  c.seed = derive_seed(3, "model");
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.epochs = 2000;
  tc.reduction = 1;
  tc.batch_pixels = 8;
  tc.seed = derive_seed(3, "train");
  ModelWeights w = ModelWeights::initialize(c);
  const TrainResult r = train(data, {}, w, tc);
  const double q = psnr(forward_image(data[0], w).reconstruction, data[0]);
  return {q > 45.0 && r.steps <= 2000,
          std::to_string(r.steps) + " Adam steps, training PSNR " + fmt("%.2f", q) + " dB (bar 45 dB)"};
}

// 4. r=64 vs r=1 after equal epochs.
Outcome reduction_echo() {
  SynthConfig sc;
  sc.cubes = 16;
  sc.height = 16;
  sc.width = 16;
  sc.bands = 32;
  sc.seed = derive_seed(4, "synth");
  const auto cubes = synth_dataset(sc).cubes;
  const DatasetSplit split = split_dataset(cubes.size(), {}, derive_seed(4, "split"));
  std::vector<HsiCube> tr, va;
  for (auto i : split.train) tr.push_back(cubes[i]);
  for (auto i : split.val) va.push_back(cubes[i]);

  ModelConfig c;
  c.bands = 32;
  c.group_depth = 4;
  c.embed_dim = 16;
  c.blocks = 2;
  c.heads = 2;
  c.hidden_dim = 64;
  c.latent_channels = 8;
  c.block_mlp_dim = 16;
  c.seed = derive_seed(4, "model");

  const std::uint32_t epochs = 400;
  double final_psnr[2];
  const std::uint64_t rs[2] = {1, 64};
  for (int k = 0; k < 2; ++k) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.reduction = rs[k];
    tc.seed = derive_seed(4, "train");
    ModelWeights w = ModelWeights::initialize(c);
    final_psnr[k] = train(tr, va, w, tc).log.back().val_psnr_db;
  }
  const double gap = std::abs(final_psnr[0] - final_psnr[1]);
  return {gap <= 1.0, std::to_string(epochs) + " epochs: val PSNR r=1 " + fmt("%.3f", final_psnr[0]) + " dB, r=64 " +
                          fmt("%.3f", final_psnr[1]) + " dB, gap " + fmt("%.3f", gap) + " dB (bound 1.0)"};
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// 5. Pixel permutation commutes with encode/decode, bit for bit.
Outcome pixelwise() {
  ModelConfig c;
  c.bands = 10;
  c.group_depth = 4;
  c.embed_dim = 8;
  c.blocks = 2;
  c.heads = 2;
  c.hidden_dim = 16;
  c.latent_channels = 3;
  c.block_mlp_dim = 8;
  Rng rng(derive_seed(5, "pixelwise"));
  std::size_t failures = 0;
  for (int draw = 0; draw < 20; ++draw) {
    c.seed = rng.next();
    const ModelWeights w = ModelWeights::initialize(c);
    HsiCube cube(4, 4, c.bands);
    for (double& v : cube.data) v = rng.uniform();
    std::vector<std::size_t> perm(16);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    HsiCube shuffled(4, 4, c.bands);
    for (std::size_t p = 0; p < 16; ++p) std::ranges::copy(cube.pixel(perm[p]), shuffled.pixel(p).begin());

    const ImageForward a = forward_image(cube, w);
    const ImageForward b = forward_image(shuffled, w);
    const std::size_t gamma = c.latent_channels;
    for (std::size_t p = 0; p < 16; ++p) {
      const auto la = std::span(a.latents.data).subspan(perm[p] * gamma, gamma);
      const auto lb = std::span(b.latents.data).subspan(p * gamma, gamma);
      if (!bit_equal(la, lb) || !bit_equal(a.reconstruction.pixel(perm[p]), b.reconstruction.pixel(p))) {
        ++failures;
        break;
      }
    }
  }
  return {failures == 0, "20 weight draws, 4x4 cube, " + std::to_string(failures) + " draws with mismatches"};
}

// 6. Through-the-file reconstruction matches in-memory, and compress is deterministic.
Outcome codec_roundtrip() {
  const fs::path dir = scratch_dir("codec");
  SynthConfig sc;
  sc.cubes = 1;
  sc.height = 12;
  sc.width = 10;
  sc.bands = 32;
  sc.seed = derive_seed(6, "synth");
  const HsiCube cube = synth_dataset(sc).cubes[0];
  ModelConfig c;
  c.bands = 32;
  c.group_depth = 4;
  c.embed_dim = 16;
  c.blocks = 2;
  c.heads = 2;
  c.hidden_dim = 64;
  c.latent_channels = 8;
  c.block_mlp_dim = 16;
  c.seed = derive_seed(6, "model");
  // A briefly trained model, so the reconstruction is not trivially flat.
  ModelWeights trained = ModelWeights::initialize(c);
  TrainConfig tc;
  tc.epochs = 100;
  tc.reduction = 1;
  tc.seed = derive_seed(6, "train");
  train({cube}, {}, trained, tc);
  save_checkpoint(trained, dir / "m.hycw");
  const ModelWeights w = load_checkpoint(dir / "m.hycw");

  const double in_memory = psnr(forward_image(cube, w).reconstruction, cube);
  write_compressed(compress(cube, w), dir / "a.hyc1");
  const HsiCube back = decompress(read_compressed(dir / "a.hyc1"), w);
  const double on_disk = psnr(back, cube);
  write_compressed(compress(cube, w), dir / "b.hyc1");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  };
  const bool same_bytes = slurp(dir / "a.hyc1") == slurp(dir / "b.hyc1");
  const double diff = std::abs(in_memory - on_disk);
  fs::remove_all(dir);
  return {diff < 0.01 && same_bytes, "in-memory " + fmt("%.5f", in_memory) + " dB, via file " + fmt("%.5f", on_disk) +
                                         " dB, |diff| " + fmt("%.2e", diff) + " (bound 0.01); double-compress " +
                                         (same_bytes ? "byte-identical" : "DIFFERS")};
}

// 7. Closed-form parameter count, monotone complexity, and the Gamma=7 total.
Outcome complexity() {
  Rng rng(derive_seed(7, "configs"));
  std::size_t mismatches = 0;
  for (int i = 0; i < 25; ++i) {
    ModelConfig c;
    c.bands = 1 + static_cast<std::uint32_t>(rng.below(40));
    c.group_depth = 1 + static_cast<std::uint32_t>(rng.below(8));
    c.heads = 1 + static_cast<std::uint32_t>(rng.below(4));
    c.embed_dim = c.heads * (1 + static_cast<std::uint32_t>(rng.below(6)));
    c.blocks = static_cast<std::uint32_t>(rng.below(4));
    c.hidden_dim = 1 + static_cast<std::uint32_t>(rng.below(40));
    c.latent_channels = 1 + static_cast<std::uint32_t>(rng.below(c.bands));
    c.block_mlp_dim = 1 + static_cast<std::uint32_t>(rng.below(20));
    c.use_bias = rng.below(2) == 1;
    c.seed = rng.next();
    if (param_count(c) != ModelWeights::initialize(c).scalar_count()) ++mismatches;
  }
  std::vector<ModelConfig> configs;
  for (std::uint32_t g : {51u, 26u, 13u, 7u}) {
    ModelConfig c;
    c.latent_channels = g;
    configs.push_back(c);
  }
  bool monotone = true;
  std::string flops;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    flops += (i ? " > " : "") + fmt("%.3f", flops_estimate(configs[i], 128, 128) / 1e9);
    if (i > 0)
      monotone = monotone && param_count(configs[i]) < param_count(configs[i - 1]) &&
                 flops_estimate(configs[i], 128, 128) < flops_estimate(configs[i - 1], 128, 128);
  }
  const double p7 = static_cast<double>(param_count(configs.back()));
  const double dev = (p7 - 398069.0) / 398069.0 * 100.0;
  return {mismatches == 0 && monotone,
          "25 random configs, " + std::to_string(mismatches) + " count mismatches; params " +
              std::to_string(param_count(configs[0])) + " -> " + std::to_string(param_count(configs[3])) +
              " (published 488225 -> 398069, Gamma=7 deviation " + fmt("%+.2f", dev) + "%); GFLOPs@128x128 " +
              flops + (monotone ? "" : " NOT MONOTONE")};
}

// 8. Two CLI training runs, same config and seed.
Outcome determinism() {
  if (g_cli.empty()) return {false, "path to the hycot executable not supplied"};
  const fs::path dir = scratch_dir("determinism");
  const std::string d = dir.string();
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + g_cli + "\" " + args + " > \"" + d + "/cli.log\" 2>&1";
    return std::system(cmd.c_str());
  };
  int rc = run("synth --cubes 6 --size 8 --bands 16 --seed 11 --out \"" + d + "/ds\"");
  const std::string common = "train --manifest \"" + d + "/ds/manifest.txt\" --bands 16 --gamma 4 --group-depth 4 "
                             "--embed-dim 8 --blocks 1 --heads 2 --hidden-dim 16 --epochs 15 --r 4 --seed 5 ";
  rc |= run(common + "--threads 1 --out \"" + d + "/a\"");
  rc |= run(common + "--threads 3 --out \"" + d + "/b\"");
  if (rc != 0) return {false, "CLI invocation failed (see " + d + "/cli.log)"};
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  };
  const auto a = slurp(dir / "a" / "model.hycw");
  const auto b = slurp(dir / "b" / "model.hycw");
  const bool same = !a.empty() && a == b;
  fs::remove_all(dir);
  return {same, "two train runs (threads 1 and 3): checkpoints " + std::to_string(a.size()) + " bytes, " +
                    (same ? "bit-identical" : "DIFFER")};
}

// 9. Sampler frequencies vs binomial 3-sigma bounds.
Outcome sampler() {
  const std::size_t pixels = 64, epochs = 10000;
  const std::uint64_t r = 8;
  Rng rng(derive_seed(9, "train"));
  std::vector<std::size_t> hits(pixels, 0);
  const std::size_t n = pixels_per_epoch(pixels, r);
  for (std::size_t e = 0; e < epochs; ++e)
    for (std::size_t idx : sample_pixel_indices(pixels, r, rng)) ++hits[idx];
  const double p = static_cast<double>(n) / pixels;
  const double mean = epochs * p;
  const double sd = std::sqrt(epochs * p * (1 - p));
  const auto [lo, hi] = std::ranges::minmax(hits);
  const bool ok = lo >= mean - 3 * sd && hi <= mean + 3 * sd;
  return {ok, "n=" + std::to_string(n) + "/epoch, counts in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                  "], bounds " + fmt("%.1f", mean - 3 * sd) + ".." + fmt("%.1f", mean + 3 * sd)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli = argv[1];
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double time_limit_s;  // 0: none
  };
  const std::vector<Criterion> criteria = {
      {"gradient integrity", gradient_integrity, 10},
      {"CR table", cr_table, 0},
      {"overfit convergence", overfit, 60},
      {"training-set reduction", reduction_echo, 600},
      {"pixelwise independence", pixelwise, 0},
      {"codec roundtrip", codec_roundtrip, 0},
      {"complexity accounting", complexity, 0},
      {"determinism", determinism, 0},
      {"sampler statistics", sampler, 0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criteria[i].time_limit_s > 0 && secs > criteria[i].time_limit_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", criteria[i].time_limit_s) + " s budget";
    }
    std::printf("[%s] %d. %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", number, criteria[i].name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
