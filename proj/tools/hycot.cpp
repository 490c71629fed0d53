// Command-line front end: synthetic data, training, coding and experiment tables.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hycot/checkpoint.hpp"
#include "hycot/codec.hpp"
#include "hycot/dataio.hpp"
#include "hycot/errors.hpp"
#include "hycot/metrics.hpp"
#include "hycot/model.hpp"
#include "hycot/rng.hpp"
#include "hycot/run_config.hpp"
#include "hycot/training.hpp"

namespace fs = std::filesystem;
using namespace hycot;

namespace {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kMismatch = 4 };

const std::vector<std::string> kSynthKeys = {"seed", "out", "cubes", "size", "height", "width",
                                             "bands", "endmembers", "noise"};
const std::vector<std::string> kModelKeys = {"bands", "group_depth", "embed_dim", "blocks", "heads",
                                             "hidden_dim", "gamma", "block_mlp_dim", "leaky_slope", "bias"};
const std::vector<std::string> kTrainKeys = {"seed", "threads", "out", "manifest", "lr", "epochs",
                                             "batch_pixels", "r", "beta1", "beta2", "adam_eps",
                                             "checkpoint_every"};

std::string flag_name(std::string key) {
  for (char& ch : key)
    if (ch == '_') ch = '-';
  return "--" + key;
}

std::string_view help_for(std::string_view key) {
  for (const auto& info : setting_keys())
    if (info.key == key) return info.help;
  return {};
}

// Collects config-file and flag values for one subcommand and merges them into
// a RunConfig after parsing. Flags are applied after the file so they win.
class Settings {
 public:
  void attach(CLI::App* sub, const std::vector<std::string>& keys) {
    sub->add_option("--config", config_file_, "key = value settings file (flags override it)")->type_name("FILE");
    for (const auto& key : keys) {
      if (values_.count(key)) continue;
      values_[key] = {};
      sub->add_option(flag_name(key), values_[key], std::string(help_for(key)))->type_name("VALUE");
    }
  }

  RunConfig resolve() const {
    RunConfig rc;
    if (!config_file_.empty()) apply_config_file(rc, config_file_);
    // Documented key order keeps "size" ahead of "height"/"width".
    for (const auto& info : setting_keys()) {
      auto it = values_.find(std::string(info.key));
      if (it != values_.end() && !it->second.empty()) apply_setting(rc, info.key, it->second);
    }
    rc.derive_seeds();
    return rc;
  }

 private:
  std::string config_file_;
  std::map<std::string, std::string> values_;
};

std::vector<std::uint32_t> parse_gammas(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    RunConfig scratch;
    apply_setting(scratch, "gamma", item);
    out.push_back(scratch.model.latent_channels);
  }
  if (out.empty()) throw ConfigError("--gammas needs at least one value");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

void emit(const std::string& output, const std::string& text) {
  if (output.empty())
    std::cout << text;
  else
    write_text(output, text);
}

int cmd_synth(const RunConfig& rc) {
  const SyntheticSet set = synth_dataset(rc.synth);
  if (set.cubes.empty()) throw ConfigError("--cubes must be >= 1");
  const fs::path cube_dir = rc.out / "cubes";
  fs::create_directories(cube_dir);
  const DatasetSplit split = split_dataset(set.cubes.size(), {}, derive_seed(rc.seed, "split"));
  std::vector<std::string> part(set.cubes.size());
  for (std::size_t i : split.train) part[i] = "train";
  for (std::size_t i : split.val) part[i] = "val";
  for (std::size_t i : split.test) part[i] = "test";
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < set.cubes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cube_%04zu.hsc1", i);
    write_cube(set.cubes[i], cube_dir / name);
    entries.push_back({part[i], fs::path("cubes") / name});
  }
  write_manifest(rc.out / "manifest.txt", entries);
  std::cout << "wrote " << set.cubes.size() << " cubes (" << split.train.size() << " train, " << split.val.size()
            << " val, " << split.test.size() << " test) and " << (rc.out / "manifest.txt").string() << "\n";
  return kOk;
}

LoadedSplit load_data(const RunConfig& rc) {
  if (rc.manifest.empty()) throw ConfigError("a dataset manifest is required (--manifest)");
  return load_manifest_cubes(rc.manifest);
}

int cmd_train(const RunConfig& rc) {
  rc.model.validate();
  TrainConfig tc = rc.train;
  tc.threads = rc.resolved_threads();
  if (tc.checkpoint_every > 0) tc.checkpoint_dir = rc.out / "checkpoints";
  const LoadedSplit data = load_data(rc);

  fs::create_directories(rc.out);
  std::ofstream log(rc.out / "train_log.csv", std::ios::binary);
  if (!log) throw IoError("cannot write " + (rc.out / "train_log.csv").string());
  ModelWeights weights = ModelWeights::initialize(rc.model);
  const TrainResult result = train(data.train, data.val, weights, tc, &log);

  const fs::path model_path = rc.out / "model.hycw";
  save_checkpoint(result.best, model_path);
  std::cout << "trained " << result.log.size() << " epochs (" << result.steps << " steps), kept epoch "
            << result.best_epoch << "\n";
  if (!data.val.empty()) {
    const double stored = evaluate(data.val, round_to_checkpoint_precision(result.best), tc.threads);
    std::cout << "final validation PSNR: " << format_db(stored) << " dB\n";
  }
  std::cout << "checkpoint: " << model_path.string() << "\n";
  return kOk;
}

int cmd_compress(const std::string& model, const std::string& input, const std::string& output, unsigned threads) {
  const ModelWeights w = load_checkpoint(model);
  const HsiCube cube = read_cube(input);
  const CompressedImage img = compress(cube, w, threads);
  write_compressed(img, output);
  std::cout << "CR " << cr_of(w.config).str(2) << " (C=" << w.config.bands << ", gamma=" << img.gamma << ")\n"
            << "latents: " << img.latents.size() << " values, " << fs::file_size(output) << " bytes\n";
  return kOk;
}

int cmd_decompress(const std::string& model, const std::string& input, const std::string& output,
                   const std::string& reference, unsigned threads) {
  const ModelWeights w = load_checkpoint(model);
  const CompressedImage img = read_compressed(input);
  const HsiCube cube = decompress(img, w, threads);
  std::optional<double> quality;
  if (!reference.empty()) quality = psnr(cube, read_cube(reference));
  write_cube(cube, output);
  std::cout << "decoded " << cube.height << "x" << cube.width << "x" << cube.bands << " (CR "
            << cr_of(w.config).str(2) << ")\n";
  if (quality) std::cout << "PSNR: " << format_db(*quality) << " dB\n";
  return kOk;
}

int cmd_eval(const std::string& model, const RunConfig& rc, const std::string& split) {
  const ModelWeights w = load_checkpoint(model);
  const LoadedSplit data = load_data(rc);
  const std::vector<HsiCube>* cubes = split == "train" ? &data.train : split == "val" ? &data.val : &data.test;
  std::cout << "mean " << split << " PSNR: " << format_db(evaluate(*cubes, w, rc.resolved_threads())) << " dB over "
            << cubes->size() << " cubes\n";
  return kOk;
}

int cmd_rd(const RunConfig& rc, const std::string& gammas, bool load_only, const std::string& output) {
  RdOptions opt;
  opt.checkpoint_dir = rc.out / "rd";
  opt.load_only = load_only;
  opt.threads = rc.resolved_threads();
  TrainConfig tc = rc.train;
  tc.threads = opt.threads;
  const auto g = parse_gammas(gammas);
  // Fail on missing checkpoints before touching the dataset.
  LoadedSplit data;
  if (!load_only || !rc.manifest.empty()) data = load_data(rc);
  const auto points = rd_sweep(data.train, data.val, data.test, rc.model, g, tc, opt);
  std::ostringstream os;
  write_rd_csv(os, points);
  emit(output, os.str());
  return kOk;
}

int cmd_complexity(const RunConfig& rc, const std::string& gammas, std::size_t height, std::size_t width,
                   const std::string& output) {
  std::vector<ModelConfig> configs;
  for (std::uint32_t gamma : parse_gammas(gammas)) {
    ModelConfig c = rc.model;
    c.latent_channels = gamma;
    c.validate();
    configs.push_back(c);
  }
  std::ostringstream os;
  write_complexity_csv(os, complexity_report(configs, height, width));
  emit(output, os.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hycot: pixelwise transformer codec for hyperspectral images"};
  app.require_subcommand(1);
  app.fallthrough(false);

  auto keys = [](std::initializer_list<const std::vector<std::string>*> lists) {
    std::vector<std::string> out;
    for (const auto* l : lists) out.insert(out.end(), l->begin(), l->end());
    return out;
  };

  Settings synth_s, train_s, eval_s, rd_s, cx_s;
  std::string model, input, output, reference, split = "test";
  std::string gammas = "51,26,13,7";
  bool load_only = false;
  unsigned threads = 0;
  std::size_t cx_height = 128, cx_width = 128;

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset (HSC1 cubes + manifest)");
  synth_s.attach(synth, kSynthKeys);

  auto* trn = app.add_subcommand("train", "train a model; writes <out>/model.hycw and <out>/train_log.csv");
  train_s.attach(trn, keys({&kTrainKeys, &kModelKeys}));

  auto* comp = app.add_subcommand("compress", "encode an HSC1 cube into an HYC1 latent file");
  comp->add_option("--model", model, "checkpoint (.hycw)")->required();
  comp->add_option("--input", input, "HSC1 cube")->required();
  comp->add_option("--output", output, "HYC1 file to write")->required();
  comp->add_option("--threads", threads, "worker threads (0 = available parallelism)");

  auto* dec = app.add_subcommand("decompress", "decode an HYC1 file back into an HSC1 cube");
  dec->add_option("--model", model, "checkpoint (.hycw) that produced the file")->required();
  dec->add_option("--input", input, "HYC1 file")->required();
  dec->add_option("--output", output, "HSC1 cube to write")->required();
  dec->add_option("--reference", reference, "original HSC1 cube; prints PSNR against it");
  dec->add_option("--threads", threads, "worker threads (0 = available parallelism)");

  auto* ev = app.add_subcommand("eval", "mean PSNR of a checkpoint on one split of a manifest");
  ev->add_option("--model", model, "checkpoint (.hycw)")->required();
  ev->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_s.attach(ev, {"manifest", "threads"});

  auto* rd = app.add_subcommand("rd", "rate-distortion table: one model per gamma, test-set PSNR");
  rd->add_option("--gammas", gammas, "comma-separated latent channel counts");
  rd->add_flag("--load-only", load_only, "use checkpoints in <out>/rd only; never train");
  rd->add_option("--output", output, "CSV file (default: standard output)");
  rd_s.attach(rd, keys({&kTrainKeys, &kModelKeys}));

  auto* cx = app.add_subcommand("complexity", "parameter and FLOP table per gamma");
  cx->add_option("--gammas", gammas, "comma-separated latent channel counts");
  cx->add_option("--height", cx_height, "image height for FLOP counts")->check(CLI::PositiveNumber);
  cx->add_option("--width", cx_width, "image width for FLOP counts")->check(CLI::PositiveNumber);
  cx->add_option("--output", output, "CSV file (default: standard output)");
  cx_s.attach(cx, kModelKeys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_s.resolve());
    if (*trn) return cmd_train(train_s.resolve());
    const unsigned resolved = threads > 0 ? threads : RunConfig{}.resolved_threads();
    if (*comp) return cmd_compress(model, input, output, resolved);
    if (*dec) return cmd_decompress(model, input, output, reference, resolved);
    if (*ev) return cmd_eval(model, eval_s.resolve(), split);
    if (*rd) return cmd_rd(rd_s.resolve(), gammas, load_only, output);
    if (*cx) return cmd_complexity(cx_s.resolve(), gammas, cx_height, cx_width, output);
  } catch (const ModelMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
