#include "hycot/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "hycot/errors.hpp"
#include "hycot/rng.hpp"

namespace hycot {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  return out;
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view value) {
  if (!value.empty() && value.front() == '-')
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (must be >= 0)");
  return parse_number<T>(key, value);
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void RunConfig::derive_seeds() {
  model.seed = derive_seed(seed, "model");
  train.seed = derive_seed(seed, "train");
  synth.seed = derive_seed(seed, "synth");
}

unsigned RunConfig::resolved_threads() const {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

const std::vector<SettingInfo>& setting_keys() {
  static const std::vector<SettingInfo> keys = {
      {"seed", "base seed; model, training, synthesis and split seeds derive from it"},
      {"threads", "worker threads for inference (0 = available parallelism)"},
      {"out", "output directory"},
      {"manifest", "dataset manifest file"},
      {"bands", "spectral bands C (model and synthetic data)"},
      {"group_depth", "bands per token g_d"},
      {"embed_dim", "token embedding width"},
      {"blocks", "transformer blocks L"},
      {"heads", "attention heads k"},
      {"hidden_dim", "encoder/decoder hidden width"},
      {"gamma", "latent channels per pixel"},
      {"block_mlp_dim", "MLP width inside each transformer block"},
      {"leaky_slope", "negative slope of the leaky ReLU"},
      {"bias", "use bias terms in linear layers (true/false)"},
      {"lr", "Adam learning rate"},
      {"epochs", "training epochs"},
      {"batch_pixels", "maximum pixels per optimizer step"},
      {"r", "training-set reduction factor: ceil(H*W/r) pixels per image per epoch"},
      {"beta1", "Adam beta1"},
      {"beta2", "Adam beta2"},
      {"adam_eps", "Adam epsilon"},
      {"checkpoint_every", "write a checkpoint every N epochs (0 = off)"},
      {"cubes", "number of synthetic cubes"},
      {"size", "synthetic cube height and width"},
      {"height", "synthetic cube height"},
      {"width", "synthetic cube width"},
      {"endmembers", "endmember spectra per synthetic dataset"},
      {"noise", "Gaussian noise standard deviation for synthetic data"},
  };
  return keys;
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  using u32 = std::uint32_t;
  using u64 = std::uint64_t;
  using usize = std::size_t;
  if (key == "seed") c.seed = parse_unsigned<u64>(key, value);
  else if (key == "threads") c.threads = parse_unsigned<unsigned>(key, value);
  else if (key == "out") c.out = std::string(value);
  else if (key == "manifest") c.manifest = std::string(value);
  else if (key == "bands") {
    c.model.bands = parse_unsigned<u32>(key, value);
    c.synth.bands = c.model.bands;
  }
  else if (key == "group_depth") c.model.group_depth = parse_unsigned<u32>(key, value);
  else if (key == "embed_dim") c.model.embed_dim = parse_unsigned<u32>(key, value);
  else if (key == "blocks") c.model.blocks = parse_unsigned<u32>(key, value);
  else if (key == "heads") c.model.heads = parse_unsigned<u32>(key, value);
  else if (key == "hidden_dim") c.model.hidden_dim = parse_unsigned<u32>(key, value);
  else if (key == "gamma") c.model.latent_channels = parse_unsigned<u32>(key, value);
  else if (key == "block_mlp_dim") c.model.block_mlp_dim = parse_unsigned<u32>(key, value);
  else if (key == "leaky_slope") c.model.leaky_slope = parse_number<double>(key, value);
  else if (key == "bias") c.model.use_bias = parse_bool(key, value);
  else if (key == "lr") c.train.lr = parse_number<double>(key, value);
  else if (key == "epochs") c.train.epochs = parse_unsigned<u32>(key, value);
  else if (key == "batch_pixels") c.train.batch_pixels = parse_unsigned<usize>(key, value);
  else if (key == "r") c.train.reduction = parse_unsigned<u64>(key, value);
  else if (key == "beta1") c.train.beta1 = parse_number<double>(key, value);
  else if (key == "beta2") c.train.beta2 = parse_number<double>(key, value);
  else if (key == "adam_eps") c.train.adam_eps = parse_number<double>(key, value);
  else if (key == "checkpoint_every") c.train.checkpoint_every = parse_unsigned<u32>(key, value);
  else if (key == "cubes") c.synth.cubes = parse_unsigned<usize>(key, value);
  else if (key == "size") c.synth.height = c.synth.width = parse_unsigned<usize>(key, value);
  else if (key == "height") c.synth.height = parse_unsigned<usize>(key, value);
  else if (key == "width") c.synth.width = parse_unsigned<usize>(key, value);
  else if (key == "endmembers") c.synth.endmembers = parse_unsigned<usize>(key, value);
  else if (key == "noise") c.synth.noise_sd = parse_number<double>(key, value);
  else throw ConfigError("unknown setting '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  for (const auto& [key, value] : parse_config_text(ss.str())) {
    try {
      apply_setting(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
}

}  // namespace hycot
