#include "hycot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "hycot/checkpoint.hpp"
#include "hycot/errors.hpp"
#include "hycot/training.hpp"

namespace hycot {

double psnr(const HsiCube& a, const HsiCube& b, double peak) {
  if (a.height != b.height || a.width != b.width || a.bands != b.bands || a.data.size() != b.data.size())
    throw DimensionError("psnr: cube shapes differ");
  if (!(peak > 0.0)) throw ContractError("psnr: peak must be > 0");
  if (a.data.empty()) throw DimensionError("psnr: empty cubes");
  double total = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    total += d * d;
  }
  const double mse = total / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

std::string format_db(double value, int digits) {
  if (std::isinf(value) && value > 0) return "inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::filesystem::path rd_checkpoint_path(const std::filesystem::path& dir, std::uint32_t gamma) {
  return dir / ("model_g" + std::to_string(gamma) + ".hycw");
}

std::vector<RDPoint> rd_sweep(const std::vector<HsiCube>& train_set, const std::vector<HsiCube>& val_set,
                              const std::vector<HsiCube>& test_set, const ModelConfig& base,
                              const std::vector<std::uint32_t>& gammas, const TrainConfig& train_config,
                              const RdOptions& options) {
  if (gammas.empty()) throw ConfigError("rd_sweep: no gamma values given");
  for (std::uint32_t gamma : gammas)
    if (gamma < 1 || gamma > base.bands)
      throw ConfigError("rd_sweep: gamma " + std::to_string(gamma) + " outside [1, " + std::to_string(base.bands) + "]");

  if (options.load_only) {
    std::string missing;
    for (std::uint32_t gamma : gammas)
      if (options.checkpoint_dir.empty() || !std::filesystem::exists(rd_checkpoint_path(options.checkpoint_dir, gamma)))
        missing += (missing.empty() ? "" : ", ") + ("gamma=" + std::to_string(gamma));
    if (!missing.empty()) throw ConfigError("rd_sweep --load-only: missing checkpoints for " + missing);
  }

  std::vector<RDPoint> points;
  for (std::uint32_t gamma : gammas) {
    ModelConfig config = base;
    config.latent_channels = gamma;
    const auto ckpt = options.checkpoint_dir.empty() ? std::filesystem::path()
                                                     : rd_checkpoint_path(options.checkpoint_dir, gamma);
    ModelWeights weights;
    if (!ckpt.empty() && std::filesystem::exists(ckpt)) {
      weights = load_checkpoint(ckpt);
      ModelConfig stored = weights.config;
      stored.seed = config.seed;  // only affects initialization
      if (stored != config)
        throw ModelMismatchError("checkpoint " + ckpt.string() + " does not match gamma=" + std::to_string(gamma));
    } else {
      ModelWeights init = ModelWeights::initialize(config);
      weights = round_to_checkpoint_precision(train(train_set, val_set, init, train_config).best);
      if (!ckpt.empty()) {
        std::filesystem::create_directories(options.checkpoint_dir);
        save_checkpoint(weights, ckpt);
      }
    }
    points.push_back({cr_of(config), evaluate(test_set, weights, options.threads), gamma, options.label});
  }
  std::stable_sort(points.begin(), points.end(), [](const RDPoint& a, const RDPoint& b) { return a.cr < b.cr; });
  return points;
}

std::vector<ComplexityRow> complexity_report(const std::vector<ModelConfig>& configs, std::size_t height,
                                             std::size_t width, const std::string& label) {
  std::vector<ComplexityRow> rows;
  for (const ModelConfig& c : configs)
    rows.push_back({label, c.latent_channels, cr_of(c), flops_estimate(c, height, width), param_count(c)});
  std::stable_sort(rows.begin(), rows.end(), [](const ComplexityRow& a, const ComplexityRow& b) { return a.cr < b.cr; });
  return rows;
}

void write_rd_csv(std::ostream& os, const std::vector<RDPoint>& points) {
  os << "label,gamma,cr,psnr_db\n";
  for (const auto& p : points) os << p.label << ',' << p.gamma << ',' << p.cr.str(2) << ',' << format_db(p.psnr_db) << '\n';
}

void write_complexity_csv(std::ostream& os, const std::vector<ComplexityRow>& rows) {
  os << "label,gamma,cr,flops,params\n";
  for (const auto& r : rows) os << r.label << ',' << r.gamma << ',' << r.cr.str(2) << ',' << r.flops << ',' << r.params << '\n';
}

}  // namespace hycot
