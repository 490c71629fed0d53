#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hycot/dataio.hpp"
#include "hycot/model.hpp"

namespace hycot {

struct TrainConfig;

/// 10 log10(peak^2 / MSE) over all H*W*C elements. Identical cubes give +inf.
double psnr(const HsiCube& a, const HsiCube& b, double peak = 1.0);

/// Renders +inf as "inf", otherwise fixed with `digits` decimals.
std::string format_db(double value, int digits = 4);

struct RDPoint {
  Ratio cr;
  double psnr_db = 0.0;
  std::uint32_t gamma = 0;
  std::string label;
};

struct RdOptions {
  std::string label = "HyCoT";
  /// Where per-gamma checkpoints are looked up and stored ("model_g<gamma>.hycw").
  /// Empty disables both.
  std::filesystem::path checkpoint_dir;
  /// Never train; every gamma must already have a checkpoint.
  bool load_only = false;
  unsigned threads = 1;
};

std::filesystem::path rd_checkpoint_path(const std::filesystem::path& dir, std::uint32_t gamma);

/// Trains (or loads) one model per gamma on `train`/`val`, evaluates mean PSNR
/// on `test`, and returns points sorted by ascending CR.
std::vector<RDPoint> rd_sweep(const std::vector<HsiCube>& train, const std::vector<HsiCube>& val,
                              const std::vector<HsiCube>& test, const ModelConfig& base,
                              const std::vector<std::uint32_t>& gammas, const TrainConfig& train_config,
                              const RdOptions& options = {});

struct ComplexityRow {
  std::string label;
  std::uint32_t gamma = 0;
  Ratio cr;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
};

/// One row per config, sorted by ascending CR. Pure function of the configs.
std::vector<ComplexityRow> complexity_report(const std::vector<ModelConfig>& configs, std::size_t height,
                                             std::size_t width, const std::string& label = "HyCoT");

/// Header `label,gamma,cr,psnr_db`.
void write_rd_csv(std::ostream& os, const std::vector<RDPoint>& points);
/// Header `label,gamma,cr,flops,params`.
void write_complexity_csv(std::ostream& os, const std::vector<ComplexityRow>& rows);

}  // namespace hycot
