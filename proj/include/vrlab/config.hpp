#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vrlab/optimizer.hpp"

namespace vrlab::runner {

struct ProblemConfig {
  std::size_t n = 4096;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 1;
  std::size_t classes = 2;
  std::string dataset_path;  // empty: generate synthetically
  std::string model = "mlp";
  std::vector<std::size_t> hidden = {64, 32};
  std::string activation = "relu";
  bool batch_norm = true;
  bool bias = true;
  double flip_probability = 0.5;
  std::size_t pad = 1;
  std::size_t crop = 8;
  double holdout_fraction = 0.2;
};

// Defaults reproduce the baseline protocol: lr 0.1, momentum 0.9, weight
// decay 1e-4, batch 16, 30 epochs with 10x drops at 15 and 25.
struct ExperimentConfig {
  ProblemConfig problem;
  optim::Method method = optim::Method::kSgd;
  optim::OptimizerConfig optimizer;
  std::size_t epochs = 30;
  std::vector<std::pair<std::size_t, double>> lr_drops = {{15, 0.1}, {25, 0.1}};
  std::optional<std::size_t> switch_epoch;
  std::uint64_t seed = 1234;
  std::vector<double> fractions = {0.02, 0.11, 0.33, 0.66, 1.0};
  bool record_wall_time = false;
  std::string out_dir = ".";
  std::string run_id = "run";

  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Applies one "key=value" or "section.key=value" assignment on top of a
// parsed config.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

}  // namespace vrlab::runner
