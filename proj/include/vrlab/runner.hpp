#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vrlab/config.hpp"
#include "vrlab/data.hpp"
#include "vrlab/model.hpp"
#include "vrlab/transform.hpp"

namespace vrlab::runner {

inline constexpr const char* kMetricsHeader =
    "run_id,method,epoch,fraction,train_loss,train_error,var_ratio,iter_dist,"
    "curvature,wall_time_s";

struct MetricsRecord {
  std::string run_id;
  std::string method;
  std::size_t epoch = 0;
  double fraction = 0.0;
  std::optional<double> train_loss;
  std::optional<double> train_error;
  std::optional<double> var_ratio;
  std::optional<double> iter_dist;
  std::optional<double> curvature;
  std::optional<double> wall_time_s;

  bool operator==(const MetricsRecord&) const = default;
};

void emit_metrics_csv(const std::vector<MetricsRecord>& records,
                      const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

enum class Figure { kVarianceRatio, kDistance, kCurvature, kTestError };
Figure parse_figure(const std::string& name);

void emit_plot_data(const std::vector<MetricsRecord>& records, Figure figure,
                    const std::string& path);

// Train/holdout datasets, model and transform assembled from a config.
struct BuiltProblem {
  problems::Dataset train;
  problems::Dataset holdout;  // empty when holdout_fraction = 0
  problems::Model model;
  problems::TransformSpec transform;
};

BuiltProblem build_problem(const ExperimentConfig& cfg);

std::string metrics_path(const ExperimentConfig& cfg);

// Trains per the config, persisting one record per epoch (plus one "/test"
// suffixed record when a holdout exists) with flushes at epoch boundaries.
std::vector<MetricsRecord> run_experiment(const ExperimentConfig& cfg);

// Warm-up epochs per the config, then one instrumented epoch measuring at the
// configured fractions.
std::vector<MetricsRecord> run_variance_scan(const ExperimentConfig& cfg);
std::vector<MetricsRecord> run_curvature_scan(const ExperimentConfig& cfg);

}  // namespace vrlab::runner
