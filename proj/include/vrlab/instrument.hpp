#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "vrlab/optimizer.hpp"
#include "vrlab/problem.hpp"

namespace vrlab::instrument {

using EstimatorKind = optim::Method;

// Which direction estimator to measure, and the snapshot it reads from.
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kSgd;
  const optim::SnapshotState* snapshot = nullptr;        // svrg
  const optim::StreamingSnapshot* streaming = nullptr;   // streaming, scsg
  // When false, the iterate-side evaluation draws fresh transform seeds
  // instead of the snapshot's locked ones.
  bool lock_transforms = true;
};

// Mean squared Euclidean deviation from the mean direction (the trace of the
// empirical covariance). Exactly 0.0 for bit-identical directions.
double trace_variance(const std::vector<ParamVector>& directions);

double step_estimator_variance(const problems::FiniteSumProblem& problem,
                               const ParamVector& w, const EstimatorSpec& spec,
                               const problems::SeedTable& measure_seeds,
                               std::size_t batch_size);

struct VarianceReport {
  std::size_t epoch = 0;
  double fraction = 0.0;
  double var_sgd = 0.0;
  double var_vr = 0.0;
  double ratio = 0.0;
  bool cost_effective = false;  // ratio < 1/3
};

// Runs one instrumented epoch on the loop; at each fraction freezes the
// iterate and measures SGD and variance-reduced estimator variance over a
// full pass. Training itself is unaffected by the measurements.
std::vector<VarianceReport> variance_ratio_scan(
    optim::TrainLoop& loop, const std::vector<double>& fractions,
    std::uint64_t measure_seed);

double iterate_distance(const ParamVector& w_k, const ParamVector& w_tilde);

double empirical_curvature(const problems::FiniteSumProblem& problem,
                           const ParamVector& w_k,
                           const optim::SnapshotState& snap,
                           const std::vector<std::size_t>& batch_indices);

struct CurvatureReport {
  std::size_t epoch = 0;
  double fraction = 0.0;
  double distance = 0.0;
  std::optional<double> curvature;  // absent at the snapshot point
};

std::vector<CurvatureReport> curvature_scan(optim::TrainLoop& loop,
                                            const std::vector<double>& fractions,
                                            std::uint64_t measure_seed);

}  // namespace vrlab::instrument
