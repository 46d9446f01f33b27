#include "vrlab/instrument.hpp"

#include <numeric>

#include "vrlab/errors.hpp"
#include "vrlab/rng.hpp"
#include "vrlab/vec.hpp"

namespace vrlab::instrument {

using problems::BnMode;
using problems::FiniteSumProblem;
using problems::SeedTable;

double trace_variance(const std::vector<ParamVector>& directions) {
  const std::size_t count = directions.size();
  if (count < 2)
    throw InsufficientData("variance needs at least 2 directions");
  const std::size_t dim = directions.front().size();
  for (const ParamVector& d : directions)
    if (d.size() != dim)
      throw InvalidArgument("variance: direction length mismatch");

  // Shift by the first direction so that identical inputs cancel exactly and
  // the constant case yields 0.0 rather than accumulated rounding noise.
  std::vector<ParamVector> shifted(count);
  for (std::size_t j = 0; j < count; ++j)
    shifted[j] = subtract(directions[j], directions[0]);
  ParamVector mean(dim, 0.0);
  for (const ParamVector& e : shifted) axpy(1.0, e, mean);
  for (double& x : mean) x /= static_cast<double>(count);

  double total = 0.0;
  for (const ParamVector& e : shifted) {
    double sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double r = e[i] - mean[i];
      sq += r * r;
    }
    total += sq;
  }
  return total / static_cast<double>(count);
}

double step_estimator_variance(const FiniteSumProblem& problem,
                               const ParamVector& w, const EstimatorSpec& spec,
                               const SeedTable& measure_seeds,
                               std::size_t batch_size) {
  if (batch_size == 0)
    throw InvalidArgument("variance pass: batch size must be >= 1");
  if (spec.kind == EstimatorKind::kSvrg && spec.snapshot == nullptr)
    throw InvalidArgument("variance pass: svrg needs a snapshot");
  if (optim::is_streaming(spec.kind) && spec.streaming == nullptr)
    throw InvalidArgument("variance pass: streaming kinds need a mega-batch snapshot");

  // The pass partitions the estimator's sampling universe in order.
  std::vector<std::size_t> universe;
  if (spec.kind == EstimatorKind::kScsg) {
    universe = spec.streaming->mega_batch_indices;
  } else {
    universe.resize(problem.size());
    std::iota(universe.begin(), universe.end(), std::size_t{0});
  }
  const std::size_t batches = universe.size() / batch_size;
  if (batches < 2)
    throw InsufficientData("variance pass: fewer than 2 minibatches");

  std::vector<ParamVector> directions;
  directions.reserve(batches);
  std::vector<std::size_t> batch(batch_size);
  for (std::size_t j = 0; j < batches; ++j) {
    std::copy(universe.begin() + static_cast<std::ptrdiff_t>(j * batch_size),
              universe.begin() + static_cast<std::ptrdiff_t>((j + 1) * batch_size),
              batch.begin());
    switch (spec.kind) {
      case EstimatorKind::kSgd:
        directions.push_back(
            problem.minibatch_grad(w, batch, measure_seeds, BnMode::kTrain).grad);
        break;
      case EstimatorKind::kSvrg: {
        const optim::SnapshotState& snap = *spec.snapshot;
        const SeedTable& iterate_seeds =
            spec.lock_transforms ? snap.seeds : measure_seeds;
        ParamVector d =
            problem.minibatch_grad(w, batch, iterate_seeds, BnMode::kTrain).grad;
        const ParamVector at_snap =
            problem.minibatch_grad(snap.w_tilde, batch, snap.seeds, BnMode::kTrain)
                .grad;
        // (g_w - g_w~) first so that locked evaluations cancel bit-exactly.
        for (std::size_t i = 0; i < d.size(); ++i)
          d[i] = (d[i] - at_snap[i]) + snap.g_full[i];
        directions.push_back(std::move(d));
        break;
      }
      case EstimatorKind::kStreaming:
      case EstimatorKind::kScsg: {
        const optim::StreamingSnapshot& snap = *spec.streaming;
        const SeedTable& iterate_seeds =
            spec.lock_transforms ? snap.seeds : measure_seeds;
        ParamVector d =
            problem.minibatch_grad(w, batch, iterate_seeds, BnMode::kTrain).grad;
        const ParamVector at_snap =
            problem.minibatch_grad(snap.w_tilde, batch, snap.seeds, BnMode::kTrain)
                .grad;
        for (std::size_t i = 0; i < d.size(); ++i)
          d[i] = (d[i] - at_snap[i]) + snap.g_tilde[i];
        directions.push_back(std::move(d));
        break;
      }
    }
  }
  return trace_variance(directions);
}

namespace {

double safe_ratio(double var_vr, double var_sgd) {
  if (var_sgd > 0.0) return var_vr / var_sgd;
  if (var_vr == 0.0) return 0.0;
  throw NumericError("variance ratio undefined: zero SGD variance");
}

}  // namespace

std::vector<VarianceReport> variance_ratio_scan(
    optim::TrainLoop& loop, const std::vector<double>& fractions,
    std::uint64_t measure_seed) {
  if (loop.method() == optim::Method::kSgd)
    throw InvalidArgument("variance scan: loop must run a variance-reduced method");

  std::vector<VarianceReport> reports;
  std::size_t point = 0;
  optim::EpochHooks hooks;
  hooks.fractions = fractions;
  hooks.on_fraction = [&](const optim::EpochPoint& at) {
    const SeedTable measure = problems::build_seed_table(
        rng::split(measure_seed, point), loop.problem().size());
    ++point;

    const EstimatorSpec sgd_spec{EstimatorKind::kSgd, nullptr, nullptr, true};
    const EstimatorSpec vr_spec{loop.method(), loop.snapshot(),
                                loop.streaming_snap(), true};
    const std::size_t b = loop.config().batch_size;
    VarianceReport report;
    report.epoch = at.epoch;
    report.fraction = at.fraction;
    report.var_sgd = step_estimator_variance(loop.problem(), loop.state().w,
                                             sgd_spec, measure, b);
    report.var_vr = step_estimator_variance(loop.problem(), loop.state().w,
                                            vr_spec, measure, b);
    report.ratio = safe_ratio(report.var_vr, report.var_sgd);
    report.cost_effective = report.ratio < 1.0 / 3.0;
    reports.push_back(report);
  };
  loop.run_epoch(hooks);
  return reports;
}

double iterate_distance(const ParamVector& w_k, const ParamVector& w_tilde) {
  check_same_length(w_k, w_tilde, "iterate distance");
  return distance(w_k, w_tilde);
}

double empirical_curvature(const FiniteSumProblem& problem,
                           const ParamVector& w_k,
                           const optim::SnapshotState& snap,
                           const std::vector<std::size_t>& batch_indices) {
  const double dist = iterate_distance(w_k, snap.w_tilde);
  if (dist == 0.0)
    throw UndefinedAtSnapshot("curvature undefined at the snapshot point");
  const ParamVector at_iterate =
      problem.minibatch_grad(w_k, batch_indices, snap.seeds, BnMode::kTrain).grad;
  const ParamVector at_snap =
      problem
          .minibatch_grad(snap.w_tilde, batch_indices, snap.seeds, BnMode::kTrain)
          .grad;
  return distance(at_iterate, at_snap) / dist;
}

std::vector<CurvatureReport> curvature_scan(optim::TrainLoop& loop,
                                            const std::vector<double>& fractions,
                                            std::uint64_t measure_seed) {
  if (loop.method() != optim::Method::kSvrg)
    throw InvalidArgument("curvature scan: loop must run svrg");

  std::vector<CurvatureReport> reports;
  std::size_t point = 0;
  optim::EpochHooks hooks;
  hooks.fractions = fractions;
  hooks.on_fraction = [&](const optim::EpochPoint& at) {
    const optim::SnapshotState* snap = loop.snapshot();
    if (snap == nullptr)
      throw InvalidArgument("curvature scan: no snapshot taken yet");

    CurvatureReport report;
    report.epoch = at.epoch;
    report.fraction = at.fraction;
    report.distance = iterate_distance(loop.state().w, snap->w_tilde);
    if (report.distance > 0.0) {
      const std::size_t n = loop.problem().size();
      const std::size_t b = loop.config().batch_size;
      rng::Stream draw(rng::split(measure_seed, point));
      std::vector<std::size_t> pool(n);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      std::vector<std::size_t> batch(b);
      for (std::size_t i = 0; i < b; ++i) {
        std::swap(pool[i], pool[i + draw.next_below(n - i)]);
        batch[i] = pool[i];
      }
      report.curvature =
          empirical_curvature(loop.problem(), loop.state().w, *snap, batch);
    }
    ++point;
    reports.push_back(report);
  };
  loop.run_epoch(hooks);
  return reports;
}

}  // namespace vrlab::instrument
