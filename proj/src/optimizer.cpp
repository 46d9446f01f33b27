#include "vrlab/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "vrlab/errors.hpp"
#include "vrlab/vec.hpp"

namespace vrlab::optim {

using problems::BnMode;
using problems::GradResult;

Method parse_method(const std::string& name) {
  if (name == "sgd") return Method::kSgd;
  if (name == "svrg") return Method::kSvrg;
  if (name == "streaming") return Method::kStreaming;
  if (name == "scsg") return Method::kScsg;
  throw InvalidArgument("unknown method '" + name + "'");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::kSgd: return "sgd";
    case Method::kSvrg: return "svrg";
    case Method::kStreaming: return "streaming";
    case Method::kScsg: return "scsg";
  }
  throw InvalidArgument("unknown method tag");
}

bool is_streaming(Method method) {
  return method == Method::kStreaming || method == Method::kScsg;
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0))
    throw InvalidArgument("optimizer: learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw InvalidArgument("optimizer: momentum must lie in [0,1)");
  if (batch_size == 0) throw InvalidArgument("optimizer: batch size must be >= 1");
  if (!(weight_decay >= 0.0))
    throw InvalidArgument("optimizer: weight decay must be >= 0");
  if (mega_batch == 0) throw InvalidArgument("optimizer: mega-batch must be >= 1");
  if (inner_steps == 0) throw InvalidArgument("optimizer: inner steps must be >= 1");
  if (!(tail_average_fraction > 0.0 && tail_average_fraction <= 1.0))
    throw InvalidArgument("optimizer: tail average fraction must lie in (0,1]");
}

OptimizerState sgd_momentum_step(const OptimizerState& state,
                                 const ParamVector& g,
                                 const OptimizerConfig& cfg) {
  cfg.validate();
  if (g.size() != state.w.size())
    throw InvalidArgument("sgd step: gradient length mismatch");
  if (state.v.size() != state.w.size())
    throw InvalidArgument("sgd step: momentum buffer length mismatch");
  if (!all_finite(g)) throw NumericError("sgd step: non-finite gradient");

  OptimizerState next = state;
  for (std::size_t i = 0; i < next.w.size(); ++i) {
    next.v[i] = cfg.momentum * state.v[i] + g[i];
    next.w[i] = state.w[i] - cfg.learning_rate * next.v[i];
  }
  ++next.step;
  return next;
}

SnapshotState take_snapshot(FiniteSumProblem& problem, const ParamVector& w,
                            std::uint64_t epoch_master_seed,
                            const OptimizerConfig& cfg) {
  cfg.validate();
  if (!all_finite(w)) throw NumericError("snapshot: non-finite iterate");

  SnapshotState snap;
  snap.w_tilde = w;
  snap.seeds = problems::build_seed_table(epoch_master_seed, problem.size());

  // Same pass structure as full_gradient, with the option of feeding each
  // batch's statistics into the running BN state as an SGD epoch would.
  const std::size_t n = problem.size();
  ParamVector total(problem.model().parameter_count(), 0.0);
  std::vector<std::size_t> batch;
  for (std::size_t start = 0; start < n; start += cfg.batch_size) {
    const std::size_t end = std::min(start + cfg.batch_size, n);
    batch.resize(end - start);
    std::iota(batch.begin(), batch.end(), start);
    const GradResult r =
        problem.minibatch_grad(w, batch, snap.seeds, BnMode::kTrain);
    axpy(static_cast<double>(end - start), r.grad, total);
    if (cfg.snapshot_updates_bn) problem.bn_state().apply_update(r.bn_stats);
  }
  for (double& x : total) x /= static_cast<double>(n);
  snap.g_full = std::move(total);
  snap.bn_saved = problem.bn_state();
  return snap;
}

OptimizerState svrg_step(const OptimizerState& state, const SnapshotState& snap,
                         const std::vector<std::size_t>& batch_indices,
                         FiniteSumProblem& problem, const OptimizerConfig& cfg,
                         bool naive_bn) {
  if (snap.w_tilde.size() != state.w.size() ||
      snap.g_full.size() != state.w.size())
    throw InvalidArgument("svrg step: snapshot length mismatch");

  const GradResult at_iterate =
      problem.minibatch_grad(state.w, batch_indices, snap.seeds, BnMode::kTrain);
  const GradResult at_snapshot = problem.minibatch_grad(
      snap.w_tilde, batch_indices, snap.seeds, BnMode::kTrain);

  ParamVector d(state.w.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = at_iterate.grad[i] - at_snapshot.grad[i] + snap.g_full[i];

  problem.bn_state().apply_update(at_iterate.bn_stats);
  if (naive_bn) problem.bn_state().apply_update(at_snapshot.bn_stats);
  return sgd_momentum_step(state, d, cfg);
}

StreamingSnapshot streaming_snapshot(FiniteSumProblem& problem,
                                     const ParamVector& w,
                                     std::size_t mega_batch,
                                     std::size_t batch_size,
                                     std::uint64_t seed) {
  const std::size_t n = problem.size();
  if (mega_batch == 0)
    throw InvalidArgument("streaming snapshot: mega-batch must be >= 1");
  if (mega_batch > n)
    throw InvalidArgument("streaming snapshot: mega-batch larger than dataset");
  if (batch_size == 0)
    throw InvalidArgument("streaming snapshot: batch size must be >= 1");
  if (!all_finite(w)) throw NumericError("streaming snapshot: non-finite iterate");

  StreamingSnapshot snap;
  snap.w_tilde = w;
  snap.seeds = problems::build_seed_table(rng::split(seed, 1), n);

  rng::Stream draw(rng::split(seed, 2));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < mega_batch; ++i)
    std::swap(pool[i], pool[i + draw.next_below(n - i)]);
  snap.mega_batch_indices.assign(pool.begin(),
                                 pool.begin() + static_cast<std::ptrdiff_t>(mega_batch));
  std::sort(snap.mega_batch_indices.begin(), snap.mega_batch_indices.end());

  ParamVector total(problem.model().parameter_count(), 0.0);
  std::vector<std::size_t> batch;
  for (std::size_t start = 0; start < mega_batch; start += batch_size) {
    const std::size_t end = std::min(start + batch_size, mega_batch);
    batch.assign(snap.mega_batch_indices.begin() + static_cast<std::ptrdiff_t>(start),
                 snap.mega_batch_indices.begin() + static_cast<std::ptrdiff_t>(end));
    const GradResult r =
        problem.minibatch_grad(w, batch, snap.seeds, BnMode::kTrain);
    axpy(static_cast<double>(end - start), r.grad, total);
  }
  for (double& x : total) x /= static_cast<double>(mega_batch);
  snap.g_tilde = std::move(total);
  snap.sampler = rng::Stream(rng::split(seed, 3));
  return snap;
}

OptimizerState streaming_svrg_step(const OptimizerState& state,
                                   StreamingSnapshot& snap,
                                   FiniteSumProblem& problem,
                                   const OptimizerConfig& cfg, bool scsg_mode) {
  if (snap.inner_steps_taken >= cfg.inner_steps)
    throw SnapshotExpired(
        "streaming step: inner-step budget exhausted, take a new snapshot");
  if (snap.w_tilde.size() != state.w.size() ||
      snap.g_tilde.size() != state.w.size())
    throw InvalidArgument("streaming step: snapshot length mismatch");

  const std::size_t universe =
      scsg_mode ? snap.mega_batch_indices.size() : problem.size();
  const std::size_t b = cfg.batch_size;
  if (b > universe)
    throw InvalidArgument("streaming step: batch larger than sampling universe");

  std::vector<std::size_t> pool(universe);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::size_t> batch(b);
  for (std::size_t i = 0; i < b; ++i) {
    std::swap(pool[i], pool[i + snap.sampler.next_below(universe - i)]);
    batch[i] = scsg_mode ? snap.mega_batch_indices[pool[i]] : pool[i];
  }

  const GradResult at_iterate =
      problem.minibatch_grad(state.w, batch, snap.seeds, BnMode::kTrain);
  const GradResult at_snapshot =
      problem.minibatch_grad(snap.w_tilde, batch, snap.seeds, BnMode::kTrain);

  ParamVector d(state.w.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = at_iterate.grad[i] - at_snapshot.grad[i] + snap.g_tilde[i];

  problem.bn_state().apply_update(at_iterate.bn_stats);
  OptimizerState next = sgd_momentum_step(state, d, cfg);
  ++snap.inner_steps_taken;
  return next;
}

double schedule_lr(std::size_t epoch, double base_lr,
                   const std::vector<std::pair<std::size_t, double>>& drops) {
  double lr = base_lr;
  for (const auto& [drop_epoch, factor] : drops)
    if (drop_epoch <= epoch) lr *= factor;
  return lr;
}

ParamVector tail_average_snapshot(const std::vector<ParamVector>& iterates,
                                  double fraction) {
  if (iterates.empty())
    throw InvalidArgument("tail average: empty iterate list");
  if (!(fraction > 0.0) || fraction > 1.0)
    throw InvalidArgument("tail average: fraction must lie in (0,1]");

  const std::size_t total = iterates.size();
  std::size_t count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(total)));
  count = std::clamp<std::size_t>(count, 1, total);

  const std::size_t dim = iterates.front().size();
  ParamVector mean(dim, 0.0);
  for (std::size_t i = total - count; i < total; ++i) {
    if (iterates[i].size() != dim)
      throw InvalidArgument("tail average: iterate length mismatch");
    for (std::size_t j = 0; j < dim; ++j) mean[j] += iterates[i][j];
  }
  for (double& x : mean) x /= static_cast<double>(count);
  return mean;
}

TrainLoop::TrainLoop(FiniteSumProblem& problem, OptimizerConfig cfg,
                     Method method, std::uint64_t master_seed, ParamVector w0)
    : problem_(problem),
      cfg_(cfg),
      method_(method),
      master_seed_(master_seed) {
  cfg_.validate();
  if (w0.size() != problem.model().parameter_count())
    throw InvalidArgument("train loop: initial parameter length mismatch");
  if (!all_finite(w0)) throw NumericError("train loop: non-finite initial point");
  if (problem.size() < cfg_.batch_size)
    throw InvalidArgument("train loop: batch size exceeds dataset");
  state_.w = std::move(w0);
  state_.v.assign(state_.w.size(), 0.0);
}

std::size_t TrainLoop::steps_per_epoch() const {
  return problem_.size() / cfg_.batch_size;
}

void TrainLoop::set_learning_rate(double lr) {
  if (!(lr > 0.0))
    throw InvalidArgument("train loop: learning rate must be > 0");
  cfg_.learning_rate = lr;
}

void TrainLoop::maybe_take_snapshot(std::uint64_t seed) {
  const ParamVector point =
      (cfg_.tail_average && !tail_iterates_.empty())
          ? tail_average_snapshot(tail_iterates_, cfg_.tail_average_fraction)
          : state_.w;
  snap_ = take_snapshot(problem_, point, seed, cfg_);
  steps_since_snapshot_ = 0;
  ++snapshot_count_;
  tail_iterates_.clear();
}

void TrainLoop::run_epoch(const EpochHooks& hooks) {
  const std::size_t n = problem_.size();
  const std::size_t b = cfg_.batch_size;
  const std::size_t steps = steps_per_epoch();
  if (is_streaming(method_)) {
    if (cfg_.mega_batch < b)
      throw InvalidArgument("train loop: mega-batch smaller than batch size");
    if (cfg_.mega_batch > n)
      throw InvalidArgument("train loop: mega-batch larger than dataset");
  }

  std::vector<std::pair<std::size_t, double>> stops;
  stops.reserve(hooks.fractions.size());
  for (double f : hooks.fractions) {
    if (!(f >= 0.0 && f <= 1.0))
      throw InvalidArgument("train loop: fraction outside [0,1]");
    const auto target = static_cast<std::size_t>(
        std::llround(f * static_cast<double>(steps)));
    stops.emplace_back(std::min(target, steps), f);
  }
  std::size_t stop_cursor = 0;
  const auto fire = [&](std::size_t completed) {
    while (stop_cursor < stops.size() &&
           stops[stop_cursor].first == completed) {
      if (hooks.on_fraction)
        hooks.on_fraction(EpochPoint{state_.epoch, stops[stop_cursor].second,
                                     completed, steps});
      ++stop_cursor;
    }
  };

  const std::uint64_t epoch_seed = rng::split(master_seed_, state_.epoch + 1);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng::Stream shuffle(rng::split(epoch_seed, 1));
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[shuffle.next_below(i + 1)]);
  const SeedTable epoch_seeds =
      problems::build_seed_table(rng::split(epoch_seed, 2), n);

  const std::size_t interval =
      cfg_.snapshot_interval == 0 ? steps : cfg_.snapshot_interval;
  std::vector<std::size_t> batch(b);
  for (std::size_t s = 0; s < steps; ++s) {
    if (method_ == Method::kSvrg &&
        (!snap_ || steps_since_snapshot_ >= interval))
      maybe_take_snapshot(rng::split(epoch_seed, 100 + s));
    if (is_streaming(method_) &&
        (!stream_snap_ || stream_snap_->inner_steps_taken >= cfg_.inner_steps))
      stream_snap_ = streaming_snapshot(problem_, state_.w, cfg_.mega_batch, b,
                                        rng::split(epoch_seed, 100 + s));
    if (s == 0) fire(0);

    std::copy(perm.begin() + static_cast<std::ptrdiff_t>(s * b),
              perm.begin() + static_cast<std::ptrdiff_t>((s + 1) * b),
              batch.begin());
    switch (method_) {
      case Method::kSgd: {
        const GradResult g =
            problem_.minibatch_grad(state_.w, batch, epoch_seeds, BnMode::kTrain);
        problem_.bn_state().apply_update(g.bn_stats);
        state_ = sgd_momentum_step(state_, g.grad, cfg_);
        break;
      }
      case Method::kSvrg:
        state_ = svrg_step(state_, *snap_, batch, problem_, cfg_);
        ++steps_since_snapshot_;
        break;
      case Method::kStreaming:
      case Method::kScsg:
        state_ = streaming_svrg_step(state_, *stream_snap_, problem_, cfg_,
                                     method_ == Method::kScsg);
        break;
    }
    if (cfg_.tail_average && method_ == Method::kSvrg)
      tail_iterates_.push_back(state_.w);
    fire(s + 1);
  }
  ++state_.epoch;
}

}  // namespace vrlab::optim
