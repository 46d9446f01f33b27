#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vrlab/problem.hpp"
#include "vrlab/rng.hpp"

namespace vrlab::optim {

using problems::FiniteSumProblem;
using problems::SeedTable;

enum class Method { kSgd, kSvrg, kStreaming, kScsg };

Method parse_method(const std::string& name);
std::string method_name(Method method);
bool is_streaming(Method method);

struct OptimizerConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  double weight_decay = 0.0001;
  // Steps between snapshots; 0 means one snapshot per epoch at epoch start.
  std::size_t snapshot_interval = 0;
  std::size_t mega_batch = 160;  // B, streaming only
  std::size_t inner_steps = 10;  // m, streaming only
  bool tail_average = false;
  double tail_average_fraction = 1.0;
  // Whether the snapshot full-gradient pass updates BN running statistics,
  // matching what an SGD epoch over the same batches would do.
  bool snapshot_updates_bn = true;

  void validate() const;
};

struct OptimizerState {
  ParamVector w;
  ParamVector v;              // momentum buffer
  std::uint64_t step = 0;     // k
  std::size_t epoch = 0;
};

struct SnapshotState {
  ParamVector w_tilde;
  ParamVector g_full;
  SeedTable seeds;
  problems::BnState bn_saved;
};

struct StreamingSnapshot {
  ParamVector w_tilde;
  ParamVector g_tilde;
  std::vector<std::size_t> mega_batch_indices;
  SeedTable seeds;
  std::size_t inner_steps_taken = 0;
  rng::Stream sampler{0};  // draws the inner minibatches
};

OptimizerState sgd_momentum_step(const OptimizerState& state,
                                 const ParamVector& g,
                                 const OptimizerConfig& cfg);

SnapshotState take_snapshot(FiniteSumProblem& problem, const ParamVector& w,
                            std::uint64_t epoch_master_seed,
                            const OptimizerConfig& cfg);

// naive_bn keeps the running-statistics update from the snapshot-side
// evaluation instead of discarding it, reproducing the failure the BN reset
// exists to avoid.
OptimizerState svrg_step(const OptimizerState& state, const SnapshotState& snap,
                         const std::vector<std::size_t>& batch_indices,
                         FiniteSumProblem& problem, const OptimizerConfig& cfg,
                         bool naive_bn = false);

StreamingSnapshot streaming_snapshot(FiniteSumProblem& problem,
                                     const ParamVector& w, std::size_t mega_batch,
                                     std::size_t batch_size, std::uint64_t seed);

OptimizerState streaming_svrg_step(const OptimizerState& state,
                                   StreamingSnapshot& snap,
                                   FiniteSumProblem& problem,
                                   const OptimizerConfig& cfg, bool scsg_mode);

double schedule_lr(std::size_t epoch, double base_lr,
                   const std::vector<std::pair<std::size_t, double>>& drops);

ParamVector tail_average_snapshot(const std::vector<ParamVector>& iterates,
                                  double fraction);

// Position within an epoch at which an instrumentation hook fires.
struct EpochPoint {
  std::size_t epoch = 0;
  double fraction = 0.0;
  std::size_t step_index = 0;      // steps completed in this epoch
  std::size_t steps_per_epoch = 0;
};

struct EpochHooks {
  std::vector<double> fractions;  // sorted ascending, each in [0,1]
  std::function<void(const EpochPoint&)> on_fraction;
};

// Drives seeded without-replacement epochs for one method, owning the
// optimizer state and the current snapshot.
class TrainLoop {
 public:
  TrainLoop(FiniteSumProblem& problem, OptimizerConfig cfg, Method method,
            std::uint64_t master_seed, ParamVector w0);

  void run_epoch(const EpochHooks& hooks = {});

  void set_method(Method method) { method_ = method; }
  Method method() const { return method_; }
  void set_learning_rate(double lr);

  const OptimizerState& state() const { return state_; }
  const FiniteSumProblem& problem() const { return problem_; }
  const OptimizerConfig& config() const { return cfg_; }
  const SnapshotState* snapshot() const {
    return snap_ ? &*snap_ : nullptr;
  }
  const StreamingSnapshot* streaming_snap() const {
    return stream_snap_ ? &*stream_snap_ : nullptr;
  }
  std::size_t snapshot_count() const { return snapshot_count_; }
  std::size_t steps_per_epoch() const;

 private:
  void maybe_take_snapshot(std::uint64_t seed);

  FiniteSumProblem& problem_;
  OptimizerConfig cfg_;
  Method method_;
  std::uint64_t master_seed_;
  OptimizerState state_;
  std::optional<SnapshotState> snap_;
  std::optional<StreamingSnapshot> stream_snap_;
  std::size_t steps_since_snapshot_ = 0;
  std::size_t snapshot_count_ = 0;
  std::vector<ParamVector> tail_iterates_;
};

}  // namespace vrlab::optim
