#ifndef VRLAB_MODEL_HPP
#define VRLAB_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vrlab/data.hpp"
#include "vrlab/vec.hpp"

namespace vrlab::problems {

enum class Architecture { kLeastSquares, kLogistic, kMlp };
enum class Activation { kRelu, kElu };
enum class BnMode { kTrain, kEval };

// Model zoo configuration. layer_sizes runs input..output, e.g. {64, 64, 32, 2}
// for the desk-scale MLP. Hidden layers are linear -> (batch norm) ->
// activation; the output layer is linear into the loss head. Weight decay is
// part of the per-example loss, (weight_decay/2)*||w||^2 over all parameters.
struct Model {
  Architecture architecture = Architecture::kMlp;
  Activation activation = Activation::kRelu;
  bool batch_norm = false;
  bool bias = true;
  std::vector<std::size_t> layer_sizes;
  double weight_decay = 0.0;

  std::size_t layer_count() const { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;
  std::size_t bn_feature_count() const;  // total normalized features
  void validate() const;
};

// Per-layer batch statistics actually used by one oracle evaluation,
// concatenated over hidden layers. Empty when the model has no batch norm.
struct BnStats {
  std::vector<double> mean;
  std::vector<double> var;
};

// Running normalization statistics kept for eval mode. Gradient oracles
// never touch this; updates happen only through apply_update, which the
// optimizer calls explicitly after a training step it wants recorded.
struct BnState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;

  static BnState initial(const Model& model);
  // m_new = 0.9*m_old + 0.1*m_batch, same recursion for the variance.
  void apply_update(const BnStats& batch_stats);
  void validate() const;
};

struct GradResult {
  double loss = 0.0;
  ParamVector grad;
  BnStats bn_stats;
};

// Mean loss and its exact gradient over a batch of already-transformed
// examples. In train mode normalization uses minibatch statistics (biased
// variance) and reports them; in eval mode it uses `bn` and reports those.
GradResult batch_loss_grad(const Model& model, const ParamVector& w,
                           const std::vector<Example>& batch, BnMode mode,
                           const BnState& bn);

// Loss only; same semantics, cheaper.
double batch_loss(const Model& model, const ParamVector& w,
                  const std::vector<Example>& batch, BnMode mode,
                  const BnState& bn);

// Predicted class index for each example (argmax of the logits; a single
// sigmoid output predicts class 1 when nonnegative).
std::vector<int> batch_predictions(const Model& model, const ParamVector& w,
                                   const std::vector<Example>& batch,
                                   BnMode mode, const BnState& bn);

// Seeded He/Glorot-style initialization; biases and BN shifts start at zero,
// BN scales at one.
ParamVector initial_params(const Model& model, std::uint64_t seed);

}  // namespace vrlab::problems

#endif  // VRLAB_MODEL_HPP
