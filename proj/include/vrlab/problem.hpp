#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vrlab/data.hpp"
#include "vrlab/model.hpp"
#include "vrlab/transform.hpp"

namespace vrlab::problems {

// One example paired with the locked augmentation seed to use for it.
struct SeededExample {
  const Example* example = nullptr;
  std::uint64_t seed = 0;
};

GradResult minibatch_grad(const Model& model, const ParamVector& w,
                          const std::vector<SeededExample>& batch,
                          const TransformSpec& spec, BnMode mode,
                          const BnState& bn);

ParamVector full_gradient(const Model& model, const ParamVector& w,
                          const Dataset& dataset, const SeedTable& seeds,
                          const TransformSpec& spec, std::size_t batch_size,
                          const BnState& bn);

// Dataset + model + transform pipeline with the mutable BN running statistics
// of one training run. Gradient oracles never touch the BN state; callers
// apply EMA updates explicitly through bn_state().
class FiniteSumProblem {
 public:
  FiniteSumProblem(Dataset dataset, Model model, TransformSpec transform);

  const Dataset& dataset() const { return dataset_; }
  const Model& model() const { return model_; }
  const TransformSpec& transform() const { return transform_; }
  std::size_t size() const { return dataset_.size(); }

  BnState& bn_state() { return bn_; }
  const BnState& bn_state() const { return bn_; }

  GradResult minibatch_grad(const ParamVector& w,
                            const std::vector<std::size_t>& indices,
                            const SeedTable& seeds, BnMode mode) const;
  GradResult minibatch_grad(const ParamVector& w,
                            const std::vector<std::size_t>& indices,
                            const SeedTable& seeds, BnMode mode,
                            const BnState& bn) const;
  ParamVector full_gradient(const ParamVector& w, const SeedTable& seeds,
                            std::size_t batch_size) const;

  struct Evaluation {
    double loss = 0.0;
    double error = 0.0;
  };

  // Un-augmented loss and misclassification rate, BN in eval mode.
  Evaluation evaluate(const ParamVector& w, const Dataset& data,
                      std::size_t batch_size) const;
  Evaluation evaluate(const ParamVector& w, std::size_t batch_size) const;

 private:
  Dataset dataset_;
  Model model_;
  TransformSpec transform_;
  BnState bn_;
};

}  // namespace vrlab::problems
