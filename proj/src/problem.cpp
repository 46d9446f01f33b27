#include "vrlab/problem.hpp"

#include <utility>

#include "vrlab/errors.hpp"

namespace vrlab::problems {

GradResult minibatch_grad(const Model& model, const ParamVector& w,
                          const std::vector<SeededExample>& batch,
                          const TransformSpec& spec, BnMode mode,
                          const BnState& bn) {
  if (batch.empty()) throw InvalidArgument("minibatch_grad: empty batch");
  std::vector<Example> transformed;
  transformed.reserve(batch.size());
  for (const SeededExample& item : batch) {
    if (item.example == nullptr)
      throw InvalidArgument("minibatch_grad: null example");
    transformed.push_back(apply_transform(*item.example, spec, item.seed));
  }
  return batch_loss_grad(model, w, transformed, mode, bn);
}

ParamVector full_gradient(const Model& model, const ParamVector& w,
                          const Dataset& dataset, const SeedTable& seeds,
                          const TransformSpec& spec, std::size_t batch_size,
                          const BnState& bn) {
  const std::size_t n = dataset.size();
  if (n == 0) throw InvalidArgument("full_gradient: empty dataset");
  if (batch_size == 0) throw InvalidArgument("full_gradient: batch_size must be >= 1");

  ParamVector total(model.parameter_count(), 0.0);
  std::vector<SeededExample> batch;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(start + batch_size, n);
    batch.clear();
    for (std::size_t i = start; i < end; ++i)
      batch.push_back({&dataset.examples[i], seeds.seed_for(i)});
    const GradResult r = minibatch_grad(model, w, batch, spec, BnMode::kTrain, bn);
    axpy(static_cast<double>(end - start), r.grad, total);
  }
  for (double& x : total) x /= static_cast<double>(n);
  return total;
}

FiniteSumProblem::FiniteSumProblem(Dataset dataset, Model model,
                                   TransformSpec transform)
    : dataset_(std::move(dataset)),
      model_(std::move(model)),
      transform_(transform) {
  model_.validate();
  if (dataset_.examples.empty())
    throw InvalidArgument("problem: empty dataset");
  transform_.validate(dataset_.shape);
  const std::size_t raw = dataset_.feature_count();
  const std::size_t cropped =
      transform_.crop_size * transform_.crop_size * dataset_.shape[2];
  if (raw != model_.input_dim() || cropped != model_.input_dim())
    throw InvalidArgument("problem: model input does not match example shape");
  bn_ = BnState::initial(model_);
}

GradResult FiniteSumProblem::minibatch_grad(
    const ParamVector& w, const std::vector<std::size_t>& indices,
    const SeedTable& seeds, BnMode mode) const {
  return minibatch_grad(w, indices, seeds, mode, bn_);
}

GradResult FiniteSumProblem::minibatch_grad(
    const ParamVector& w, const std::vector<std::size_t>& indices,
    const SeedTable& seeds, BnMode mode, const BnState& bn) const {
  if (indices.empty()) throw InvalidArgument("minibatch_grad: empty batch");
  std::vector<SeededExample> batch;
  batch.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= dataset_.size())
      throw InvalidArgument("minibatch_grad: example index out of range");
    batch.push_back({&dataset_.examples[i], seeds.seed_for(i)});
  }
  return problems::minibatch_grad(model_, w, batch, transform_, mode, bn);
}

ParamVector FiniteSumProblem::full_gradient(const ParamVector& w,
                                            const SeedTable& seeds,
                                            std::size_t batch_size) const {
  return problems::full_gradient(model_, w, dataset_, seeds, transform_,
                              batch_size, bn_);
}

FiniteSumProblem::Evaluation FiniteSumProblem::evaluate(
    const ParamVector& w, const Dataset& data, std::size_t batch_size) const {
  const std::size_t n = data.size();
  if (n == 0) throw InvalidArgument("evaluate: empty dataset");
  if (batch_size == 0) throw InvalidArgument("evaluate: batch_size must be >= 1");

  Evaluation result;
  std::size_t wrong = 0;
  std::vector<Example> batch;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(start + batch_size, n);
    batch.assign(data.examples.begin() + static_cast<std::ptrdiff_t>(start),
                 data.examples.begin() + static_cast<std::ptrdiff_t>(end));
    result.loss += static_cast<double>(end - start) *
                   batch_loss(model_, w, batch, BnMode::kEval, bn_);
    const std::vector<int> predictions =
        batch_predictions(model_, w, batch, BnMode::kEval, bn_);
    for (std::size_t i = 0; i < batch.size(); ++i)
      if (predictions[i] != batch[i].label) ++wrong;
  }
  result.loss /= static_cast<double>(n);
  result.error = static_cast<double>(wrong) / static_cast<double>(n);
  return result;
}

FiniteSumProblem::Evaluation FiniteSumProblem::evaluate(
    const ParamVector& w, std::size_t batch_size) const {
  return evaluate(w, dataset_, batch_size);
}

}  // namespace vrlab::problems
