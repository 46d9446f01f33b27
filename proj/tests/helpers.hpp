#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vrlab/data.hpp"
#include "vrlab/model.hpp"
#include "vrlab/problem.hpp"
#include "vrlab/rng.hpp"
#include "vrlab/transform.hpp"
#include "vrlab/vec.hpp"

namespace vrlab::testing {

using problems::Architecture;
using problems::BnMode;
using problems::BnState;
using problems::Dataset;
using problems::Example;
using problems::Model;

// Central finite differences of the batch loss. h = 1e-5 balances truncation
// against rounding error for doubles.
inline ParamVector fd_gradient(const Model& model, const ParamVector& w,
                               const std::vector<Example>& batch, BnMode mode,
                               const BnState& bn, double h = 1e-5) {
  ParamVector grad(w.size());
  ParamVector probe = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = problems::batch_loss(model, probe, batch, mode, bn);
    probe[i] = w[i] - h;
    const double down = problems::batch_loss(model, probe, batch, mode, bn);
    probe[i] = w[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double vec_rel_error(const ParamVector& a, const ParamVector& b) {
  const double scale = std::max({norm(a), norm(b), 1e-12});
  return distance(a, b) / scale;
}

// Scalar least-squares examples: feature 1, explicit target t_i, so
// f_i(w) = (w - t_i)^2 / 2 and the mean loss is a quadratic in one variable.
inline Dataset scalar_dataset(const std::vector<double>& targets) {
  Dataset data;
  data.shape = {1, 1, 1};
  data.classes = 2;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Example ex;
    ex.shape = data.shape;
    ex.label = static_cast<int>(i % 2);
    ex.features = {1.0};
    ex.target = {targets[i]};
    data.examples.push_back(std::move(ex));
  }
  return data;
}

inline Model scalar_model() {
  Model m;
  m.architecture = Architecture::kLeastSquares;
  m.batch_norm = false;
  m.bias = false;
  m.layer_sizes = {1, 1};
  m.weight_decay = 0.0;
  return m;
}

inline problems::FiniteSumProblem scalar_problem(
    const std::vector<double>& targets) {
  Dataset data = scalar_dataset(targets);
  return problems::FiniteSumProblem(
      data, scalar_model(), problems::TransformSpec::identity(data.shape));
}

// Small image classification setup used by the end-to-end tests.
inline Model small_mlp(std::size_t input_dim, bool batch_norm,
                       std::size_t classes = 2) {
  Model m;
  m.architecture = Architecture::kMlp;
  m.activation = problems::Activation::kRelu;
  m.batch_norm = batch_norm;
  m.bias = true;
  m.layer_sizes = {input_dim, 12, 8, classes};
  m.weight_decay = 0.0001;
  return m;
}

inline problems::FiniteSumProblem small_image_problem(std::size_t n,
                                                      bool batch_norm,
                                                      bool augment,
                                                      std::uint64_t seed) {
  const std::array<std::size_t, 3> shape{6, 6, 1};
  Dataset data = problems::generate_synthetic_dataset(n, shape, 2, seed);
  problems::TransformSpec spec = problems::TransformSpec::identity(shape);
  if (augment) {
    spec.flip_probability = 0.5;
    spec.pad = 1;
    spec.crop_size = 6;
  }
  return problems::FiniteSumProblem(std::move(data), small_mlp(36, batch_norm),
                                    spec);
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace vrlab::testing
