#include "vrlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vrlab/errors.hpp"
#include "vrlab/rng.hpp"

namespace vrlab::problems {

std::size_t Model::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
    count += in * out;
    if (bias) count += out;
    if (batch_norm && l + 2 < layer_sizes.size()) count += 2 * out;  // gamma, beta
  }
  return count;
}

std::size_t Model::bn_feature_count() const {
  if (!batch_norm) return 0;
  std::size_t count = 0;
  for (std::size_t l = 1; l + 1 < layer_sizes.size(); ++l) count += layer_sizes[l];
  return count;
}

void Model::validate() const {
  if (layer_sizes.size() < 2)
    throw InvalidArgument("model: layer_sizes needs at least input and output");
  for (std::size_t d : layer_sizes)
    if (d == 0) throw InvalidArgument("model: zero-width layer");
  if (weight_decay < 0.0) throw InvalidArgument("model: weight_decay must be >= 0");
  switch (architecture) {
    case Architecture::kLeastSquares:
    case Architecture::kLogistic:
      if (layer_count() != 1)
        throw InvalidArgument("model: linear architectures take exactly one layer");
      if (batch_norm)
        throw InvalidArgument("model: batch norm requires a hidden layer");
      break;
    case Architecture::kMlp:
      if (layer_count() < 2)
        throw InvalidArgument("model: mlp needs at least one hidden layer");
      if (output_dim() < 2)
        throw InvalidArgument("model: mlp output layer needs >= 2 classes");
      break;
  }
}

BnState BnState::initial(const Model& model) {
  BnState state;
  state.running_mean.assign(model.bn_feature_count(), 0.0);
  state.running_var.assign(model.bn_feature_count(), 1.0);
  return state;
}

void BnState::apply_update(const BnStats& batch_stats) {
  if (batch_stats.mean.size() != running_mean.size() ||
      batch_stats.var.size() != running_var.size())
    throw InvalidArgument("bn: statistics size mismatch");
  for (std::size_t i = 0; i < running_mean.size(); ++i)
    running_mean[i] = 0.9 * running_mean[i] + 0.1 * batch_stats.mean[i];
  for (std::size_t i = 0; i < running_var.size(); ++i)
    running_var[i] = 0.9 * running_var[i] + 0.1 * batch_stats.var[i];
}

void BnState::validate() const {
  for (double v : running_var)
    if (!(v >= 0.0)) throw InvalidArgument("bn: running variance must be >= 0");
}

namespace {

double activate(Activation act, double y) {
  if (act == Activation::kRelu) return y > 0.0 ? y : 0.0;
  return y > 0.0 ? y : std::expm1(y);  // ELU, alpha = 1
}

double activate_deriv(Activation act, double y) {
  if (act == Activation::kRelu) return y > 0.0 ? 1.0 : 0.0;
  return y > 0.0 ? 1.0 : std::exp(y);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Parameter slice offsets for one linear layer and its optional BN pair.
struct LayerOffsets {
  std::size_t weights = 0;
  std::size_t biases = 0;
  std::size_t gamma = 0;
  std::size_t beta = 0;
  bool has_bn = false;
};

std::vector<LayerOffsets> layer_offsets(const Model& model) {
  std::vector<LayerOffsets> offsets(model.layer_count());
  std::size_t pos = 0;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const std::size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
    offsets[l].weights = pos;
    pos += in * out;
    if (model.bias) {
      offsets[l].biases = pos;
      pos += out;
    }
    if (model.batch_norm && l + 1 < model.layer_count()) {
      offsets[l].has_bn = true;
      offsets[l].gamma = pos;
      pos += out;
      offsets[l].beta = pos;
      pos += out;
    }
  }
  return offsets;
}

// Everything the backward pass needs from one hidden layer's normalization.
struct BnCache {
  std::vector<double> mean, var, inv_std;  // per feature
  std::vector<double> xhat;                // B x out
  bool train = false;
};

struct ForwardState {
  std::size_t batch_size = 0;
  std::vector<std::vector<double>> activations;  // [l]: B x d_l, l = 0..L
  std::vector<std::vector<double>> pre_bn;       // [l]: B x d_{l+1}, hidden only
  std::vector<std::vector<double>> pre_act;      // [l]: BN output (or pre_bn)
  std::vector<BnCache> bn_caches;                // hidden layers with BN
  std::vector<double> logits;                    // B x out
};

void check_inputs(const Model& model, const ParamVector& w,
                  const std::vector<Example>& batch, const BnState& bn) {
  model.validate();
  if (w.size() != model.parameter_count())
    throw InvalidArgument("oracle: parameter vector length mismatch");
  if (batch.empty()) throw InvalidArgument("oracle: empty batch");
  for (const Example& ex : batch)
    if (ex.features.size() != model.input_dim())
      throw InvalidArgument("oracle: example feature length does not match model input");
  if (bn.running_mean.size() != model.bn_feature_count() ||
      bn.running_var.size() != model.bn_feature_count())
    throw InvalidArgument("oracle: BN state size mismatch");
  if (!all_finite(w)) throw NumericError("oracle: non-finite parameters");
}

ForwardState forward(const Model& model, const ParamVector& w,
                     const std::vector<Example>& batch, BnMode mode,
                     const BnState& bn, const std::vector<LayerOffsets>& off) {
  const std::size_t batch_n = batch.size();
  const std::size_t layers = model.layer_count();
  ForwardState fs;
  fs.batch_size = batch_n;
  fs.activations.resize(layers + 1);
  fs.pre_bn.resize(layers);
  fs.pre_act.resize(layers);
  fs.bn_caches.resize(layers);

  fs.activations[0].resize(batch_n * model.input_dim());
  for (std::size_t i = 0; i < batch_n; ++i)
    std::copy(batch[i].features.begin(), batch[i].features.end(),
              fs.activations[0].begin() + i * model.input_dim());

  std::size_t bn_offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
    const std::vector<double>& a = fs.activations[l];
    std::vector<double>& z = fs.pre_bn[l];
    z.assign(batch_n * out, 0.0);
    for (std::size_t i = 0; i < batch_n; ++i) {
      const double* arow = a.data() + i * in;
      double* zrow = z.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wrow = w.data() + off[l].weights + o * in;
        double s = model.bias ? w[off[l].biases + o] : 0.0;
        for (std::size_t j = 0; j < in; ++j) s += wrow[j] * arow[j];
        zrow[o] = s;
      }
    }

    const bool hidden = l + 1 < layers;
    if (!hidden) {
      fs.logits = z;
      break;
    }

    std::vector<double>& y = fs.pre_act[l];
    if (off[l].has_bn) {
      BnCache& cache = fs.bn_caches[l];
      cache.train = (mode == BnMode::kTrain);
      cache.mean.resize(out);
      cache.var.resize(out);
      cache.inv_std.resize(out);
      if (cache.train) {
        for (std::size_t o = 0; o < out; ++o) {
          double m = 0.0;
          for (std::size_t i = 0; i < batch_n; ++i) m += z[i * out + o];
          m /= static_cast<double>(batch_n);
          double v = 0.0;
          for (std::size_t i = 0; i < batch_n; ++i) {
            const double d = z[i * out + o] - m;
            v += d * d;
          }
          v /= static_cast<double>(batch_n);  // biased (population) variance
          cache.mean[o] = m;
          cache.var[o] = v;
        }
      } else {
        for (std::size_t o = 0; o < out; ++o) {
          cache.mean[o] = bn.running_mean[bn_offset + o];
          cache.var[o] = bn.running_var[bn_offset + o];
        }
      }
      for (std::size_t o = 0; o < out; ++o)
        cache.inv_std[o] = 1.0 / std::sqrt(cache.var[o] + bn.epsilon);

      cache.xhat.resize(batch_n * out);
      y.resize(batch_n * out);
      const double* gamma = w.data() + off[l].gamma;
      const double* beta = w.data() + off[l].beta;
      for (std::size_t i = 0; i < batch_n; ++i) {
        for (std::size_t o = 0; o < out; ++o) {
          const double xh =
              (z[i * out + o] - cache.mean[o]) * cache.inv_std[o];
          cache.xhat[i * out + o] = xh;
          y[i * out + o] = gamma[o] * xh + beta[o];
        }
      }
      bn_offset += out;
    } else {
      y = z;
    }

    std::vector<double>& a_next = fs.activations[l + 1];
    a_next.resize(batch_n * out);
    for (std::size_t i = 0; i < batch_n * out; ++i)
      a_next[i] = activate(model.activation, y[i]);
  }
  return fs;
}

// Regression target for the least-squares head.
std::vector<double> ls_target(const Model& model, const Example& ex) {
  const std::size_t out = model.output_dim();
  if (!ex.target.empty()) {
    if (ex.target.size() != out)
      throw InvalidArgument("oracle: explicit target length does not match output");
    return ex.target;
  }
  std::vector<double> t(out, 0.0);
  if (out == 1) {
    t[0] = ex.label > 0 ? 1.0 : -1.0;  // sign coding for two classes
  } else {
    if (static_cast<std::size_t>(ex.label) >= out)
      throw InvalidArgument("oracle: label outside one-hot range");
    t[static_cast<std::size_t>(ex.label)] = 1.0;
  }
  return t;
}

// Fills d_logits with d(mean loss)/d(logits) and returns the mean loss.
double loss_head(const Model& model, const std::vector<Example>& batch,
                 const std::vector<double>& logits,
                 std::vector<double>* d_logits) {
  const std::size_t batch_n = batch.size();
  const std::size_t out = model.output_dim();
  const double inv_n = 1.0 / static_cast<double>(batch_n);
  if (d_logits) d_logits->assign(batch_n * out, 0.0);
  double loss = 0.0;

  const bool binary_logistic =
      model.architecture == Architecture::kLogistic && out == 1;
  for (std::size_t i = 0; i < batch_n; ++i) {
    const double* zrow = logits.data() + i * out;
    if (model.architecture == Architecture::kLeastSquares) {
      const std::vector<double> t = ls_target(model, batch[i]);
      for (std::size_t o = 0; o < out; ++o) {
        const double r = zrow[o] - t[o];
        loss += 0.5 * r * r * inv_n;
        if (d_logits) (*d_logits)[i * out + o] = r * inv_n;
      }
    } else if (binary_logistic) {
      const double z = zrow[0];
      const double y = batch[i].label > 0 ? 1.0 : 0.0;
      // log(1 + e^z) - y z, computed stably
      loss += (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z) * inv_n;
      if (d_logits) (*d_logits)[i * out] = (sigmoid(z) - y) * inv_n;
    } else {
      double zmax = zrow[0];
      for (std::size_t o = 1; o < out; ++o) zmax = std::max(zmax, zrow[o]);
      double sum = 0.0;
      for (std::size_t o = 0; o < out; ++o) sum += std::exp(zrow[o] - zmax);
      const double lse = zmax + std::log(sum);
      const std::size_t y = static_cast<std::size_t>(batch[i].label);
      if (y >= out) throw InvalidArgument("oracle: label outside logit range");
      loss += (lse - zrow[y]) * inv_n;
      if (d_logits) {
        for (std::size_t o = 0; o < out; ++o) {
          double p = std::exp(zrow[o] - lse);
          if (o == y) p -= 1.0;
          (*d_logits)[i * out + o] = p * inv_n;
        }
      }
    }
  }
  return loss;
}

}  // namespace

GradResult batch_loss_grad(const Model& model, const ParamVector& w,
                           const std::vector<Example>& batch, BnMode mode,
                           const BnState& bn) {
  check_inputs(model, w, batch, bn);
  const std::vector<LayerOffsets> off = layer_offsets(model);
  ForwardState fs = forward(model, w, batch, mode, bn, off);

  GradResult result;
  result.grad.assign(w.size(), 0.0);
  std::vector<double> delta;  // d(loss)/d(pre-bn input) of the current layer
  result.loss = loss_head(model, batch, fs.logits, &delta);

  const std::size_t batch_n = batch.size();
  const std::size_t layers = model.layer_count();
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
    const std::vector<double>& a = fs.activations[l];
    for (std::size_t i = 0; i < batch_n; ++i) {
      const double* drow = delta.data() + i * out;
      const double* arow = a.data() + i * in;
      for (std::size_t o = 0; o < out; ++o) {
        double* gw = result.grad.data() + off[l].weights + o * in;
        const double d = drow[o];
        for (std::size_t j = 0; j < in; ++j) gw[j] += d * arow[j];
        if (model.bias) result.grad[off[l].biases + o] += d;
      }
    }
    if (l == 0) break;

    // Gradient w.r.t. the previous layer's activation.
    std::vector<double> d_act(batch_n * in, 0.0);
    for (std::size_t i = 0; i < batch_n; ++i) {
      const double* drow = delta.data() + i * out;
      double* target = d_act.data() + i * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wrow = w.data() + off[l].weights + o * in;
        const double d = drow[o];
        for (std::size_t j = 0; j < in; ++j) target[j] += d * wrow[j];
      }
    }

    // Through the activation of hidden layer l-1.
    const std::vector<double>& y = fs.pre_act[l - 1];
    for (std::size_t i = 0; i < batch_n * in; ++i)
      d_act[i] *= activate_deriv(model.activation, y[i]);

    if (off[l - 1].has_bn) {
      const BnCache& cache = fs.bn_caches[l - 1];
      const std::vector<double>& z = fs.pre_bn[l - 1];
      const double* gamma = w.data() + off[l - 1].gamma;
      std::vector<double> d_z(batch_n * in, 0.0);
      const double inv_b = 1.0 / static_cast<double>(batch_n);
      for (std::size_t o = 0; o < in; ++o) {
        double g_gamma = 0.0, g_beta = 0.0;
        for (std::size_t i = 0; i < batch_n; ++i) {
          g_gamma += d_act[i * in + o] * cache.xhat[i * in + o];
          g_beta += d_act[i * in + o];
        }
        result.grad[off[l - 1].gamma + o] += g_gamma;
        result.grad[off[l - 1].beta + o] += g_beta;

        if (cache.train) {
          // Full train-mode backward: the batch statistics depend on z.
          const double inv_std = cache.inv_std[o];
          double d_var = 0.0, d_mean_direct = 0.0, sum_centered = 0.0;
          for (std::size_t i = 0; i < batch_n; ++i) {
            const double dxh = d_act[i * in + o] * gamma[o];
            const double centered = z[i * in + o] - cache.mean[o];
            d_var += dxh * centered;
            d_mean_direct += dxh;
            sum_centered += centered;
          }
          d_var *= -0.5 * inv_std * inv_std * inv_std;
          const double d_mean = -d_mean_direct * inv_std +
                                d_var * (-2.0 * inv_b) * sum_centered;
          for (std::size_t i = 0; i < batch_n; ++i) {
            const double dxh = d_act[i * in + o] * gamma[o];
            const double centered = z[i * in + o] - cache.mean[o];
            d_z[i * in + o] = dxh * inv_std + d_var * 2.0 * centered * inv_b +
                              d_mean * inv_b;
          }
        } else {
          const double scale = gamma[o] * cache.inv_std[o];
          for (std::size_t i = 0; i < batch_n; ++i)
            d_z[i * in + o] = d_act[i * in + o] * scale;
        }
      }
      delta = std::move(d_z);
    } else {
      delta = std::move(d_act);
    }
  }

  // Weight decay folded into the per-example loss.
  if (model.weight_decay != 0.0) {
    result.loss += 0.5 * model.weight_decay * squared_norm(w);
    axpy(model.weight_decay, w, result.grad);
  }

  // Report the normalization statistics this evaluation used.
  if (model.batch_norm) {
    result.bn_stats.mean.reserve(model.bn_feature_count());
    result.bn_stats.var.reserve(model.bn_feature_count());
    for (std::size_t l = 0; l + 1 < layers; ++l) {
      const BnCache& cache = fs.bn_caches[l];
      result.bn_stats.mean.insert(result.bn_stats.mean.end(), cache.mean.begin(),
                                  cache.mean.end());
      result.bn_stats.var.insert(result.bn_stats.var.end(), cache.var.begin(),
                                 cache.var.end());
    }
  }

  if (!std::isfinite(result.loss) || !all_finite(result.grad))
    throw NumericError("oracle: non-finite loss or gradient");
  return result;
}

double batch_loss(const Model& model, const ParamVector& w,
                  const std::vector<Example>& batch, BnMode mode,
                  const BnState& bn) {
  check_inputs(model, w, batch, bn);
  const std::vector<LayerOffsets> off = layer_offsets(model);
  ForwardState fs = forward(model, w, batch, mode, bn, off);
  double loss = loss_head(model, batch, fs.logits, nullptr);
  if (model.weight_decay != 0.0)
    loss += 0.5 * model.weight_decay * squared_norm(w);
  if (!std::isfinite(loss)) throw NumericError("oracle: non-finite loss");
  return loss;
}

std::vector<int> batch_predictions(const Model& model, const ParamVector& w,
                                   const std::vector<Example>& batch,
                                   BnMode mode, const BnState& bn) {
  check_inputs(model, w, batch, bn);
  const std::vector<LayerOffsets> off = layer_offsets(model);
  ForwardState fs = forward(model, w, batch, mode, bn, off);
  const std::size_t out = model.output_dim();
  std::vector<int> predictions(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double* zrow = fs.logits.data() + i * out;
    if (out == 1) {
      predictions[i] = zrow[0] >= 0.0 ? 1 : 0;
    } else {
      std::size_t best = 0;
      for (std::size_t o = 1; o < out; ++o)
        if (zrow[o] > zrow[best]) best = o;
      predictions[i] = static_cast<int>(best);
    }
  }
  return predictions;
}

ParamVector initial_params(const Model& model, std::uint64_t seed) {
  model.validate();
  ParamVector w(model.parameter_count(), 0.0);
  const std::vector<LayerOffsets> off = layer_offsets(model);
  rng::Stream stream(rng::split(seed, 3));
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const std::size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
    const double gain = model.architecture == Architecture::kMlp ? 2.0 : 1.0;
    const double scale = std::sqrt(gain / static_cast<double>(in));
    for (std::size_t i = 0; i < in * out; ++i)
      w[off[l].weights + i] = scale * stream.next_normal();
    if (off[l].has_bn)
      for (std::size_t o = 0; o < out; ++o) w[off[l].gamma + o] = 1.0;
  }
  return w;
}

}  // namespace vrlab::problems
