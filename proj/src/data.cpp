#include "vrlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "vrlab/errors.hpp"
#include "vrlab/rng.hpp"

namespace vrlab::problems {

void Dataset::validate() const {
  if (examples.empty()) throw InvalidArgument("dataset: must hold at least one example");
  if (classes < 2) throw InvalidArgument("dataset: needs at least two classes");
  for (const Example& ex : examples) {
    if (ex.shape != shape) throw InvalidArgument("dataset: example shape mismatch");
    if (ex.features.size() != ex.feature_count())
      throw InvalidArgument("dataset: feature length does not match shape");
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes)
      throw InvalidArgument("dataset: label out of range");
  }
}

namespace {

double to_float_precision(double x) {
  return static_cast<double>(static_cast<float>(x));
}

}  // namespace

Dataset generate_synthetic_dataset(std::size_t n,
                                   std::array<std::size_t, 3> shape,
                                   std::size_t classes, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("generate_synthetic_dataset: n must be >= 1");
  if (classes < 2) throw InvalidArgument("generate_synthetic_dataset: classes must be >= 2");
  const std::size_t h = shape[0], w = shape[1], c = shape[2];
  if (h == 0 || w == 0 || c == 0)
    throw InvalidArgument("generate_synthetic_dataset: zero-sized shape");

  Dataset data;
  data.shape = shape;
  data.classes = classes;
  data.examples.reserve(n);

  // Class labels balanced within +-1: the first n % classes classes get one
  // extra example. Assignment order is fixed, the final example order is a
  // seeded shuffle of it.
  std::vector<int> labels;
  labels.reserve(n);
  const std::size_t base = n / classes, extra = n % classes;
  for (std::size_t k = 0; k < classes; ++k) {
    const std::size_t count = base + (k < extra ? 1 : 0);
    labels.insert(labels.end(), count, static_cast<int>(k));
  }

  rng::Stream shuffle_stream(rng::split(seed, 0));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = shuffle_stream.next_below(i);
    std::swap(labels[i - 1], labels[j]);
  }

  rng::Stream pixel_stream(rng::split(seed, 1));
  const double sigma = 0.18 * static_cast<double>(std::min(h, w));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    // Blob row encodes the class; classes stack vertically so the signal
    // survives horizontal flips and small crops. Columns only jitter.
    const double spread = static_cast<double>(label) /
                          static_cast<double>(classes - 1);
    const double cr = (0.25 + 0.5 * spread) * static_cast<double>(h - 1) +
                      0.55 * pixel_stream.next_normal();
    const double cc = 0.5 * static_cast<double>(w - 1) +
                      0.55 * pixel_stream.next_normal();
    const double amplitude = 1.0 + 0.25 * pixel_stream.next_normal();

    Example ex;
    ex.shape = shape;
    ex.label = label;
    ex.features.resize(h * w * c);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        const double dr = static_cast<double>(r) - cr;
        const double dc = static_cast<double>(col) - cc;
        const double bump =
            amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double channel_gain =
              1.0 - 0.3 * static_cast<double>(ch) / static_cast<double>(c);
          const double noise = 0.12 * pixel_stream.next_normal();
          ex.features[(r * w + col) * c + ch] =
              to_float_precision(channel_gain * bump + noise);
        }
      }
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

QuadraticProblem make_quadratic_problem(std::size_t n, std::size_t dim,
                                        double condition, double noise,
                                        std::uint64_t seed) {
  if (n < 2 || dim < 1) throw InvalidArgument("make_quadratic_problem: need n >= 2, dim >= 1");
  if (n % dim != 0 || (n / dim) % 2 != 0)
    throw InvalidArgument("make_quadratic_problem: dim must divide n with an even quotient");
  if (condition < 1.0) throw InvalidArgument("make_quadratic_problem: condition must be >= 1");

  const std::size_t per_coord = n / dim;
  QuadraticProblem problem;
  // Lay the vector along the channel axis so a 1x1 crop keeps every entry
  // and TransformSpec::identity applies for any dim.
  problem.dataset.shape = {1, 1, dim};
  problem.dataset.classes = 2;
  problem.smoothness = 1.0;

  rng::Stream stream(rng::split(seed, 2));
  problem.optimum.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) problem.optimum[j] = stream.next_normal();

  // Eigenvalue j of the mean-loss Hessian is condition^(-j/(dim-1)), running
  // from 1 down to 1/condition. Example scale s_j makes (per_coord/n)*s_j^2
  // equal that eigenvalue exactly up to rounding.
  double noise_sq_sum = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double eigenvalue =
        dim == 1 ? 1.0
                 : std::pow(condition, -static_cast<double>(j) /
                                           static_cast<double>(dim - 1));
    const double scale =
        std::sqrt(eigenvalue * static_cast<double>(dim));  // n/per_coord = dim
    for (std::size_t k = 0; k < per_coord; ++k) {
      Example ex;
      ex.shape = problem.dataset.shape;
      ex.label = static_cast<int>(k % 2);
      ex.features.assign(dim, 0.0);
      ex.features[j] = scale;
      const double eps = (k % 2 == 0 ? noise : -noise);
      ex.target.assign(1, scale * problem.optimum[j] + eps);
      noise_sq_sum += eps * eps;
      problem.dataset.examples.push_back(std::move(ex));
    }
  }
  problem.optimal_value = 0.5 * noise_sq_sum / static_cast<double>(n);

  // Interleave coordinates so contiguous minibatches touch all of them.
  std::vector<Example> interleaved;
  interleaved.reserve(n);
  for (std::size_t k = 0; k < per_coord; ++k)
    for (std::size_t j = 0; j < dim; ++j)
      interleaved.push_back(std::move(problem.dataset.examples[j * per_coord + k]));
  problem.dataset.examples = std::move(interleaved);
  return problem;
}

namespace {

constexpr std::uint32_t kDatasetMagic = 0x4C525644u;  // "DVRL"

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

void write_f32_le(std::ofstream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(out, bits);
}

float read_f32_le(std::ifstream& in) {
  const std::uint32_t bits = read_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
  data.validate();
  for (const Example& ex : data.examples)
    if (!ex.target.empty())
      throw InvalidArgument("save_dataset: explicit-target datasets are not representable");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_dataset: cannot open " + path);
  write_u32(out, kDatasetMagic);
  write_u32(out, static_cast<std::uint32_t>(data.size()));
  write_u32(out, static_cast<std::uint32_t>(data.shape[0]));
  write_u32(out, static_cast<std::uint32_t>(data.shape[1]));
  write_u32(out, static_cast<std::uint32_t>(data.shape[2]));
  write_u32(out, static_cast<std::uint32_t>(data.classes));
  for (const Example& ex : data.examples)
    for (double f : ex.features) write_f32_le(out, static_cast<float>(f));
  for (const Example& ex : data.examples)
    write_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(ex.label)));
  if (!out) throw IoError("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_dataset: cannot open " + path);
  if (read_u32(in) != kDatasetMagic) throw IoError("load_dataset: bad magic in " + path);
  const std::uint32_t n = read_u32(in);
  Dataset data;
  data.shape = {read_u32(in), read_u32(in), read_u32(in)};
  data.classes = read_u32(in);
  const std::size_t per_example = data.feature_count();
  data.examples.resize(n);
  for (Example& ex : data.examples) {
    ex.shape = data.shape;
    ex.features.resize(per_example);
    for (double& f : ex.features) f = static_cast<double>(read_f32_le(in));
  }
  for (Example& ex : data.examples)
    ex.label = static_cast<std::int32_t>(read_u32(in));
  if (!in) throw IoError("load_dataset: truncated file " + path);
  data.validate();
  return data;
}

}  // namespace vrlab::problems
