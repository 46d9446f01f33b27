#ifndef VRLAB_DATA_HPP
#define VRLAB_DATA_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vrlab::problems {

// One data point. `features` is a row-major height x width x channels tensor.
// `target` is normally empty, in which case regression targets are derived
// from the class label; synthetic quadratic problems fill it explicitly.
struct Example {
  std::vector<double> features;
  std::array<std::size_t, 3> shape{0, 0, 0};  // {height, width, channels}
  int label = 0;
  std::vector<double> target;

  std::size_t feature_count() const { return shape[0] * shape[1] * shape[2]; }
};

struct Dataset {
  std::vector<Example> examples;
  std::array<std::size_t, 3> shape{0, 0, 0};
  std::size_t classes = 2;

  std::size_t size() const { return examples.size(); }
  std::size_t feature_count() const { return shape[0] * shape[1] * shape[2]; }
  void validate() const;
};

// Class-conditional Gaussian blob images: each class places a bump at its own
// location, with per-example jitter in position and amplitude plus pixel
// noise. Classes are balanced within +-1 and the example order is a seeded
// shuffle, so contiguous slices are class-mixed. Deterministic in `seed`;
// feature values are rounded to float precision so the binary file format
// round-trips exactly.
Dataset generate_synthetic_dataset(std::size_t n,
                                   std::array<std::size_t, 3> shape,
                                   std::size_t classes, std::uint64_t seed);

// Axis-aligned least-squares problem with an exactly known Hessian spectrum:
// examples are scaled basis vectors, so the Hessian of the mean squared
// residual is diagonal with eigenvalues spread geometrically from 1 down to
// 1/condition. Targets carry +-noise pairs per coordinate, which keeps the
// minimizer at exactly `optimum` while leaving per-example gradients nonzero
// there. dim must divide n and the per-coordinate count must be even.
struct QuadraticProblem {
  Dataset dataset;            // explicit-target examples, shape {1,1,dim}
  std::vector<double> optimum;
  double optimal_value = 0.0; // mean loss at the optimum (weight decay 0)
  double smoothness = 1.0;    // largest Hessian eigenvalue
};
QuadraticProblem make_quadratic_problem(std::size_t n, std::size_t dim,
                                        double condition, double noise,
                                        std::uint64_t seed);

// Flat binary dataset file: little-endian header
//   u32 magic 0x4C525644 ("DVRL"), u32 n, u32 height, u32 width,
//   u32 channels, u32 classes
// followed by n*h*w*c float32 features (example-major, row-major within an
// example) and n int32 labels. Explicit-target datasets are not
// representable and are rejected.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace vrlab::problems

#endif  // VRLAB_DATA_HPP
