#ifndef VRLAB_TRANSFORM_HPP
#define VRLAB_TRANSFORM_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vrlab/data.hpp"

namespace vrlab::problems {

// Flip + pad + random-crop augmentation recipe. The default mirrors the
// usual pad-4 / crop-32 setup proportionally at 8x8 scale.
struct TransformSpec {
  double flip_probability = 0.5;
  std::size_t pad = 1;        // zero padding, pixels per side
  std::size_t crop_size = 8;  // square output height/width

  // Spec that leaves examples of the given shape untouched.
  static TransformSpec identity(std::array<std::size_t, 3> shape);
  bool is_identity_for(std::array<std::size_t, 3> shape) const;
  void validate(std::array<std::size_t, 3> shape) const;
};

// Locked per-example transform seeds for one snapshot/epoch. Entry i is a
// pure function of (epoch_master_seed, i), independent of n.
struct SeedTable {
  std::uint64_t epoch_master_seed = 0;
  std::vector<std::uint64_t> per_example_seeds;

  std::size_t size() const { return per_example_seeds.size(); }
  std::uint64_t seed_for(std::size_t index) const;  // LockingViolation past end
};

SeedTable build_seed_table(std::uint64_t epoch_master_seed, std::size_t n);

// Deterministic draw order: flip decision, then row offset, then column
// offset, all from a Stream keyed by `seed`. Pure in (ex, spec, seed).
Example apply_transform(const Example& ex, const TransformSpec& spec,
                        std::uint64_t seed);

}  // namespace vrlab::problems

#endif  // VRLAB_TRANSFORM_HPP
