#include "vrlab/transform.hpp"

#include <algorithm>

#include "vrlab/errors.hpp"
#include "vrlab/rng.hpp"

namespace vrlab::problems {

TransformSpec TransformSpec::identity(std::array<std::size_t, 3> shape) {
  TransformSpec spec;
  spec.flip_probability = 0.0;
  spec.pad = 0;
  spec.crop_size = std::min(shape[0], shape[1]);
  return spec;
}

bool TransformSpec::is_identity_for(std::array<std::size_t, 3> shape) const {
  return flip_probability == 0.0 && pad == 0 && crop_size == shape[0] &&
         crop_size == shape[1];
}

void TransformSpec::validate(std::array<std::size_t, 3> shape) const {
  if (flip_probability < 0.0 || flip_probability > 1.0)
    throw InvalidArgument("transform: flip_probability must lie in [0,1]");
  if (crop_size == 0) throw InvalidArgument("transform: crop_size must be positive");
  if (crop_size > shape[0] + 2 * pad || crop_size > shape[1] + 2 * pad)
    throw InvalidArgument("transform: crop larger than padded image");
}

std::uint64_t SeedTable::seed_for(std::size_t index) const {
  if (index >= per_example_seeds.size())
    throw LockingViolation("seed table holds no locked seed for example " +
                           std::to_string(index));
  return per_example_seeds[index];
}

SeedTable build_seed_table(std::uint64_t epoch_master_seed, std::size_t n) {
  if (n == 0) throw InvalidArgument("build_seed_table: n must be >= 1");
  SeedTable table;
  table.epoch_master_seed = epoch_master_seed;
  table.per_example_seeds.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    table.per_example_seeds[i] = rng::split(epoch_master_seed, i);
  return table;
}

Example apply_transform(const Example& ex, const TransformSpec& spec,
                        std::uint64_t seed) {
  spec.validate(ex.shape);
  const std::size_t h = ex.shape[0], w = ex.shape[1], c = ex.shape[2];

  rng::Stream stream(seed);
  const bool flip = stream.next_unit() < spec.flip_probability;
  const std::size_t row_range = h + 2 * spec.pad - spec.crop_size + 1;
  const std::size_t col_range = w + 2 * spec.pad - spec.crop_size + 1;
  const std::size_t row_off = stream.next_below(row_range);
  const std::size_t col_off = stream.next_below(col_range);

  Example out;
  out.shape = {spec.crop_size, spec.crop_size, c};
  out.label = ex.label;
  out.target = ex.target;
  out.features.assign(spec.crop_size * spec.crop_size * c, 0.0);

  // Flip first, then crop from the zero-padded image. Work directly from the
  // source: padded coordinate (r,col) maps back to source (r - pad, col - pad)
  // after undoing the flip.
  for (std::size_t r = 0; r < spec.crop_size; ++r) {
    const std::size_t pr = r + row_off;
    if (pr < spec.pad || pr >= spec.pad + h) continue;  // zero padding row
    const std::size_t sr = pr - spec.pad;
    for (std::size_t col = 0; col < spec.crop_size; ++col) {
      const std::size_t pc = col + col_off;
      if (pc < spec.pad || pc >= spec.pad + w) continue;
      std::size_t sc = pc - spec.pad;
      if (flip) sc = w - 1 - sc;
      for (std::size_t ch = 0; ch < c; ++ch)
        out.features[(r * spec.crop_size + col) * c + ch] =
            ex.features[(sr * w + sc) * c + ch];
    }
  }
  return out;
}

}  // namespace vrlab::problems
