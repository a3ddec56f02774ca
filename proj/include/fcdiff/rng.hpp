/*
Copyright 2026 The fcdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <array>
#include <cstdint>

#include "fcdiff/grid.hpp"

namespace fcdiff {

/// Philox4x32-10 block function (Salmon et al., SC'11) with the Random123
/// multiplier and Weyl constants. Pure: the same (counter, key) always maps
/// to the same four output words.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to derive child stream keys.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based random stream.
///
/// The 64-bit seed is the Philox key; the 128-bit counter is
/// (block index, stream_id). Identical (seed, stream_id) and call sequence
/// give bit-identical output on every platform. Distinct stream_ids index
/// disjoint counter ranges of the same keyed permutation.
///
/// Uniform doubles take 53 bits from two consecutive 32-bit words. Standard
/// normals use the Marsaglia polar method: pairs of uniforms on (-1, 1) are
/// rejected outside the unit disc, each accepted pair yields two normals and
/// the second is cached for the next call.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [lo, hi] inclusive (rejection sampling, unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();

  /// Independent substream for parallel task `index`. Depends on this
  /// stream's seed, id and current position, but does not advance it.
  RngStream child(std::uint64_t index) const;

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  unsigned buffer_pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Grid of i.i.d. standard normals drawn in flat index order.
Grid randn_grid(const Shape& shape, RngStream& rng);

}  // namespace fcdiff
