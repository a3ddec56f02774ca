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

#include <vector>

#include "fcdiff/denoiser.hpp"
#include "fcdiff/grid.hpp"
#include "fcdiff/rng.hpp"
#include "fcdiff/schedule.hpp"

namespace fcdiff {

/// Per-pixel conditioning strength in [0, 1]. A single-channel map
/// broadcasts across the channels of the image it conditions.
class WeightMap {
 public:
  /// Throws ValidationError if any entry lies outside [0, 1].
  explicit WeightMap(Grid grid);
  static WeightMap uniform(const Shape& image_shape, double m);

  const Grid& grid() const { return grid_; }

  /// Weight applied to flat index `i` of an image with `channels` channels.
  double at(std::size_t i, std::size_t channels) const {
    return grid_.channels() == 1 ? grid_[i / channels] : grid_[i];
  }

  /// Throws ShapeError unless this map can condition `image`.
  void require_compatible(const Shape& image) const;

 private:
  Grid grid_;
};

struct FuzzySamplerConfig {
  int J = 5;  ///< harmonization repeats per step; 1 disables resampling
  bool record_trajectory = false;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, 0 <= t <= T.
/// t = 0 returns x0 unchanged without consuming randomness.
Grid forward_sample(const Grid& x0, int t, const NoiseSchedule& s, RngStream& rng);
Grid forward_sample_with_noise(const Grid& x0, int t, const NoiseSchedule& s, const Grid& eps);

/// Mean of the reverse kernel at step t (the noise-free part of reverse_step).
Grid reverse_mean(const EpsilonModel& model, const Grid& x_t, int t, const NoiseSchedule& s);

/// One ancestral step x_t -> x_{t-1}:
///   (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t) + sqrt(beta_tilde_t) z,
/// with z = 0 at t = 1.
Grid reverse_step(const EpsilonModel& model, const Grid& x_t, int t, const NoiseSchedule& s,
                  RngStream& rng);

/// Iterates reverse_step from x_T ~ N(0, I) down to x_0.
Grid ancestral_sample(const EpsilonModel& model, const NoiseSchedule& s, RngStream& rng);

/// `count` samples; sample i uses rng.child(i), so the result does not depend
/// on `workers`.
std::vector<Grid> ancestral_batch(const EpsilonModel& model, const NoiseSchedule& s,
                                  std::size_t count, const RngStream& rng, int workers = 1);

/// Blends the synthetic step-(t-1) image with the re-noised conditioning
/// image and restores the per-pixel variance:
///   x_m = c x + (m x_r + (1 - m) x_s - c x) / sqrt(1 - 2m + 2m^2),
/// with c = sqrt(alpha_bar_{t-1}). Pixels with m == 0 (m == 1) return x_s
/// (x_r) bit-exactly.
Grid fuzzy_fuse(const Grid& x_synth, const Grid& x_reproj, const Grid& x_cond, const WeightMap& m,
                int t, const NoiseSchedule& s);

/// One forward Markov step x_{t-1} -> x_t: sqrt(1 - beta_t) x + sqrt(beta_t) z.
Grid renoise(const Grid& x, int t, const NoiseSchedule& s, RngStream& rng);

/// Fuzzy-conditioned sampling with harmonization resampling.
///
/// For t = T..1 and j = 1..J: re-noise x_cond to t-1, take one reverse step
/// from the current x_t, fuse the two under m, and when j < J and t > 1
/// forward the fused image back to step t before repeating. The final fused
/// image of the inner loop becomes the state at t-1. With m == 1 everywhere
/// the output equals x_cond exactly.
///
/// When cfg.record_trajectory is set and `trajectory` is non-null, the state
/// after every outer step (x_{T}, x_{T-1}, ..., x_0) is appended to it.
Grid fuzzy_sample(const EpsilonModel& model, const NoiseSchedule& s, const Grid& x_cond,
                  const WeightMap& m, const FuzzySamplerConfig& cfg, RngStream& rng,
                  std::vector<Grid>* trajectory = nullptr);

std::vector<Grid> fuzzy_batch(const EpsilonModel& model, const NoiseSchedule& s,
                              const Grid& x_cond, const WeightMap& m,
                              const FuzzySamplerConfig& cfg, std::size_t count,
                              const RngStream& rng, int workers = 1);

}  // namespace fcdiff
