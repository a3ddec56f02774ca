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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcdiff/denoiser.hpp"
#include "fcdiff/grid.hpp"
#include "fcdiff/rng.hpp"
#include "fcdiff/sampler.hpp"
#include "fcdiff/schedule.hpp"

namespace fcdiff {

inline constexpr double kAttentionMin = 1.0;
inline constexpr double kAttentionMax = 6.0;
inline constexpr double kSigmaFloorFactor = 1e-6;

/// Default projection depths as fractions of T (300..600 at T = 1000).
inline const std::vector<double> kDefaultDepthFractions = {0.3, 0.4, 0.5, 0.6};

/// Pixel-wise mean and floored standard deviation of reconstruction
/// discrepancies of in-distribution data, one pair of grids per depth.
struct ValidationStats {
  std::vector<int> depths;
  std::vector<Grid> mu;
  std::vector<Grid> sigma;
  std::size_t v_count = 0;
  int reps = 1;
  double sigma_floor = 0.0;
  std::string model_fingerprint;
  std::string schedule_fingerprint;

  /// Index of depth t, or throws ValidationError.
  std::size_t depth_index(int t) const;
};

/// Single-channel map with entries in [1, 6].
class AttentionMap {
 public:
  explicit AttentionMap(Grid grid);
  const Grid& grid() const { return grid_; }

 private:
  Grid grid_;
};

/// Forward-diffuses x to depth t and runs the reverse chain back to step 0.
/// t = 0 returns x unchanged.
Grid project_reconstruct(const EpsilonModel& model, const NoiseSchedule& s, const Grid& x, int t,
                         RngStream& rng);

/// Per-pixel Euclidean norm of x - xhat across channels; single channel out.
Grid discrepancy(const Grid& x, const Grid& xhat);

/// Discrepancy of x against the average of `reps` independent
/// reconstructions at depth t.
Grid projection_discrepancy(const EpsilonModel& model, const NoiseSchedule& s, const Grid& x,
                            int t, int reps, RngStream& rng);

/// Truncation min(max(v, 1), 6).
double truncate_score(double v);

ValidationStats validation_stats(const EpsilonModel& model, const NoiseSchedule& s,
                                 const std::vector<Grid>& validation, const std::vector<int>& depths,
                                 int reps, const RngStream& rng, int workers = 1);

/// Averages truncated normalized discrepancies over stats.depths, given one
/// discrepancy grid per depth. Pure.
AttentionMap attention_from_discrepancies(const std::vector<Grid>& discrepancies,
                                          const ValidationStats& stats);

/// Throws FingerprintMismatch unless stats were built for this model,
/// schedule and reconstruction count.
void require_compatible_stats(const ValidationStats& stats, const EpsilonModel& model,
                              const NoiseSchedule& s, int reps);

/// Mean over depths of H((phi(x - xhat_t) - mu_t) / sigma_t). When `depths`
/// is given, each must be present in stats; otherwise all stats depths are
/// used.
AttentionMap attention_map(const Grid& x, const ValidationStats& stats, const EpsilonModel& model,
                           const NoiseSchedule& s, int reps, RngStream& rng,
                           const std::optional<std::vector<int>>& depths = std::nullopt);

/// m = (1 - (A - 1) / 5)^2: 1 where A = 1, 0 where A = 6.
WeightMap weight_from_attention(const AttentionMap& attention);

void save_stats(const std::filesystem::path& dir, const ValidationStats& stats);
ValidationStats load_stats(const std::filesystem::path& dir);

}  // namespace fcdiff
