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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fcdiff {

/// Variance schedule of a T-step Gaussian forward process.
///
/// Steps are indexed t = 1..T. alpha_bar(0) is defined as 1, which makes the
/// posterior at t = 1 collapse onto x_0 and makes beta_tilde(1) exactly 0.
class NoiseSchedule {
 public:
  /// Builds derived tables from explicit per-step betas (each in (0, 1)).
  explicit NoiseSchedule(std::vector<double> betas);

  int T() const { return static_cast<int>(beta_.size()); }

  double beta(int t) const;
  double alpha(int t) const;
  /// Valid for 0 <= t <= T.
  double alpha_bar(int t) const;
  /// Posterior variance ((1 - alpha_bar(t-1)) / (1 - alpha_bar(t))) * beta(t).
  double beta_tilde(int t) const;

  double beta_start() const { return beta_.front(); }
  double beta_end() const { return beta_.back(); }

  /// FNV-1a over T and the raw bits of every beta.
  std::string fingerprint() const;

 private:
  void require_step(int t) const;

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;  // size T + 1, alpha_bar_[0] == 1
  std::vector<double> beta_tilde_;
};

/// Betas linearly interpolated from beta_start (t = 1) to beta_end (t = T).
/// Requires T >= 1 and 0 < beta_start <= beta_end < 1; throws ConfigError.
NoiseSchedule linear_schedule(int T, double beta_start, double beta_end);

struct PosteriorCoeffs {
  double c0;  // weight on x_0
  double ct;  // weight on x_t
};

/// Coefficients of the forward-process posterior mean
/// mu_tilde(x_t, x_0) = c0 * x_0 + ct * x_t.
PosteriorCoeffs posterior_mean_coeffs(const NoiseSchedule& s, int t);

/// Projection depths round(f * T) for the given fractions.
std::vector<int> depths_from_fractions(int T, const std::vector<double>& fractions);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fcdiff
