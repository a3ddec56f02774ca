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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcdiff/denoiser.hpp"
#include "fcdiff/grid.hpp"
#include "fcdiff/projection.hpp"
#include "fcdiff/rng.hpp"
#include "fcdiff/sampler.hpp"
#include "fcdiff/schedule.hpp"
#include "json.hpp"

namespace fcdiff {

// ---------------------------------------------------------------------------
// Synthetic degradation

struct DegradationParams {
  bool enabled = true;
  /// Rectangle side range as fractions of the image side.
  double side_min_frac = 0.25;
  double side_max_frac = 0.5;
  /// Threshold range in units of the data's marginal std above its mean.
  double threshold_lo_sigmas = 4.0;
  double threshold_hi_sigmas = 8.0;
  /// Reference moments; callers usually fill these from the model.
  double data_mean = 0.0;
  double data_std = 1.0;

  static DegradationParams for_model(const EpsilonModel& model);
};

struct PixelRect {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0, x1) x [y0, y1)
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  std::size_t area() const { return empty() ? 0 : (x1 - x0) * (y1 - y0); }
  bool operator==(const PixelRect&) const = default;
};

struct DegradationRecord {
  PixelRect rect;
  double threshold = 0.0;
  Grid mask;  // single channel; 1 inside rect, 0 outside
};

/// Picks a random rectangle and a random threshold, then offsets every pixel
/// (all channels) inside the rectangle by exactly the amount that brings it
/// to the threshold. Pixels outside are copied bit-exactly. A disabled
/// degradation returns x with an empty rectangle.
std::pair<Grid, DegradationRecord> degrade(const Grid& x, const DegradationParams& params,
                                           RngStream& rng);

// ---------------------------------------------------------------------------
// Metrics

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic critical value c(alpha) * sqrt((n + m) / (n m)) with
/// c(alpha) = sqrt(-ln(alpha / 2) / 2).
double ks_critical_value(std::size_t n, std::size_t m, double alpha);

struct MomentError {
  double mean_err = 0.0;    ///< max per-entry |sample mean - model mean|
  double cov_err = 0.0;     ///< ||C_hat - Sigma||_F / ||Sigma||_F
  double max_mean_z = 0.0;  ///< max per-entry |mean gap| / standard error
};

/// Needs at least two samples; throws ValidationError otherwise.
MomentError moment_error(const std::vector<Grid>& samples, const EpsilonModel& model);

/// ROC AUC of per-pixel scores against a binary mask (Mann-Whitney with
/// midranks). Needs both classes present.
double pixel_auc(const Grid& score, const Grid& mask);

/// Mean of `values` restricted to mask == 1 (inside) or mask == 0.
double masked_mean(const Grid& values, const Grid& mask, bool inside);

/// Per-pixel squared error summed over channels, averaged over masked pixels.
double masked_mse(const Grid& a, const Grid& b, const Grid& mask, bool inside);

double median(std::vector<double> values);

/// Distribution-free confidence interval for the median from order
/// statistics (binomial tail), at coverage >= `level`.
std::pair<double, double> median_ci(std::vector<double> values, double level = 0.95);

// ---------------------------------------------------------------------------
// Correction experiment

struct ExperimentConfig {
  std::size_t trials = 20;
  FuzzySamplerConfig sampler{};
  int reps = 1;
  DegradationParams degradation{};
  /// Run the fuzzy correction; detection metrics are always computed.
  bool correct = true;
  /// Depth of the no-map projection baseline; < 0 means round(0.4 T).
  int baseline_depth = -1;
  bool record_artifacts = false;
  std::filesystem::path artifact_dir{};
};

struct TrialResult {
  std::size_t trial = 0;
  std::uint64_t stream_seed = 0;  ///< key and id of the trial stream
  std::uint64_t stream_id = 0;
  PixelRect rect{};
  double threshold = 0.0;
  std::optional<double> auc;
  std::optional<double> attention_gap;  ///< mean A inside minus outside
  double attention_mean = 0.0;
  double frac_attention_le2 = 0.0;
  std::optional<double> mse_masked_degraded;
  std::optional<double> mse_masked_output;
  std::optional<double> mse_masked_baseline;
  std::optional<double> mse_unmasked_output;
  std::optional<double> mse_unmasked_baseline;
  std::optional<double> mae_unmasked_output;
  std::optional<double> mae_unmasked_baseline;
  std::optional<double> mae_masked_degraded;
  std::optional<double> mse_output;
};

struct ExperimentReport {
  nlohmann::ordered_json config_echo;
  std::uint64_t seed = 0;
  std::vector<TrialResult> trials;
};

/// Clean oracle draw -> degrade -> attention -> weight map -> fuzzy sample,
/// plus the no-map projection baseline, once per trial. Trial i uses
/// rng.child(i). Throws FingerprintMismatch for stale stats.
ExperimentReport run_correction_experiment(const EpsilonModel& model, const NoiseSchedule& s,
                                           const ValidationStats& stats,
                                           const ExperimentConfig& config, const RngStream& rng,
                                           int workers = 1);

inline constexpr int kReportSchemaVersion = 1;

/// Versioned report with per-trial metrics, medians and median CIs.
nlohmann::ordered_json report_to_json(const ExperimentReport& report);

/// Schema check for report JSON; returns a list of problems (empty if valid).
std::vector<std::string> validate_report_json(const nlohmann::json& report);

}  // namespace fcdiff
