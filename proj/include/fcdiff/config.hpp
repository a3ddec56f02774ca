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
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fcdiff/denoiser.hpp"
#include "fcdiff/harness.hpp"
#include "fcdiff/schedule.hpp"
#include "json.hpp"

namespace fcdiff {

inline constexpr int kConfigSchemaVersion = 1;

struct ScheduleConfig {
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct ModelConfig {
  std::string type;  // "gaussian_field" | "gmm_pixel"
  Shape shape{8, 8, 1};
  // gaussian_field
  double mean = 0.5;
  double variance = 0.04;
  double correlation_length = 2.0;
  std::optional<std::filesystem::path> mean_file;
  std::optional<std::filesystem::path> covariance_file;
  // gmm_pixel
  std::vector<double> weights{0.5, 0.5};
  std::vector<double> means{0.25, 0.75};
  std::vector<double> variances{0.005, 0.005};
};

/// m given as one scalar, a sweep of scalars, or a Grid file.
using WeightSource = std::variant<double, std::vector<double>, std::filesystem::path>;

struct FuzzySection {
  std::optional<std::filesystem::path> condition;
  WeightSource m = 1.0;
  bool clamp = false;
  std::size_t count = 1;
};

struct ProjectionSection {
  std::optional<std::vector<int>> depths;
  std::vector<double> depth_fractions = {0.3, 0.4, 0.5, 0.6};
  int reps = 1;
  std::size_t validation_size = 1000;
  std::optional<std::filesystem::path> stats_dir;
};

struct EvalSection {
  std::size_t trials = 20;
  bool correct = true;
  std::optional<int> baseline_depth;
  bool record_artifacts = false;
};

/// Single schema shared by every subcommand. Unknown keys are rejected.
struct RunConfig {
  nlohmann::ordered_json raw;
  std::filesystem::path base_dir;
  std::optional<std::uint64_t> seed;
  ScheduleConfig schedule;
  std::optional<ModelConfig> model;
  FuzzySamplerConfig sampler;
  std::size_t sample_count = 1;
  FuzzySection fuzzy;
  ProjectionSection projection;
  std::optional<std::filesystem::path> attend_input;
  std::optional<std::filesystem::path> degrade_input;
  DegradationParams degradation;
  EvalSection eval;

  std::vector<int> projection_depths() const;
};

/// Parses JSON text. `origin` names the source in diagnostics; relative paths
/// resolve against `base_dir`. Throws ConfigError with line/column for
/// syntax errors and a dotted field path for schema errors.
RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

NoiseSchedule build_schedule(const ScheduleConfig& cfg);

/// Throws ConfigError if the model section is absent.
std::unique_ptr<EpsilonModel> build_model(const RunConfig& cfg);
std::unique_ptr<EpsilonModel> build_model(const ModelConfig& cfg);

}  // namespace fcdiff
