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

#include "fcdiff/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "fcdiff/error.hpp"
#include "fcdiff/grid_io.hpp"

namespace fcdiff {

namespace {

using Json = nlohmann::ordered_json;

// Walks one JSON object, recording which keys were consumed so that
// leftovers can be reported as unknown fields.
class Section {
 public:
  Section(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("config field '" + field(key) + "': " + what);
  }

  std::string field(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "$" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const Json& raw(const std::string& key) { return obj_.at(key); }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback, std::int64_t min_value) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < min_value) fail(key, "must be >= " + std::to_string(min_value));
    return x;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = obj_.at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = obj_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const Json& v = obj_.at(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) fail(key, "expected a non-empty array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return Section(obj_.at(key), field(key));
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "unknown field");
  }

 private:
  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::optional<std::filesystem::path> optional_path(Section& s, const std::string& key,
                                                   const std::filesystem::path& base) {
  if (!s.has(key)) return std::nullopt;
  return resolve(base, s.string(key));
}

ModelConfig parse_model(Section s, const std::filesystem::path& base) {
  ModelConfig m;
  if (!s.has("type")) s.fail("type", "missing (expected \"gaussian_field\" or \"gmm_pixel\")");
  m.type = s.string("type");
  m.shape.height = static_cast<std::size_t>(s.integer("height", 8, 1));
  m.shape.width = static_cast<std::size_t>(s.integer("width", 8, 1));
  m.shape.channels = static_cast<std::size_t>(s.integer("channels", 1, 1));
  if (m.type == "gaussian_field") {
    m.mean = s.number("mean", m.mean);
    m.variance = s.number("variance", m.variance);
    m.correlation_length = s.number("correlation_length", m.correlation_length);
    m.mean_file = optional_path(s, "mean_file", base);
    m.covariance_file = optional_path(s, "covariance_file", base);
    if (m.variance < 0.0) s.fail("variance", "must be >= 0");
    if (!(m.correlation_length > 0.0)) s.fail("correlation_length", "must be > 0");
  } else if (m.type == "gmm_pixel") {
    if (s.has("weights")) m.weights = s.numbers("weights");
    if (s.has("means")) m.means = s.numbers("means");
    if (s.has("variances")) m.variances = s.numbers("variances");
    if (m.weights.size() != m.means.size() || m.weights.size() != m.variances.size())
      s.fail("weights", "weights, means and variances must have equal length");
  } else {
    s.fail("type", "unknown model type \"" + m.type + "\"");
  }
  s.finish();
  return m;
}

std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::vector<int> RunConfig::projection_depths() const {
  if (projection.depths) return *projection.depths;
  return depths_from_fractions(schedule.T, projection.depth_fractions);
}

RunConfig parse_config(const std::string& text, const std::string& origin,
                       const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  try {
    cfg.raw = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is 1-based position of the offending character
    throw ConfigError(origin + ": " + locate(text, e.byte > 0 ? e.byte - 1 : 0) +
                      ": JSON syntax error: " + e.what());
  }

  Section root(cfg.raw, "");
  const auto version = root.integer("schema_version", kConfigSchemaVersion, 1);
  if (version != kConfigSchemaVersion)
    root.fail("schema_version", "unsupported version " + std::to_string(version));
  if (root.has("seed")) {
    const Json& v = root.raw("seed");
    if (!v.is_number_unsigned()) root.fail("seed", "expected an unsigned 64-bit integer");
    cfg.seed = v.get<std::uint64_t>();
  }

  if (root.has("schedule")) {
    Section s = root.child("schedule");
    cfg.schedule.T = static_cast<int>(s.integer("T", cfg.schedule.T, 1));
    cfg.schedule.beta_start = s.number("beta_start", cfg.schedule.beta_start);
    cfg.schedule.beta_end = s.number("beta_end", cfg.schedule.beta_end);
    s.finish();
    if (!(cfg.schedule.beta_start > 0.0 && cfg.schedule.beta_start <= cfg.schedule.beta_end &&
          cfg.schedule.beta_end < 1.0))
      s.fail("", "betas must satisfy 0 < beta_start <= beta_end < 1");
  }

  if (root.has("model")) cfg.model = parse_model(root.child("model"), base_dir);

  if (root.has("sampler")) {
    Section s = root.child("sampler");
    cfg.sampler.J = static_cast<int>(s.integer("J", cfg.sampler.J, 1));
    cfg.sampler.record_trajectory = s.boolean("record_trajectory", false);
    s.finish();
  }

  if (root.has("sample")) {
    Section s = root.child("sample");
    cfg.sample_count = static_cast<std::size_t>(s.integer("count", 1, 1));
    s.finish();
  }

  if (root.has("fuzzy")) {
    Section s = root.child("fuzzy");
    cfg.fuzzy.condition = optional_path(s, "condition", base_dir);
    if (s.has("m")) {
      const Json& v = s.raw("m");
      if (v.is_number()) {
        cfg.fuzzy.m = v.get<double>();
      } else if (v.is_array()) {
        cfg.fuzzy.m = s.numbers("m");
      } else if (v.is_string()) {
        cfg.fuzzy.m = resolve(base_dir, v.get<std::string>());
      } else {
        s.fail("m", "expected a number, an array of numbers or a grid file path");
      }
    }
    cfg.fuzzy.clamp = s.boolean("clamp", false);
    cfg.fuzzy.count = static_cast<std::size_t>(s.integer("count", 1, 1));
    s.finish();
  }

  if (root.has("projection")) {
    Section s = root.child("projection");
    if (s.has("depths")) {
      std::vector<int> depths;
      for (double d : s.numbers("depths")) {
        if (d != static_cast<int>(d) || d < 0) s.fail("depths", "expected non-negative integers");
        depths.push_back(static_cast<int>(d));
      }
      cfg.projection.depths = depths;
    }
    if (s.has("depth_fractions")) cfg.projection.depth_fractions = s.numbers("depth_fractions");
    cfg.projection.reps = static_cast<int>(s.integer("reps", 1, 1));
    cfg.projection.validation_size = static_cast<std::size_t>(s.integer("validation_size", 1000, 1));
    cfg.projection.stats_dir = optional_path(s, "stats_dir", base_dir);
    s.finish();
  }
  for (int t : cfg.projection_depths())
    if (t < 0 || t > cfg.schedule.T)
      throw ConfigError("config field 'projection.depths': depth " + std::to_string(t) +
                        " outside [0, T]");

  if (root.has("attend")) {
    Section s = root.child("attend");
    cfg.attend_input = optional_path(s, "input", base_dir);
    s.finish();
  }

  if (root.has("degrade")) {
    Section s = root.child("degrade");
    cfg.degrade_input = optional_path(s, "input", base_dir);
    DegradationParams& p = cfg.degradation;
    p.enabled = s.boolean("enabled", p.enabled);
    p.side_min_frac = s.number("side_min_frac", p.side_min_frac);
    p.side_max_frac = s.number("side_max_frac", p.side_max_frac);
    p.threshold_lo_sigmas = s.number("threshold_lo_sigmas", p.threshold_lo_sigmas);
    p.threshold_hi_sigmas = s.number("threshold_hi_sigmas", p.threshold_hi_sigmas);
    s.finish();
    if (!(p.side_min_frac >= 0.0 && p.side_min_frac <= p.side_max_frac && p.side_max_frac <= 1.0))
      s.fail("", "need 0 <= side_min_frac <= side_max_frac <= 1");
    if (p.threshold_lo_sigmas > p.threshold_hi_sigmas)
      s.fail("", "threshold_lo_sigmas exceeds threshold_hi_sigmas");
  }

  if (root.has("eval")) {
    Section s = root.child("eval");
    cfg.eval.trials = static_cast<std::size_t>(s.integer("trials", 20, 1));
    cfg.eval.correct = s.boolean("correct", true);
    if (s.has("baseline_depth"))
      cfg.eval.baseline_depth = static_cast<int>(s.integer("baseline_depth", 0, 0));
    cfg.eval.record_artifacts = s.boolean("record_artifacts", false);
    s.finish();
  }

  root.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw IoError("cannot read config file " + path.string());
  }
  return parse_config(text, path.string(), path.parent_path());
}

NoiseSchedule build_schedule(const ScheduleConfig& cfg) {
  return linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
}

std::unique_ptr<EpsilonModel> build_model(const RunConfig& cfg) {
  if (!cfg.model) throw ConfigError("config is missing the required 'model' section");
  return build_model(*cfg.model);
}

std::unique_ptr<EpsilonModel> build_model(const ModelConfig& m) {
  if (m.type == "gaussian_field") {
    Grid mean = m.mean_file ? read_grid(*m.mean_file) : Grid(m.shape, m.mean);
    if (m.covariance_file) {
      const Grid cov = read_grid(*m.covariance_file);
      const std::size_t D = mean.size();
      if (cov.height() != D || cov.width() != D || cov.channels() != 1)
        throw ConfigError("config field 'model.covariance_file': expected a " + std::to_string(D) +
                          "x" + std::to_string(D) + "x1 grid");
      Eigen::MatrixXd sigma(D, D);
      for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j)
          sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov.at(i, j);
      return std::make_unique<GaussianFieldModel>(std::move(mean), sigma);
    }
    const Eigen::MatrixXd sigma =
        exponential_covariance(mean.shape(), m.variance, m.correlation_length);
    return std::make_unique<GaussianFieldModel>(std::move(mean), sigma);
  }
  if (m.type == "gmm_pixel") {
    std::vector<GmmComponent> comps;
    for (std::size_t k = 0; k < m.weights.size(); ++k)
      comps.push_back({m.weights[k], m.means[k], m.variances[k]});
    return std::make_unique<GmmPixelModel>(m.shape, std::move(comps));
  }
  throw ConfigError("unknown model type \"" + m.type + "\"");
}

}  // namespace fcdiff
