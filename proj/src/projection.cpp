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

#include "fcdiff/projection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fcdiff/error.hpp"
#include "fcdiff/grid_io.hpp"
#include "fcdiff/parallel.hpp"
#include "json.hpp"

namespace fcdiff {

namespace {

constexpr int kStatsSchemaVersion = 1;

std::string depth_file(const char* kind, int t) { return std::string(kind) + "_" + std::to_string(t) + ".fdg"; }

}  // namespace

std::size_t ValidationStats::depth_index(int t) const {
  const auto it = std::find(depths.begin(), depths.end(), t);
  if (it == depths.end()) {
    std::ostringstream os;
    os << "validation stats have no entry for depth " << t;
    throw ValidationError(os.str());
  }
  return static_cast<std::size_t>(it - depths.begin());
}

AttentionMap::AttentionMap(Grid grid) : grid_(std::move(grid)) {
  if (grid_.channels() != 1) throw ShapeError("attention map must be single-channel");
  for (double v : grid_.values())
    if (!(v >= kAttentionMin && v <= kAttentionMax))
      throw ValidationError("attention value outside [1, 6]");
}

Grid project_reconstruct(const EpsilonModel& model, const NoiseSchedule& s, const Grid& x, int t,
                         RngStream& rng) {
  Grid xt = forward_sample(x, t, s, rng);
  for (int k = t; k >= 1; --k) xt = reverse_step(model, xt, k, s, rng);
  return xt;
}

Grid discrepancy(const Grid& x, const Grid& xhat) {
  require_same_shape(x, xhat, "discrepancy");
  const std::size_t C = x.channels();
  Grid out(Shape{x.height(), x.width(), 1});
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    double ss = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = x[p * C + c] - xhat[p * C + c];
      ss += d * d;
    }
    out[p] = C == 1 ? std::abs(x[p] - xhat[p]) : std::sqrt(ss);
  }
  return out;
}

Grid projection_discrepancy(const EpsilonModel& model, const NoiseSchedule& s, const Grid& x,
                            int t, int reps, RngStream& rng) {
  if (reps < 1) throw ConfigError("reconstructions per depth must be >= 1");
  if (reps == 1) return discrepancy(x, project_reconstruct(model, s, x, t, rng));
  Grid acc(x.shape());
  for (int r = 0; r < reps; ++r) {
    const Grid xhat = project_reconstruct(model, s, x, t, rng);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += xhat[i];
  }
  for (double& v : acc.values()) v /= reps;
  return discrepancy(x, acc);
}

double truncate_score(double v) { return std::min(std::max(v, kAttentionMin), kAttentionMax); }

ValidationStats validation_stats(const EpsilonModel& model, const NoiseSchedule& s,
                                 const std::vector<Grid>& validation, const std::vector<int>& depths,
                                 int reps, const RngStream& rng, int workers) {
  if (validation.empty()) throw ValidationError("validation set is empty");
  if (depths.empty()) throw ConfigError("projection depth set is empty");
  for (int t : depths) s.alpha_bar(t);
  for (const Grid& z : validation)
    if (z.shape() != model.shape()) throw ShapeError("validation member does not match model");

  const std::size_t nd = depths.size();
  const std::size_t nv = validation.size();
  std::vector<Grid> phi(nv * nd);
  parallel_for(nv * nd, workers, [&](std::size_t task) {
    RngStream local = rng.child(task);
    phi[task] = projection_discrepancy(model, s, validation[task / nd], depths[task % nd], reps,
                                       local);
  });

  ValidationStats stats;
  stats.depths = depths;
  stats.v_count = nv;
  stats.reps = reps;
  stats.sigma_floor = kSigmaFloorFactor * model.marginal_std();
  stats.model_fingerprint = model.fingerprint();
  stats.schedule_fingerprint = s.fingerprint();
  const Shape map_shape{model.shape().height, model.shape().width, 1};
  for (std::size_t d = 0; d < nd; ++d) {
    Grid mu(map_shape), var(map_shape);
    for (std::size_t v = 0; v < nv; ++v) {
      const Grid& g = phi[v * nd + d];
      for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += g[i];
    }
    for (double& m : mu.values()) m /= static_cast<double>(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      const Grid& g = phi[v * nd + d];
      for (std::size_t i = 0; i < var.size(); ++i) var[i] += (g[i] - mu[i]) * (g[i] - mu[i]);
    }
    Grid sigma(map_shape);
    for (std::size_t i = 0; i < sigma.size(); ++i)
      sigma[i] = std::max(std::sqrt(var[i] / static_cast<double>(nv)), stats.sigma_floor);
    stats.mu.push_back(std::move(mu));
    stats.sigma.push_back(std::move(sigma));
  }
  return stats;
}

AttentionMap attention_from_discrepancies(const std::vector<Grid>& discrepancies,
                                          const ValidationStats& stats) {
  if (discrepancies.size() != stats.depths.size())
    throw ValidationError("need one discrepancy grid per stats depth");
  const Shape map_shape = stats.mu.front().shape();
  Grid acc(map_shape);
  for (std::size_t d = 0; d < discrepancies.size(); ++d) {
    const Grid& phi = discrepancies[d];
    if (phi.shape() != map_shape) throw ShapeError("discrepancy grid does not match stats");
    const Grid& mu = stats.mu[d];
    const Grid& sigma = stats.sigma[d];
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] += truncate_score((phi[i] - mu[i]) / sigma[i]);
  }
  for (double& v : acc.values()) v = truncate_score(v / static_cast<double>(discrepancies.size()));
  return AttentionMap(std::move(acc));
}

void require_compatible_stats(const ValidationStats& stats, const EpsilonModel& model,
                              const NoiseSchedule& s, int reps) {
  if (stats.model_fingerprint != model.fingerprint())
    throw FingerprintMismatch("validation stats were built for a different model (fingerprint " +
                              stats.model_fingerprint + " vs " + model.fingerprint() + ")");
  if (stats.schedule_fingerprint != s.fingerprint())
    throw FingerprintMismatch("validation stats were built for a different schedule (fingerprint " +
                              stats.schedule_fingerprint + " vs " + s.fingerprint() + ")");
  if (stats.reps != reps)
    throw FingerprintMismatch("validation stats use " + std::to_string(stats.reps) +
                              " reconstructions per depth, config asks for " +
                              std::to_string(reps));
}

AttentionMap attention_map(const Grid& x, const ValidationStats& stats, const EpsilonModel& model,
                           const NoiseSchedule& s, int reps, RngStream& rng,
                           const std::optional<std::vector<int>>& depths) {
  require_compatible_stats(stats, model, s, reps);
  x.check_finite();
  ValidationStats view;
  const ValidationStats* used = &stats;
  if (depths) {
    view.depths = *depths;
    for (int t : *depths) {
      const std::size_t k = stats.depth_index(t);
      view.mu.push_back(stats.mu[k]);
      view.sigma.push_back(stats.sigma[k]);
    }
    used = &view;
  }
  if (used->depths.empty()) throw ValidationError("no projection depths selected");
  std::vector<Grid> phi;
  phi.reserve(used->depths.size());
  for (int t : used->depths) phi.push_back(projection_discrepancy(model, s, x, t, reps, rng));
  return attention_from_discrepancies(phi, *used);
}

WeightMap weight_from_attention(const AttentionMap& attention) {
  Grid m = attention.grid();
  for (double& v : m.values()) {
    const double normalized = (v - kAttentionMin) / (kAttentionMax - kAttentionMin);
    v = std::clamp((1.0 - normalized) * (1.0 - normalized), 0.0, 1.0);
  }
  return WeightMap(std::move(m));
}

void save_stats(const std::filesystem::path& dir, const ValidationStats& stats) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = kStatsSchemaVersion;
  manifest["depths"] = stats.depths;
  manifest["v_count"] = stats.v_count;
  manifest["reps"] = stats.reps;
  manifest["sigma_floor"] = stats.sigma_floor;
  manifest["model_fingerprint"] = stats.model_fingerprint;
  manifest["schedule_fingerprint"] = stats.schedule_fingerprint;
  for (std::size_t d = 0; d < stats.depths.size(); ++d) {
    write_grid(dir / depth_file("mu", stats.depths[d]), stats.mu[d]);
    write_grid(dir / depth_file("sigma", stats.depths[d]), stats.sigma[d]);
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

ValidationStats load_stats(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed stats manifest in " + dir.string() + ": " + e.what());
  }
  ValidationStats stats;
  try {
    if (manifest.at("schema_version").get<int>() != kStatsSchemaVersion)
      throw IoError("unsupported stats schema_version in " + dir.string());
    stats.depths = manifest.at("depths").get<std::vector<int>>();
    stats.v_count = manifest.at("v_count").get<std::size_t>();
    stats.reps = manifest.at("reps").get<int>();
    stats.sigma_floor = manifest.at("sigma_floor").get<double>();
    stats.model_fingerprint = manifest.at("model_fingerprint").get<std::string>();
    stats.schedule_fingerprint = manifest.at("schedule_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("incomplete stats manifest in " + dir.string() + ": " + e.what());
  }
  for (int t : stats.depths) {
    stats.mu.push_back(read_grid(dir / depth_file("mu", t)));
    stats.sigma.push_back(read_grid(dir / depth_file("sigma", t)));
  }
  return stats;
}

}  // namespace fcdiff
