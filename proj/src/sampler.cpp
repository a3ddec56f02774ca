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

#include "fcdiff/sampler.hpp"

#include <cmath>
#include <sstream>

#include "fcdiff/error.hpp"
#include "fcdiff/parallel.hpp"

namespace fcdiff {

WeightMap::WeightMap(Grid grid) : grid_(std::move(grid)) {
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const double v = grid_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream os;
      os << "weight map entry " << i << " is " << v << ", must lie in [0, 1]";
      throw ValidationError(os.str());
    }
  }
}

WeightMap WeightMap::uniform(const Shape& image_shape, double m) {
  return WeightMap(Grid(Shape{image_shape.height, image_shape.width, 1}, m));
}

void WeightMap::require_compatible(const Shape& image) const {
  const Shape& ms = grid_.shape();
  if (ms.height != image.height || ms.width != image.width ||
      (ms.channels != 1 && ms.channels != image.channels)) {
    std::ostringstream os;
    os << "weight map (" << ms.height << "," << ms.width << "," << ms.channels
       << ") cannot condition image (" << image.height << "," << image.width << ","
       << image.channels << ")";
    throw ShapeError(os.str());
  }
}

Grid forward_sample(const Grid& x0, int t, const NoiseSchedule& s, RngStream& rng) {
  s.alpha_bar(t);  // range check before drawing
  if (t == 0) return x0;
  return forward_sample_with_noise(x0, t, s, randn_grid(x0.shape(), rng));
}

Grid forward_sample_with_noise(const Grid& x0, int t, const NoiseSchedule& s, const Grid& eps) {
  const double ab = s.alpha_bar(t);
  if (t == 0) return x0;
  return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

Grid reverse_mean(const EpsilonModel& model, const Grid& x_t, int t, const NoiseSchedule& s) {
  const double b = s.beta(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
  const double eps_coef = b / std::sqrt(1.0 - s.alpha_bar(t));
  const Grid eps = model.predict(x_t, t, s);

  Grid out(x_t.shape());
  auto o = out.values();
  const auto xv = x_t.values();
  const auto ev = eps.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = inv_sqrt_alpha * (xv[i] - eps_coef * ev[i]);
  return out;
}

Grid reverse_step(const EpsilonModel& model, const Grid& x_t, int t, const NoiseSchedule& s,
                  RngStream& rng) {
  Grid out = reverse_mean(model, x_t, t, s);
  if (t > 1) {
    const double sigma = std::sqrt(s.beta_tilde(t));
    for (double& v : out.values()) v += sigma * rng.normal();
  }
  return out;
}

Grid ancestral_sample(const EpsilonModel& model, const NoiseSchedule& s, RngStream& rng) {
  Grid x = randn_grid(model.shape(), rng);
  for (int t = s.T(); t >= 1; --t) x = reverse_step(model, x, t, s, rng);
  return x;
}

std::vector<Grid> ancestral_batch(const EpsilonModel& model, const NoiseSchedule& s,
                                  std::size_t count, const RngStream& rng, int workers) {
  std::vector<Grid> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    RngStream local = rng.child(i);
    out[i] = ancestral_sample(model, s, local);
  });
  return out;
}

Grid fuzzy_fuse(const Grid& x_synth, const Grid& x_reproj, const Grid& x_cond, const WeightMap& m,
                int t, const NoiseSchedule& s) {
  require_same_shape(x_synth, x_reproj, "fuzzy_fuse");
  require_same_shape(x_synth, x_cond, "fuzzy_fuse");
  m.require_compatible(x_synth.shape());
  if (t < 1) throw IndexError("fuzzy_fuse needs t >= 1");
  const double c = std::sqrt(s.alpha_bar(t - 1));
  const std::size_t channels = x_synth.channels();

  Grid out(x_synth.shape());
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double w = m.at(i, channels);
    if (w == 0.0) {
      o[i] = x_synth[i];
    } else if (w == 1.0) {
      o[i] = x_reproj[i];
    } else {
      const double anchor = c * x_cond[i];
      const double blend = w * x_reproj[i] + (1.0 - w) * x_synth[i] - anchor;
      o[i] = anchor + blend / std::sqrt(1.0 - 2.0 * w + 2.0 * w * w);
    }
  }
  return out;
}

Grid renoise(const Grid& x, int t, const NoiseSchedule& s, RngStream& rng) {
  const double b = s.beta(t);
  return axpby(std::sqrt(1.0 - b), x, std::sqrt(b), randn_grid(x.shape(), rng));
}

Grid fuzzy_sample(const EpsilonModel& model, const NoiseSchedule& s, const Grid& x_cond,
                  const WeightMap& m, const FuzzySamplerConfig& cfg, RngStream& rng,
                  std::vector<Grid>* trajectory) {
  if (cfg.J < 1) throw ConfigError("fuzzy sampler needs J >= 1");
  if (x_cond.shape() != model.shape()) throw ShapeError("conditioning image does not match model");
  x_cond.check_finite();
  m.require_compatible(x_cond.shape());
  const bool record = cfg.record_trajectory && trajectory != nullptr;

  Grid x = randn_grid(x_cond.shape(), rng);
  if (record) trajectory->push_back(x);
  for (int t = s.T(); t >= 1; --t) {
    Grid fused;
    // At t = 1 both branches are deterministic, so every repeat is identical.
    const int repeats = t > 1 ? cfg.J : 1;
    for (int j = 1; j <= repeats; ++j) {
      const Grid reproj = forward_sample(x_cond, t - 1, s, rng);
      const Grid synth = reverse_step(model, x, t, s, rng);
      fused = fuzzy_fuse(synth, reproj, x_cond, m, t, s);
      if (j < repeats) x = renoise(fused, t, s, rng);
    }
    x = std::move(fused);
    if (record) trajectory->push_back(x);
  }
  return x;
}

std::vector<Grid> fuzzy_batch(const EpsilonModel& model, const NoiseSchedule& s,
                              const Grid& x_cond, const WeightMap& m,
                              const FuzzySamplerConfig& cfg, std::size_t count,
                              const RngStream& rng, int workers) {
  std::vector<Grid> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    RngStream local = rng.child(i);
    out[i] = fuzzy_sample(model, s, x_cond, m, cfg, local);
  });
  return out;
}

}  // namespace fcdiff
