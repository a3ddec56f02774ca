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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Run with a criterion number to execute only that one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fcdiff/cli.hpp"
#include "fcdiff/denoiser.hpp"
#include "fcdiff/grid_io.hpp"
#include "fcdiff/harness.hpp"
#include "fcdiff/projection.hpp"
#include "fcdiff/sampler.hpp"
#include "fcdiff/schedule.hpp"
#include "json.hpp"

using namespace fcdiff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const std::vector<GmmComponent> kGmm = {{0.5, 0.25, 0.005}, {0.5, 0.75, 0.005}};

// Default 8x8 field and pixel mixture.
GaussianFieldModel field() { return make_gaussian_field({8, 8, 1}, 0.5, 0.04, 2.0); }
GmmPixelModel mixture() { return GmmPixelModel({8, 8, 1}, kGmm); }

// Shorter chain for the sampling criteria; alpha_bar_T = 7.6e-4.
NoiseSchedule short_schedule() { return linear_schedule(200, 1e-4, 0.07); }

std::vector<double> pool(const std::vector<Grid>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) out.push_back(samples[k][k % samples[k].size()]);
  return out;
}

std::vector<Grid> direct(const EpsilonModel& model, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<Grid> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(model.sample(rng));
  return out;
}

Outcome ks_check(const std::vector<double>& a, const std::vector<double>& b, const char* label) {
  const double d = ks_two_sample(a, b);
  const double crit = ks_critical_value(a.size(), b.size(), 0.01);
  return {d < crit, std::string(label) + " KS " + fmt("%.4f", d) + " < " + fmt("%.4f", crit)};
}

// ---------------------------------------------------------------------------

Outcome schedule_algebra() {
  double table = 0.0, collapse = 0.0;
  bool tilde = true;
  for (int T : {1, 50, 200, 1000}) {
    const auto s = linear_schedule(T, 1e-4, 0.02);
    tilde &= s.beta_tilde(1) == 0.0;
    for (int t = 1; t <= T; ++t) {
      table = std::max(table, std::abs(s.alpha_bar(t) - s.alpha_bar(t - 1) * (1.0 - s.beta(t))));
      const auto c = posterior_mean_coeffs(s, t);
      // mu_tilde(sqrt(abar_t) x0, x0) / x0 at the zero-noise forward point.
      for (double x0 : {-3.0, 0.5, 1.0, 7.0}) {
        const double mu = c.c0 * x0 + c.ct * std::sqrt(s.alpha_bar(t)) * x0;
        collapse = std::max(collapse, std::abs(mu - std::sqrt(s.alpha_bar(t - 1)) * x0) / std::abs(x0));
      }
    }
  }
  return {table < 1e-12 && collapse < 1e-12 && tilde,
          "table " + fmt("%.1e", table) + ", posterior collapse " + fmt("%.1e", collapse) +
              ", beta_tilde_1 == 0"};
}

Outcome score_oracle() {
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  const GaussianFieldModel scalar(Grid({1, 1, 1}, 0.5), Eigen::MatrixXd::Constant(1, 1, 0.04));
  const GmmPixelModel scalar_gmm({1, 1, 1}, kGmm);
  const auto big = field();
  double worst = 0.0;
  auto check = [&](const EpsilonModel& model, const Grid& x, std::size_t i, int t) {
    const double h = 1e-5;
    Grid up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    const double score = (model.log_marginal(up, t, s) - model.log_marginal(dn, t, s)) / (2.0 * h);
    const double fd = -std::sqrt(1.0 - s.alpha_bar(t)) * score;
    const double eps = model.predict(x, t, s)[i];
    worst = std::max(worst, std::abs(eps - fd) / std::max(std::abs(eps), 1e-3));
  };
  RngStream rng(2);
  for (int t : {100, 500, 900}) {
    for (const EpsilonModel* m : {static_cast<const EpsilonModel*>(&scalar),
                                  static_cast<const EpsilonModel*>(&scalar_gmm)})
      for (int k = 0; k < 5; ++k) check(*m, forward_sample(m->sample(rng), t, s, rng), 0, t);
    const Grid x = forward_sample(big.sample(rng), t, s, rng);
    for (int k = 0; k < 5; ++k) check(big, x, static_cast<std::size_t>(rng.uniform_int(0, 63)), t);
  }
  return {worst < 1e-5, "max relative error " + fmt("%.2e", worst) + " < 1e-5"};
}

Outcome sampling_fidelity() {
  const auto s = short_schedule();
  const auto gauss = field();
  const auto samples = ancestral_batch(gauss, s, 5000, RngStream(3));
  const MomentError e = moment_error(samples, gauss);

  const auto gmm = mixture();
  const auto gsamples = ancestral_batch(gmm, s, 5000, RngStream(4));
  const auto a = pool(gsamples), b = pool(direct(gmm, 5000, 5));
  const Outcome ks = ks_check(a, b, "mixture");
  // Bimodality: the trough between the modes holds far less mass than either mode.
  std::size_t lo = 0, mid = 0, hi = 0;
  for (double v : a) {
    lo += std::abs(v - 0.25) < 0.05;
    mid += std::abs(v - 0.50) < 0.05;
    hi += std::abs(v - 0.75) < 0.05;
  }
  const bool bimodal = mid * 5 < lo && mid * 5 < hi;
  return {e.max_mean_z < 4.0 && e.cov_err < 0.1 && ks.pass && bimodal,
          "mean z " + fmt("%.2f", e.max_mean_z) + " < 4, cov error " + fmt("%.4f", e.cov_err) +
              " < 0.1, " + ks.detail + ", bins " + std::to_string(lo) + "/" + std::to_string(mid) +
              "/" + std::to_string(hi)};
}

Outcome boundary_exactness() {
  const auto s = short_schedule();
  const auto gauss = field();
  const auto gmm = mixture();
  bool exact = true;
  RngStream rng(6);
  for (const EpsilonModel* m : {static_cast<const EpsilonModel*>(&gauss),
                                static_cast<const EpsilonModel*>(&gmm)})
    for (int J : {1, 5}) {
      const Grid cond = m->sample(rng);
      exact &= fuzzy_sample(*m, s, cond, WeightMap::uniform(cond.shape(), 1.0), {J, false}, rng) == cond;
    }

  RngStream draw(7);
  const Grid cond = gauss.sample(draw);
  const auto zero = WeightMap::uniform(cond.shape(), 0.0);
  const auto plain = pool(ancestral_batch(gauss, s, 2000, RngStream(8)));
  const Outcome j1 = ks_check(pool(fuzzy_batch(gauss, s, cond, zero, {1, false}, 2000, RngStream(9))), plain, "J=1");
  const Outcome j5 = ks_check(pool(fuzzy_batch(gauss, s, cond, zero, {5, false}, 2000, RngStream(10))), plain, "J=5");
  return {exact && j1.pass && j5.pass,
          std::string("m=1 bit-exact ") + (exact ? "yes" : "NO") + ", " + j1.detail + ", " + j5.detail};
}

Outcome variance_preservation() {
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  const int t = 500;
  const double c = std::sqrt(s.alpha_bar(t - 1));
  const double v = 1.0 - s.alpha_bar(t - 1);
  const Shape shape{100, 1000, 1};
  const Grid xc(shape, 0.6);
  const Grid anchor = scaled(xc, c);
  double worst = 0.0;
  RngStream rng(11);
  for (int k = 1; k <= 9; ++k) {
    const Grid xr = axpby(1.0, anchor, std::sqrt(v), randn_grid(shape, rng));
    const Grid xs = axpby(1.0, anchor, std::sqrt(v), randn_grid(shape, rng));
    const Grid out = fuzzy_fuse(xs, xr, xc, WeightMap::uniform(shape, 0.1 * k), t, s);
    worst = std::max(worst, std::abs(grid_stats(out).second / v - 1.0));
  }
  return {worst < 0.02, "max relative variance gap " + fmt("%.4f", worst) + " < 0.02"};
}

Outcome monotonicity() {
  const auto s = short_schedule();
  const auto gauss = field();
  RngStream draw(12);
  const Grid cond = gauss.sample(draw);
  std::vector<double> dist;
  for (double m : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto out = fuzzy_batch(gauss, s, cond, WeightMap::uniform(cond.shape(), m), {}, 500, RngStream(13));
    double acc = 0.0;
    for (const Grid& g : out) acc += std::sqrt(mean_squared_diff(g, cond) * static_cast<double>(g.size()));
    dist.push_back(acc / static_cast<double>(out.size()));
  }
  bool decreasing = true;
  std::string detail = "mean distance";
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (k > 0) decreasing &= dist[k] < dist[k - 1];
    detail += " " + fmt("%.4f", dist[k]);
  }
  return {decreasing, detail};
}

// Shared by the detection and correction criteria: default schedule and
// depths, |V| = 1000.
struct ProjectionSetup {
  GaussianFieldModel model = field();
  NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
  ValidationStats stats;
  ProjectionSetup() {
    stats = validation_stats(model, s, direct(model, 1000, 14),
                             depths_from_fractions(1000, kDefaultDepthFractions), 1, RngStream(15));
  }
  ExperimentReport run(bool degrade_on, bool correct, std::uint64_t seed) const {
    ExperimentConfig cfg;
    cfg.trials = 20;
    cfg.correct = correct;
    cfg.degradation = DegradationParams::for_model(model);
    cfg.degradation.enabled = degrade_on;
    return run_correction_experiment(model, s, stats, cfg, RngStream(seed));
  }
};

const ProjectionSetup& setup() {
  static const ProjectionSetup instance;
  return instance;
}

std::vector<double> collect(const ExperimentReport& r, std::optional<double> TrialResult::*field) {
  std::vector<double> out;
  for (const auto& t : r.trials)
    if (auto v = t.*field) out.push_back(*v);
  return out;
}

Outcome detection() {
  const auto& p = setup();
  const auto anomalous = p.run(true, false, 16);
  const double auc = median(collect(anomalous, &TrialResult::auc));
  const double gap = median(collect(anomalous, &TrialResult::attention_gap));
  const auto clean = p.run(false, false, 17);
  double le2 = 0.0;
  for (const auto& t : clean.trials) le2 += t.frac_attention_le2;
  le2 /= static_cast<double>(clean.trials.size());
  return {auc >= 0.8 && gap >= 1.0 && le2 >= 0.95,
          "median AUC " + fmt("%.3f", auc) + " >= 0.8, median gap " + fmt("%.3f", gap) +
              " >= 1.0, in-distribution A<=2 " + fmt("%.4f", le2) + " >= 0.95"};
}

Outcome correction() {
  const auto& p = setup();
  const auto r = p.run(true, true, 18);
  std::vector<double> reduction;
  std::size_t wins = 0, compared = 0, faithful = 0;
  for (const auto& t : r.trials) {
    reduction.push_back(1.0 - *t.mse_masked_output / *t.mse_masked_degraded);
    faithful += *t.mae_unmasked_output < *t.mae_masked_degraded;
    if (t.mae_unmasked_output && t.mae_unmasked_baseline) {
      ++compared;
      wins += *t.mae_unmasked_output < *t.mae_unmasked_baseline;
    }
  }
  const double red = median(reduction);
  const double spread = p.model.marginal_std() * p.model.marginal_std();
  const double unmasked = median(collect(r, &TrialResult::mse_unmasked_output));
  const bool all_faithful = faithful == r.trials.size();
  return {red >= 0.5 && unmasked <= spread && wins >= 15 && all_faithful,
          "median masked MSE reduction " + fmt("%.3f", red) + " >= 0.5, median unmasked MSE " +
              fmt("%.5f", unmasked) + " <= " + fmt("%.3f", spread) + ", beats baseline " +
              std::to_string(wins) + "/" + std::to_string(compared) + " >= 15, unmasked MAE below masked-degraded MAE in " +
              std::to_string(faithful) + "/" + std::to_string(r.trials.size())};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "fcdiff_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  nlohmann::json cfg = {
      {"schema_version", 1},
      {"seed", 2024},
      {"schedule", {{"T", 100}, {"beta_start", 1e-4}, {"beta_end", 0.1}}},
      {"model", {{"type", "gaussian_field"}, {"height", 8}, {"width", 8}, {"channels", 1}}},
      {"sampler", {{"J", 3}}},
      {"sample", {{"count", 6}}},
      {"fuzzy", {{"m", {0.0, 0.5, 1.0}}, {"count", 3}}},
      {"projection", {{"validation_size", 40}}},
      {"eval", {{"trials", 4}, {"record_artifacts", true}}}};
  write_file(root / "config.json", cfg.dump(2));
  cfg["projection"]["stats_dir"] = "stats_1/stats";
  write_file(root / "attend.json", cfg.dump(2));

  std::vector<std::string> mismatched;
  for (const std::string cmd : {"sample", "fuzzy", "stats", "attend", "degrade", "eval"}) {
    const std::string config = (root / (cmd == "attend" ? "attend.json" : "config.json")).string();
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* workers : {"1", "3", "1"}) {
      const fs::path out = root / (cmd + "_" + workers + "_" + std::to_string(runs.size()));
      std::ostringstream o, e;
      const int code = run_cli({cmd, "--config", config, "--out", out.string(), "--workers", workers}, o, e);
      if (code != 0) return {false, cmd + " exited " + std::to_string(code) + ": " + e.str()};
      runs.push_back(snapshot(out));
      if (cmd == "stats" && runs.size() == 1) fs::copy(out, root / "stats_1", fs::copy_options::recursive);
    }
    if (runs[0] != runs[1] || runs[0] != runs[2]) mismatched.push_back(cmd);
  }
  fs::remove_all(root);
  std::string detail = "6 subcommands x 3 runs (workers 1/3/1)";
  for (const auto& m : mismatched) detail += ", " + m + " differs";
  return {mismatched.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"schedule algebra", schedule_algebra},
      {"score oracle", score_oracle},
      {"unconditional sampling fidelity", sampling_fidelity},
      {"fuzzy boundary exactness", boundary_exactness},
      {"fusion variance preservation", variance_preservation},
      {"conditioning monotonicity", monotonicity},
      {"attention detection", detection},
      {"autonomous correction", correction},
      {"determinism", determinism},
  };
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && only != static_cast<int>(i + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
