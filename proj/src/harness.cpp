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

#include "fcdiff/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fcdiff/error.hpp"
#include "fcdiff/grid_io.hpp"
#include "fcdiff/parallel.hpp"

namespace fcdiff {

DegradationParams DegradationParams::for_model(const EpsilonModel& model) {
  DegradationParams p;
  p.data_mean = model.marginal_mean();
  p.data_std = model.marginal_std();
  return p;
}

namespace {

std::size_t side_bound(double frac, std::size_t extent, bool lower) {
  const double raw = frac * static_cast<double>(extent);
  const double rounded = lower ? std::ceil(raw - 1e-9) : std::floor(raw + 1e-9);
  return std::min<std::size_t>(extent, static_cast<std::size_t>(std::max(rounded, 0.0)));
}

void validate(const DegradationParams& p) {
  if (!(p.side_min_frac >= 0.0 && p.side_min_frac <= p.side_max_frac && p.side_max_frac <= 1.0))
    throw ConfigError("degradation: need 0 <= side_min_frac <= side_max_frac <= 1");
  if (!(p.threshold_lo_sigmas <= p.threshold_hi_sigmas))
    throw ConfigError("degradation: threshold_lo_sigmas exceeds threshold_hi_sigmas");
  if (!(p.data_std >= 0.0) || !std::isfinite(p.data_mean))
    throw ConfigError("degradation: invalid reference moments");
}

bool has_class(const Grid& mask, double cls) {
  return std::any_of(mask.values().begin(), mask.values().end(),
                     [cls](double v) { return v == cls; });
}

}  // namespace

std::pair<Grid, DegradationRecord> degrade(const Grid& x, const DegradationParams& params,
                                           RngStream& rng) {
  validate(params);
  x.check_finite();
  DegradationRecord rec;
  rec.mask = Grid(Shape{x.height(), x.width(), 1});
  if (!params.enabled) return {x, std::move(rec)};

  const std::size_t h_hi = side_bound(params.side_max_frac, x.height(), false);
  const std::size_t w_hi = side_bound(params.side_max_frac, x.width(), false);
  if (h_hi == 0 || w_hi == 0) return {x, std::move(rec)};  // zero-area configuration
  const std::size_t h_lo = std::clamp<std::size_t>(side_bound(params.side_min_frac, x.height(), true), 1, h_hi);
  const std::size_t w_lo = std::clamp<std::size_t>(side_bound(params.side_min_frac, x.width(), true), 1, w_hi);

  const auto rh = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(h_lo), static_cast<std::int64_t>(h_hi)));
  const auto rw = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(w_lo), static_cast<std::int64_t>(w_hi)));
  const auto y0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.height() - rh)));
  const auto x0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.width() - rw)));
  rec.rect = {x0, y0, x0 + rw, y0 + rh};
  rec.threshold = params.data_mean + params.data_std * rng.uniform(params.threshold_lo_sigmas,
                                                                   params.threshold_hi_sigmas);

  Grid out = x;
  for (std::size_t y = y0; y < y0 + rh; ++y) {
    for (std::size_t xx = x0; xx < x0 + rw; ++xx) {
      rec.mask.at(y, xx) = 1.0;
      for (std::size_t c = 0; c < x.channels(); ++c) out.at(y, xx, c) = rec.threshold;
    }
  }
  return {std::move(out), std::move(rec)};
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_value(std::size_t n, std::size_t m, double alpha) {
  if (n == 0 || m == 0) throw ValidationError("ks_critical_value: empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("ks_critical_value: alpha in (0,1)");
  const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

MomentError moment_error(const std::vector<Grid>& samples, const EpsilonModel& model) {
  if (samples.size() < 2) throw ValidationError("moment_error needs at least two samples");
  const auto D = static_cast<Eigen::Index>(model.shape().size());
  const double n = static_cast<double>(samples.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
  for (const Grid& g : samples) {
    if (g.shape() != model.shape()) throw ShapeError("moment_error: sample shape mismatch");
    mean += Eigen::Map<const Eigen::VectorXd>(g.values().data(), D);
  }
  mean /= n;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
  for (const Grid& g : samples) {
    const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(g.values().data(), D) - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= (n - 1.0);

  const Grid model_mean = model.mean();
  const Eigen::MatrixXd sigma = model.covariance();
  MomentError err;
  for (Eigen::Index i = 0; i < D; ++i) {
    const double gap = std::abs(mean[i] - model_mean[static_cast<std::size_t>(i)]);
    err.mean_err = std::max(err.mean_err, gap);
    if (sigma(i, i) > 0.0) err.max_mean_z = std::max(err.max_mean_z, gap / std::sqrt(sigma(i, i) / n));
  }
  const double norm = sigma.norm();
  err.cov_err = norm > 0.0 ? (cov - sigma).norm() / norm : cov.norm();
  return err;
}

double pixel_auc(const Grid& score, const Grid& mask) {
  require_same_shape(score, mask, "pixel_auc");
  std::size_t pos = 0;
  for (double m : mask.values()) {
    if (m != 0.0 && m != 1.0) throw ValidationError("pixel_auc: mask must be binary");
    if (m == 1.0) ++pos;
  }
  const std::size_t n = mask.size();
  if (pos == 0 || pos == n) throw ValidationError("pixel_auc: mask needs both classes");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && score[order[j]] == score[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (mask[order[k]] == 1.0) rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(pos), nn = static_cast<double>(n - pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double masked_mean(const Grid& values, const Grid& mask, bool inside) {
  require_same_shape(values, mask, "masked_mean");
  const double cls = inside ? 1.0 : 0.0;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (mask[i] == cls) {
      sum += values[i];
      ++count;
    }
  if (count == 0) throw ValidationError("masked_mean: no pixels in the selected region");
  return sum / static_cast<double>(count);
}

double masked_mse(const Grid& a, const Grid& b, const Grid& mask, bool inside) {
  require_same_shape(a, b, "masked_mse");
  if (mask.height() != a.height() || mask.width() != a.width() || mask.channels() != 1)
    throw ShapeError("masked_mse: mask must be single-channel with the image's spatial dims");
  Grid sq(mask.shape());
  const std::size_t C = a.channels();
  for (std::size_t p = 0; p < sq.size(); ++p)
    for (std::size_t c = 0; c < C; ++c) {
      const double d = a[p * C + c] - b[p * C + c];
      sq[p] += d * d;
    }
  return masked_mean(sq, mask, inside);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::pair<double, double> median_ci(std::vector<double> values, double level) {
  if (values.empty()) throw ValidationError("median_ci of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double tail = (1.0 - level) / 2.0;
  // Largest k with P(Bin(n, 1/2) <= k - 1) <= tail gives [x_(k), x_(n-k+1)].
  std::size_t k = 0;
  double cdf = 0.0, pmf = std::pow(0.5, static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    cdf += pmf;
    if (cdf > tail) break;
    k = i + 1;
    pmf *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  }
  if (k == 0) return {values.front(), values.back()};
  return {values[k - 1], values[n - k]};
}

ExperimentReport run_correction_experiment(const EpsilonModel& model, const NoiseSchedule& s,
                                           const ValidationStats& stats,
                                           const ExperimentConfig& config, const RngStream& rng,
                                           int workers) {
  require_compatible_stats(stats, model, s, config.reps);
  if (config.trials == 0) throw ConfigError("experiment needs at least one trial");
  const int baseline_depth =
      config.baseline_depth >= 0 ? config.baseline_depth : static_cast<int>(std::lround(0.4 * s.T()));
  s.alpha_bar(baseline_depth);

  ExperimentReport report;
  report.seed = rng.seed();
  report.trials.resize(config.trials);
  parallel_for(config.trials, workers, [&](std::size_t i) {
    RngStream r = rng.child(i);
    TrialResult& res = report.trials[i];
    res.trial = i;
    res.stream_seed = r.seed();
    res.stream_id = r.stream_id();

    const Grid clean = model.sample(r);
    auto [degraded, rec] = degrade(clean, config.degradation, r);
    res.rect = rec.rect;
    res.threshold = rec.threshold;
    const bool has_in = has_class(rec.mask, 1.0);
    const bool has_out = has_class(rec.mask, 0.0);

    const AttentionMap attention = attention_map(degraded, stats, model, s, config.reps, r);
    const Grid& A = attention.grid();
    res.attention_mean = grid_stats(A).first;
    std::size_t le2 = 0;
    for (double a : A.values()) le2 += a <= 2.0 ? 1 : 0;
    res.frac_attention_le2 = static_cast<double>(le2) / static_cast<double>(A.size());
    if (has_in && has_out) {
      res.auc = pixel_auc(A, rec.mask);
      res.attention_gap = masked_mean(A, rec.mask, true) - masked_mean(A, rec.mask, false);
    }
    if (has_in) {
      res.mse_masked_degraded = masked_mse(degraded, clean, rec.mask, true);
      const Grid phi = discrepancy(degraded, clean);
      res.mae_masked_degraded = masked_mean(phi, rec.mask, true);
    }

    Grid output, baseline;
    WeightMap weights = WeightMap::uniform(degraded.shape(), 1.0);
    if (config.correct) {
      weights = weight_from_attention(attention);
      output = fuzzy_sample(model, s, degraded, weights, config.sampler, r);
      baseline = project_reconstruct(model, s, degraded, baseline_depth, r);
      res.mse_output = mean_squared_diff(output, clean) * static_cast<double>(clean.channels());
      if (has_in) {
        res.mse_masked_output = masked_mse(output, clean, rec.mask, true);
        res.mse_masked_baseline = masked_mse(baseline, clean, rec.mask, true);
      }
      if (has_out) {
        res.mse_unmasked_output = masked_mse(output, clean, rec.mask, false);
        res.mse_unmasked_baseline = masked_mse(baseline, clean, rec.mask, false);
        res.mae_unmasked_output = masked_mean(discrepancy(output, clean), rec.mask, false);
        res.mae_unmasked_baseline = masked_mean(discrepancy(baseline, clean), rec.mask, false);
      }
    }

    if (config.record_artifacts) {
      char name[32];
      std::snprintf(name, sizeof name, "trial_%04zu", i);
      const auto dir = config.artifact_dir / name;
      write_grid(dir / "clean.fdg", clean);
      write_grid(dir / "degraded.fdg", degraded);
      write_grid(dir / "mask.fdg", rec.mask);
      write_grid(dir / "attention.fdg", A);
      if (config.correct) {
        write_grid(dir / "weight.fdg", weights.grid());
        write_grid(dir / "output.fdg", output);
        write_grid(dir / "baseline.fdg", baseline);
      }
    }
  });
  return report;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

using Metric = std::optional<double> TrialResult::*;

struct NamedMetric {
  const char* name;
  Metric field;
};

constexpr NamedMetric kMetrics[] = {
    {"auc", &TrialResult::auc},
    {"attention_gap", &TrialResult::attention_gap},
    {"mse_masked_degraded", &TrialResult::mse_masked_degraded},
    {"mse_masked_output", &TrialResult::mse_masked_output},
    {"mse_masked_baseline", &TrialResult::mse_masked_baseline},
    {"mse_unmasked_output", &TrialResult::mse_unmasked_output},
    {"mse_unmasked_baseline", &TrialResult::mse_unmasked_baseline},
    {"mae_unmasked_output", &TrialResult::mae_unmasked_output},
    {"mae_unmasked_baseline", &TrialResult::mae_unmasked_baseline},
    {"mae_masked_degraded", &TrialResult::mae_masked_degraded},
    {"mse_output", &TrialResult::mse_output},
};

}  // namespace

nlohmann::ordered_json report_to_json(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["seed"] = report.seed;
  j["config"] = report.config_echo.is_null() ? nlohmann::ordered_json::object() : report.config_echo;

  auto trials = nlohmann::ordered_json::array();
  std::size_t beats = 0, compared = 0;
  std::vector<double> reduction;
  for (const TrialResult& t : report.trials) {
    nlohmann::ordered_json row;
    row["trial"] = t.trial;
    row["stream_seed"] = t.stream_seed;
    row["stream_id"] = t.stream_id;
    row["rect"] = {t.rect.x0, t.rect.y0, t.rect.x1, t.rect.y1};
    row["threshold"] = t.threshold;
    row["attention_mean"] = t.attention_mean;
    row["frac_attention_le2"] = t.frac_attention_le2;
    for (const auto& m : kMetrics) row[m.name] = opt(t.*(m.field));
    trials.push_back(std::move(row));
    if (t.mae_unmasked_output && t.mae_unmasked_baseline) {
      ++compared;
      if (*t.mae_unmasked_output < *t.mae_unmasked_baseline) ++beats;
    }
    if (t.mse_masked_output && t.mse_masked_degraded && *t.mse_masked_degraded > 0.0)
      reduction.push_back(1.0 - *t.mse_masked_output / *t.mse_masked_degraded);
  }
  j["trials"] = std::move(trials);

  nlohmann::ordered_json agg;
  auto summarize = [&](const char* name, const std::vector<double>& vals) {
    if (vals.empty()) {
      agg[name] = nullptr;
      return;
    }
    const auto [lo, hi] = median_ci(vals);
    agg[name] = {{"n", vals.size()}, {"median", median(vals)}, {"ci95_low", lo}, {"ci95_high", hi}};
  };
  for (const auto& m : kMetrics) {
    std::vector<double> vals;
    for (const TrialResult& t : report.trials)
      if (auto v = t.*(m.field)) vals.push_back(*v);
    summarize(m.name, vals);
  }
  {
    std::vector<double> le2;
    for (const TrialResult& t : report.trials) le2.push_back(t.frac_attention_le2);
    summarize("frac_attention_le2", le2);
  }
  summarize("masked_mse_reduction", reduction);
  agg["unmasked_beats_baseline"] = {{"wins", beats}, {"compared", compared}};
  j["aggregate"] = std::move(agg);
  return j;
}

std::vector<std::string> validate_report_json(const nlohmann::json& report) {
  std::vector<std::string> problems;
  auto need = [&](const nlohmann::json& obj, const char* key, nlohmann::json::value_t type,
                  const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(where + "." + key + " missing");
      return false;
    }
    const auto& v = obj.at(key);
    const bool numeric = type == nlohmann::json::value_t::number_float;
    if (numeric ? !v.is_number() : v.type() != type) {
      if (!(type == nlohmann::json::value_t::number_unsigned && v.is_number_integer())) {
        problems.push_back(where + "." + key + " has wrong type");
        return false;
      }
    }
    return true;
  };
  using vt = nlohmann::json::value_t;
  if (!report.is_object()) return {"report is not an object"};
  if (need(report, "schema_version", vt::number_unsigned, "$") &&
      report.at("schema_version").get<int>() != kReportSchemaVersion)
    problems.push_back("$.schema_version unsupported");
  need(report, "seed", vt::number_unsigned, "$");
  need(report, "config", vt::object, "$");
  need(report, "aggregate", vt::object, "$");
  if (need(report, "trials", vt::array, "$")) {
    std::size_t idx = 0;
    for (const auto& row : report.at("trials")) {
      const std::string where = "$.trials[" + std::to_string(idx++) + "]";
      need(row, "trial", vt::number_unsigned, where);
      need(row, "stream_seed", vt::number_unsigned, where);
      need(row, "stream_id", vt::number_unsigned, where);
      need(row, "rect", vt::array, where);
      need(row, "threshold", vt::number_float, where);
      need(row, "attention_mean", vt::number_float, where);
      need(row, "frac_attention_le2", vt::number_float, where);
      for (const auto& m : kMetrics) {
        if (!row.contains(m.name)) {
          problems.push_back(where + "." + m.name + " missing");
        } else if (!row.at(m.name).is_null() && !row.at(m.name).is_number()) {
          problems.push_back(where + "." + m.name + " has wrong type");
        }
      }
    }
  }
  return problems;
}

}  // namespace fcdiff
