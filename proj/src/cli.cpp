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

#include "fcdiff/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "fcdiff/config.hpp"
#include "fcdiff/error.hpp"
#include "fcdiff/grid_io.hpp"
#include "fcdiff/harness.hpp"
#include "fcdiff/projection.hpp"
#include "fcdiff/sampler.hpp"
#include "json.hpp"

namespace fcdiff {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr int kManifestSchemaVersion = 1;

// Purposes of the root stream's children. Fixed so that every artifact is a
// function of (config, seed) only.
constexpr std::uint64_t kInputStream = 0;
constexpr std::uint64_t kMainStream = 1;
constexpr std::uint64_t kValidationDrawStream = 2;
constexpr std::uint64_t kValidationStatsStream = 3;

struct Options {
  std::string subcommand;
  fs::path config;
  std::optional<std::uint64_t> seed;
  fs::path out = "out";
  int workers = 1;
  bool force = false;
  bool verbose = false;
};

class Run {
 public:
  Run(const Options& opt, std::ostream& out, std::ostream& err)
      : opt_(opt), out_(out), err_(err), cfg_(load_config(opt.config)) {
    seed_ = opt.seed ? *opt.seed : cfg_.seed.value_or(0);
    root_ = RngStream(seed_);
  }

  int dispatch() {
    const std::string& cmd = opt_.subcommand;
    if (cmd == "sample") return cmd_sample();
    if (cmd == "fuzzy") return cmd_fuzzy();
    if (cmd == "stats") return cmd_stats();
    if (cmd == "attend") return cmd_attend();
    if (cmd == "degrade") return cmd_degrade();
    if (cmd == "eval") return cmd_eval();
    throw ConfigError("unknown subcommand " + cmd);
  }

 private:
  void log(const std::string& msg) {
    if (opt_.verbose) err_ << "[fcdiff " << opt_.subcommand << "] " << msg << "\n";
  }

  // Refuses to clobber a previous run's primary artifact unless --force.
  void claim(const std::string& name) {
    fs::create_directories(opt_.out);
    if (fs::exists(opt_.out / name) && !opt_.force)
      throw IoError((opt_.out / name).string() + " already exists (use --force to overwrite)");
  }

  void emit_grid(const std::string& stem, const Grid& g, bool preview = true) {
    write_grid(opt_.out / (stem + ".fdg"), g);
    files_.push_back(stem + ".fdg");
    if (preview) {
      const std::string ext = g.channels() == 3 ? ".ppm" : ".pgm";
      write_pnm(opt_.out / (stem + ext), g);
      files_.push_back(stem + ext);
    }
  }

  void emit_json(const std::string& name, const Json& j) {
    write_file(opt_.out / name, j.dump(2) + "\n");
    files_.push_back(name);
  }

  Json manifest_base(const EpsilonModel& model, const NoiseSchedule& s) const {
    Json m;
    m["schema_version"] = kManifestSchemaVersion;
    m["subcommand"] = opt_.subcommand;
    m["seed"] = seed_;
    m["config"] = cfg_.raw;
    m["model_fingerprint"] = model.fingerprint();
    m["schedule_fingerprint"] = s.fingerprint();
    return m;
  }

  int finish(Json manifest) {
    manifest["files"] = files_;
    write_file(opt_.out / "manifest.json", manifest.dump(2) + "\n");
    out_ << "wrote " << files_.size() + 1 << " files to " << opt_.out.string() << "\n";
    return kExitOk;
  }

  Grid input_or_draw(const std::optional<fs::path>& path, const EpsilonModel& model,
                     const std::string& stem) {
    if (path) {
      Grid g = load_image(*path);
      if (g.shape() != model.shape())
        throw ShapeError("input " + path->string() + " does not match the model's grid shape");
      return g;
    }
    RngStream r = root_.child(kInputStream);
    Grid g = model.sample(r);
    emit_grid(stem, g);
    return g;
  }

  fs::path stats_dir() const {
    return cfg_.projection.stats_dir ? *cfg_.projection.stats_dir : opt_.out / "stats";
  }

  ValidationStats build_stats(const EpsilonModel& model, const NoiseSchedule& s) {
    const std::size_t n = cfg_.projection.validation_size;
    log("drawing " + std::to_string(n) + " validation members");
    const RngStream draws = root_.child(kValidationDrawStream);
    std::vector<Grid> V;
    V.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      RngStream r = draws.child(i);
      V.push_back(model.sample(r));
    }
    log("reconstructing validation set");
    return validation_stats(model, s, V, cfg_.projection_depths(), cfg_.projection.reps,
                            root_.child(kValidationStatsStream), opt_.workers);
  }

  int cmd_sample() {
    auto model = build_model(cfg_);
    const NoiseSchedule s = build_schedule(cfg_.schedule);
    claim("manifest.json");
    log("drawing " + std::to_string(cfg_.sample_count) + " samples");
    const auto samples =
        ancestral_batch(*model, s, cfg_.sample_count, root_.child(kMainStream), opt_.workers);
    char stem[32];
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::snprintf(stem, sizeof stem, "sample_%04zu", i);
      emit_grid(stem, samples[i]);
    }
    return finish(manifest_base(*model, s));
  }

  WeightMap checked_map(Grid g) const {
    bool out_of_range = false;
    for (double v : g.values()) out_of_range |= !(v >= 0.0 && v <= 1.0);
    if (out_of_range && cfg_.fuzzy.clamp) g = clamp_unit(g);
    return WeightMap(std::move(g));
  }

  int cmd_fuzzy() {
    auto model = build_model(cfg_);
    const NoiseSchedule s = build_schedule(cfg_.schedule);
    claim("manifest.json");
    const Shape map_shape{model->shape().height, model->shape().width, 1};

    std::vector<std::pair<std::string, WeightMap>> maps;
    Json m_echo;
    if (const auto* scalar = std::get_if<double>(&cfg_.fuzzy.m)) {
      maps.emplace_back("fuzzy", checked_map(Grid(map_shape, *scalar)));
      m_echo = *scalar;
    } else if (const auto* sweep = std::get_if<std::vector<double>>(&cfg_.fuzzy.m)) {
      char stem[48];
      for (std::size_t k = 0; k < sweep->size(); ++k) {
        std::snprintf(stem, sizeof stem, "fuzzy_%02zu_m%.3f", k, (*sweep)[k]);
        maps.emplace_back(stem, checked_map(Grid(map_shape, (*sweep)[k])));
      }
      m_echo = *sweep;
    } else {
      const auto& path = std::get<fs::path>(cfg_.fuzzy.m);
      maps.emplace_back("fuzzy", checked_map(read_grid(path)));
      m_echo = path.string();
    }
    const Grid cond = input_or_draw(cfg_.fuzzy.condition, *model, "condition");
    for (const auto& [stem, m] : maps) m.require_compatible(cond.shape());

    const RngStream main = root_.child(kMainStream);
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const auto& [stem, m] = maps[k];
      log("sampling " + stem);
      const RngStream branch = main.child(k);
      std::vector<Grid> outputs;
      std::vector<std::vector<Grid>> trajectories(cfg_.fuzzy.count);
      if (cfg_.sampler.record_trajectory) {
        for (std::size_t i = 0; i < cfg_.fuzzy.count; ++i) {
          RngStream r = branch.child(i);
          outputs.push_back(fuzzy_sample(*model, s, cond, m, cfg_.sampler, r, &trajectories[i]));
        }
      } else {
        outputs = fuzzy_batch(*model, s, cond, m, cfg_.sampler, cfg_.fuzzy.count, branch, opt_.workers);
      }
      char name[96];
      for (std::size_t i = 0; i < outputs.size(); ++i) {
        std::snprintf(name, sizeof name, "%s_%04zu", stem.c_str(), i);
        emit_grid(name, outputs[i]);
        for (std::size_t step = 0; step < trajectories[i].size(); ++step) {
          char tname[128];
          // trajectories[i][0] is x_T, the last entry is x_0
          std::snprintf(tname, sizeof tname, "%s_traj/t%04zu", name,
                        static_cast<std::size_t>(s.T()) - step);
          emit_grid(tname, trajectories[i][step], false);
        }
      }
    }
    Json manifest = manifest_base(*model, s);
    manifest["m"] = m_echo;
    return finish(manifest);
  }

  int cmd_stats() {
    auto model = build_model(cfg_);
    const NoiseSchedule s = build_schedule(cfg_.schedule);
    claim("manifest.json");
    const ValidationStats stats = build_stats(*model, s);
    const fs::path dir = opt_.out / "stats";
    save_stats(dir, stats);
    for (int t : stats.depths) {
      files_.push_back("stats/mu_" + std::to_string(t) + ".fdg");
      files_.push_back("stats/sigma_" + std::to_string(t) + ".fdg");
    }
    files_.push_back("stats/manifest.json");
    Json manifest = manifest_base(*model, s);
    manifest["depths"] = stats.depths;
    manifest["v_count"] = stats.v_count;
    manifest["reps"] = stats.reps;
    return finish(manifest);
  }

  ValidationStats require_stats(const EpsilonModel& model, const NoiseSchedule& s) {
    const fs::path dir = stats_dir();
    if (!fs::exists(dir / "manifest.json"))
      throw IoError("no validation stats at " + dir.string() + " (run `fcdiff stats` first)");
    ValidationStats stats = load_stats(dir);
    require_compatible_stats(stats, model, s, cfg_.projection.reps);
    return stats;
  }

  int cmd_attend() {
    auto model = build_model(cfg_);
    const NoiseSchedule s = build_schedule(cfg_.schedule);
    const ValidationStats stats = require_stats(*model, s);
    claim("manifest.json");
    const Grid x = input_or_draw(cfg_.attend_input, *model, "input");
    RngStream r = root_.child(kMainStream);
    const AttentionMap A = attention_map(x, stats, *model, s, cfg_.projection.reps, r);
    const WeightMap m = weight_from_attention(A);
    emit_grid("attention", A.grid(), false);
    Grid preview = A.grid();
    for (double& v : preview.values()) v = (v - kAttentionMin) / (kAttentionMax - kAttentionMin);
    write_pnm(opt_.out / "attention.pgm", preview);
    files_.push_back("attention.pgm");
    emit_grid("weight", m.grid());
    Json manifest = manifest_base(*model, s);
    manifest["depths"] = stats.depths;
    manifest["stats_v_count"] = stats.v_count;
    return finish(manifest);
  }

  int cmd_degrade() {
    auto model = build_model(cfg_);
    const NoiseSchedule s = build_schedule(cfg_.schedule);
    claim("manifest.json");
    const Grid x = input_or_draw(cfg_.degrade_input, *model, "clean");
    DegradationParams params = cfg_.degradation;
    params.data_mean = model->marginal_mean();
    params.data_std = model->marginal_std();
    RngStream r = root_.child(kMainStream);
    const auto [degraded, rec] = degrade(x, params, r);
    emit_grid("degraded", degraded);
    emit_grid("mask", rec.mask);
    Json record;
    record["rect"] = {rec.rect.x0, rec.rect.y0, rec.rect.x1, rec.rect.y1};
    record["threshold"] = rec.threshold;
    emit_json("degradation.json", record);
    return finish(manifest_base(*model, s));
  }

  int cmd_eval() {
    auto model = build_model(cfg_);
    const NoiseSchedule s = build_schedule(cfg_.schedule);
    claim("report.json");
    ValidationStats stats;
    if (fs::exists(stats_dir() / "manifest.json")) {
      stats = require_stats(*model, s);
    } else {
      stats = build_stats(*model, s);
      save_stats(stats_dir(), stats);
    }
    ExperimentConfig ec;
    ec.trials = cfg_.eval.trials;
    ec.sampler = cfg_.sampler;
    ec.sampler.record_trajectory = false;
    ec.reps = cfg_.projection.reps;
    ec.degradation = cfg_.degradation;
    ec.degradation.data_mean = model->marginal_mean();
    ec.degradation.data_std = model->marginal_std();
    ec.correct = cfg_.eval.correct;
    ec.baseline_depth = cfg_.eval.baseline_depth.value_or(-1);
    ec.record_artifacts = cfg_.eval.record_artifacts;
    ec.artifact_dir = opt_.out / "trials";
    log("running " + std::to_string(ec.trials) + " trials");
    ExperimentReport report =
        run_correction_experiment(*model, s, stats, ec, root_.child(kMainStream), opt_.workers);
    report.config_echo = cfg_.raw;
    report.seed = seed_;
    Json j = report_to_json(report);
    j["model_fingerprint"] = model->fingerprint();
    j["schedule_fingerprint"] = s.fingerprint();
    const auto problems = validate_report_json(nlohmann::json::parse(j.dump()));
    if (!problems.empty()) throw Error("internal: report failed schema validation: " + problems.front());
    write_file(opt_.out / "report.json", j.dump(2) + "\n");
    out_ << "wrote " << (opt_.out / "report.json").string() << "\n";
    return kExitOk;
  }

  const Options& opt_;
  std::ostream& out_;
  std::ostream& err_;
  RunConfig cfg_;
  std::uint64_t seed_ = 0;
  RngStream root_{0};
  std::vector<std::string> files_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fuzzy-conditioned diffusion sampling and projection attention"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  for (const char* name : {"sample", "fuzzy", "stats", "attend", "degrade", "eval"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", opt.config, "JSON config file")->required();
    sub->add_option("--seed", seed, "root random seed (overrides config)");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--force", opt.force, "overwrite existing outputs");
    sub->add_flag("-v,--verbose", opt.verbose, "progress on stderr");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fcdiff: " << e.what() << "\n";
    return kExitConfig;
  }
  for (const auto* sub : app.get_subcommands()) {
    opt.subcommand = sub->get_name();
    if (sub->count("--seed") > 0) opt.seed = seed;
  }

  try {
    Run run(opt, out, err);
    return run.dispatch();
  } catch (const ConfigError& e) {
    err << "fcdiff: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "fcdiff: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "fcdiff: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "fcdiff: validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "fcdiff: error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace fcdiff
