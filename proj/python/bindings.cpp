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

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fcdiff/cli.hpp"
#include "fcdiff/denoiser.hpp"
#include "fcdiff/error.hpp"
#include "fcdiff/grid_io.hpp"
#include "fcdiff/harness.hpp"
#include "fcdiff/projection.hpp"
#include "fcdiff/sampler.hpp"
#include "fcdiff/schedule.hpp"

namespace py = pybind11;
using namespace fcdiff;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W) arrays are read as single-channel grids.
Grid to_grid(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected an array of shape (H, W) or (H, W, C)");
  const Shape shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                    a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1};
  return Grid(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Grid& g) {
  Array out({g.height(), g.width(), g.channels()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

std::vector<Grid> to_grids(const std::vector<Array>& arrays) {
  std::vector<Grid> out;
  out.reserve(arrays.size());
  for (const auto& a : arrays) out.push_back(to_grid(a));
  return out;
}

std::vector<Array> to_arrays(const std::vector<Grid>& grids) {
  std::vector<Array> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.push_back(to_array(g));
  return out;
}

Shape to_shape(const std::tuple<std::size_t, std::size_t, std::size_t>& t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t)};
}

WeightMap to_weights(const py::object& m, const Shape& image) {
  if (py::isinstance<py::float_>(m) || py::isinstance<py::int_>(m))
    return WeightMap::uniform(image, m.cast<double>());
  return WeightMap(to_grid(m.cast<Array>()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fuzzy-conditioned diffusion with analytic denoiser oracles";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", validation.ptr());
  py::register_exception<IndexError>(m, "IndexError", validation.ptr());
  py::register_exception<FingerprintMismatch>(m, "FingerprintMismatch", validation.ptr());

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream_id") = 0)
      .def_property_readonly("seed", &RngStream::seed)
      .def_property_readonly("stream_id", &RngStream::stream_id)
      .def("uniform", py::overload_cast<>(&RngStream::uniform))
      .def("normal", &RngStream::normal)
      .def("next_u64", &RngStream::next_u64)
      .def("child", &RngStream::child, py::arg("index"));

  m.def("randn_grid", [](const std::tuple<std::size_t, std::size_t, std::size_t>& shape, RngStream& rng) {
    return to_array(randn_grid(to_shape(shape), rng));
  });

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init<std::vector<double>>(), py::arg("betas"))
      .def_property_readonly("T", &NoiseSchedule::T)
      .def("beta", &NoiseSchedule::beta)
      .def("alpha", &NoiseSchedule::alpha)
      .def("alpha_bar", &NoiseSchedule::alpha_bar)
      .def("beta_tilde", &NoiseSchedule::beta_tilde)
      .def("fingerprint", &NoiseSchedule::fingerprint);
  m.def("linear_schedule", &linear_schedule, py::arg("T") = 1000, py::arg("beta_start") = 1e-4,
        py::arg("beta_end") = 0.02);
  m.def("posterior_mean_coeffs", [](const NoiseSchedule& s, int t) {
    const auto c = posterior_mean_coeffs(s, t);
    return std::make_pair(c.c0, c.ct);
  });

  py::class_<EpsilonModel>(m, "EpsilonModel")
      .def_property_readonly("shape", [](const EpsilonModel& e) {
        const Shape& s = e.shape();
        return py::make_tuple(s.height, s.width, s.channels);
      })
      .def("predict", [](const EpsilonModel& e, const Array& x, int t, const NoiseSchedule& s) {
        return to_array(e.predict(to_grid(x), t, s));
      })
      .def("log_marginal", [](const EpsilonModel& e, const Array& x, int t, const NoiseSchedule& s) {
        return e.log_marginal(to_grid(x), t, s);
      })
      .def("sample", [](const EpsilonModel& e, RngStream& rng) { return to_array(e.sample(rng)); })
      .def("mean", [](const EpsilonModel& e) { return to_array(e.mean()); })
      .def("covariance", &EpsilonModel::covariance)
      .def("marginal_mean", &EpsilonModel::marginal_mean)
      .def("marginal_std", &EpsilonModel::marginal_std)
      .def("fingerprint", &EpsilonModel::fingerprint);

  py::class_<GaussianFieldModel, EpsilonModel>(m, "GaussianFieldModel")
      .def(py::init([](const Array& mean, const Eigen::MatrixXd& cov) {
             return GaussianFieldModel(to_grid(mean), cov);
           }),
           py::arg("mean"), py::arg("covariance"));
  m.def("make_gaussian_field",
        [](const std::tuple<std::size_t, std::size_t, std::size_t>& shape, double mean, double variance,
           double length) { return make_gaussian_field(to_shape(shape), mean, variance, length); },
        py::arg("shape") = std::make_tuple(8, 8, 1), py::arg("mean") = 0.5, py::arg("variance") = 0.04,
        py::arg("correlation_length") = 2.0);

  py::class_<GmmPixelModel, EpsilonModel>(m, "GmmPixelModel")
      .def(py::init([](const std::tuple<std::size_t, std::size_t, std::size_t>& shape,
                       const std::vector<std::tuple<double, double, double>>& comps) {
             std::vector<GmmComponent> cs;
             for (const auto& [w, mu, var] : comps) cs.push_back({w, mu, var});
             return GmmPixelModel(to_shape(shape), cs);
           }),
           py::arg("shape"), py::arg("components"));

  m.def("forward_sample", [](const Array& x0, int t, const NoiseSchedule& s, RngStream& rng) {
    return to_array(forward_sample(to_grid(x0), t, s, rng));
  });
  m.def("reverse_step", [](const EpsilonModel& e, const Array& x, int t, const NoiseSchedule& s, RngStream& rng) {
    return to_array(reverse_step(e, to_grid(x), t, s, rng));
  });
  m.def("ancestral_sample", [](const EpsilonModel& e, const NoiseSchedule& s, RngStream& rng) {
    Grid g;
    {
      py::gil_scoped_release release;
      g = ancestral_sample(e, s, rng);
    }
    return to_array(g);
  });
  m.def(
      "ancestral_batch",
      [](const EpsilonModel& e, const NoiseSchedule& s, std::size_t count, const RngStream& rng, int workers) {
        std::vector<Grid> out;
        {
          py::gil_scoped_release release;
          out = ancestral_batch(e, s, count, rng, workers);
        }
        return to_arrays(out);
      },
      py::arg("model"), py::arg("schedule"), py::arg("count"), py::arg("rng"), py::arg("workers") = 1);

  m.def("fuzzy_fuse", [](const Array& xs, const Array& xr, const Array& xc, const py::object& w, int t,
                         const NoiseSchedule& s) {
    const Grid c = to_grid(xc);
    return to_array(fuzzy_fuse(to_grid(xs), to_grid(xr), c, to_weights(w, c.shape()), t, s));
  });
  m.def(
      "fuzzy_sample",
      [](const EpsilonModel& e, const NoiseSchedule& s, const Array& cond, const py::object& w, int J,
         RngStream& rng) {
        const Grid c = to_grid(cond);
        const WeightMap weights = to_weights(w, c.shape());
        Grid out;
        {
          py::gil_scoped_release release;
          out = fuzzy_sample(e, s, c, weights, {J, false}, rng);
        }
        return to_array(out);
      },
      py::arg("model"), py::arg("schedule"), py::arg("condition"), py::arg("m"), py::arg("J") = 5,
      py::arg("rng"));
  m.def(
      "fuzzy_batch",
      [](const EpsilonModel& e, const NoiseSchedule& s, const Array& cond, const py::object& w, int J,
         std::size_t count, const RngStream& rng, int workers) {
        const Grid c = to_grid(cond);
        const WeightMap weights = to_weights(w, c.shape());
        std::vector<Grid> out;
        {
          py::gil_scoped_release release;
          out = fuzzy_batch(e, s, c, weights, {J, false}, count, rng, workers);
        }
        return to_arrays(out);
      },
      py::arg("model"), py::arg("schedule"), py::arg("condition"), py::arg("m"), py::arg("J") = 5,
      py::arg("count"), py::arg("rng"), py::arg("workers") = 1);

  py::class_<ValidationStats>(m, "ValidationStats")
      .def_readonly("depths", &ValidationStats::depths)
      .def_readonly("v_count", &ValidationStats::v_count)
      .def_readonly("reps", &ValidationStats::reps)
      .def_readonly("sigma_floor", &ValidationStats::sigma_floor)
      .def_property_readonly("mu", [](const ValidationStats& v) { return to_arrays(v.mu); })
      .def_property_readonly("sigma", [](const ValidationStats& v) { return to_arrays(v.sigma); });
  m.def(
      "validation_stats",
      [](const EpsilonModel& e, const NoiseSchedule& s, const std::vector<Array>& V,
         const std::vector<int>& depths, int reps, const RngStream& rng, int workers) {
        const auto grids = to_grids(V);
        py::gil_scoped_release release;
        return validation_stats(e, s, grids, depths, reps, rng, workers);
      },
      py::arg("model"), py::arg("schedule"), py::arg("validation"), py::arg("depths"), py::arg("reps") = 1,
      py::arg("rng"), py::arg("workers") = 1);
  m.def("save_stats", &save_stats);
  m.def("load_stats", &load_stats);
  m.def(
      "attention_map",
      [](const Array& x, const ValidationStats& st, const EpsilonModel& e, const NoiseSchedule& s, int reps,
         RngStream& rng) { return to_array(attention_map(to_grid(x), st, e, s, reps, rng).grid()); },
      py::arg("x"), py::arg("stats"), py::arg("model"), py::arg("schedule"), py::arg("reps") = 1,
      py::arg("rng"));
  m.def("weight_from_attention",
        [](const Array& a) { return to_array(weight_from_attention(AttentionMap(to_grid(a))).grid()); });

  m.def(
      "degrade",
      [](const Array& x, const EpsilonModel& e, RngStream& rng) {
        auto [out, rec] = degrade(to_grid(x), DegradationParams::for_model(e), rng);
        py::dict record;
        record["rect"] = py::make_tuple(rec.rect.x0, rec.rect.y0, rec.rect.x1, rec.rect.y1);
        record["threshold"] = rec.threshold;
        record["mask"] = to_array(rec.mask);
        return py::make_tuple(to_array(out), record);
      },
      py::arg("x"), py::arg("model"), py::arg("rng"));
  m.def("ks_two_sample", [](const std::vector<double>& a, const std::vector<double>& b) {
    return ks_two_sample(a, b);
  });
  m.def("ks_critical_value", &ks_critical_value);
  m.def("pixel_auc", [](const Array& score, const Array& mask) { return pixel_auc(to_grid(score), to_grid(mask)); });

  m.def("read_grid", [](const std::filesystem::path& p) { return to_array(read_grid(p)); });
  m.def("write_grid", [](const std::filesystem::path& p, const Array& a) { write_grid(p, to_grid(a)); });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
