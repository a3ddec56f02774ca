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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fcdiff/denoiser.hpp"
#include "fcdiff/error.hpp"
#include "fcdiff/rng.hpp"
#include "fcdiff/sampler.hpp"
#include "oracles.hpp"

using namespace fcdiff;

namespace {

GaussianFieldModel standard_scalar() {
  return GaussianFieldModel(Grid({1, 1, 1}, 0.0), Eigen::MatrixXd::Identity(1, 1));
}

const std::vector<GmmComponent> kSymmetric = {{0.5, -1.0, 0.01}, {0.5, 1.0, 0.01}};
const std::vector<GmmComponent> kDefaultGmm = {{0.5, 0.25, 0.005}, {0.5, 0.75, 0.005}};

// A schedule with a single step whose alpha_bar is exactly `ab`.
NoiseSchedule one_step(double ab) { return NoiseSchedule({1.0 - ab}); }

}  // namespace

TEST_CASE("scalar standard-normal data at alpha_bar = 0.5") {
  const auto model = standard_scalar();
  const auto s = one_step(0.5);
  for (double x : {-2.0, 0.3, 1.7}) {
    const Grid eps = model.predict(Grid({1, 1, 1}, x), 1, s);
    CHECK(eps[0] == doctest::Approx(std::sqrt(0.5) * x).epsilon(1e-12));
  }
}

TEST_CASE("deterministic data gives the degenerate posterior") {
  const Grid mu({2, 2, 1}, {0.1, 0.4, -0.3, 0.9});
  const GaussianFieldModel model(mu, Eigen::MatrixXd::Zero(4, 4));
  const auto s = linear_schedule(100, 1e-4, 0.02);
  const Grid xt({2, 2, 1}, {0.5, -0.5, 0.2, 0.0});
  for (int t : {1, 40, 100}) {
    const double ab = s.alpha_bar(t);
    const Grid eps = model.predict(xt, t, s);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(std::abs(eps[i] - (xt[i] - std::sqrt(ab) * mu[i]) / std::sqrt(1.0 - ab)) < 1e-12);
  }
}

TEST_CASE("prediction vanishes at the scaled mean") {
  const auto model = make_gaussian_field({4, 4, 1}, 0.5, 0.04, 2.0);
  const auto s = linear_schedule(200, 1e-4, 0.02);
  for (int t : {1, 100, 200}) {
    const Grid xt = scaled(model.mean(), std::sqrt(s.alpha_bar(t)));
    const Grid eps = model.predict(xt, t, s);
    for (double v : eps.values()) CHECK(std::abs(v) < 1e-14);
  }
}

TEST_CASE("gaussian prediction matches a dense solve") {
  const auto model = make_gaussian_field({4, 4, 2}, 0.5, 0.04, 2.0);
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  const Eigen::VectorXd mu = oracle::flat(model.mean());
  const Eigen::MatrixXd cov = exponential_covariance(model.shape(), 0.04, 2.0);
  RngStream rng(31);
  for (int t : {1, 100, 500, 999}) {
    const Grid xt = randn_grid(model.shape(), rng);
    const Eigen::VectorXd want = oracle::gaussian_eps(mu, cov, oracle::flat(xt), s.alpha_bar(t));
    const Eigen::VectorXd got = oracle::flat(model.predict(xt, t, s));
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-10);

    const Eigen::VectorXd pm = oracle::flat(model.posterior_mean(xt, t, s));
    CHECK((pm - oracle::gaussian_posterior_mean(mu, cov, oracle::flat(xt), s.alpha_bar(t)))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("exponential covariance structure") {
  const Eigen::MatrixXd c = exponential_covariance({2, 2, 2}, 0.04, 2.0);
  CHECK(c(0, 0) == doctest::Approx(0.04));
  CHECK(c(0, 1) == 0.0);  // different channels
  CHECK(c(0, 2) == doctest::Approx(0.04 * std::exp(-0.5)));
  CHECK(c(0, 6) == doctest::Approx(0.04 * std::exp(-std::sqrt(2.0) / 2.0)));
  CHECK(c.isApprox(c.transpose()));
}

TEST_CASE("gaussian field rejects invalid covariances") {
  const Grid mu({1, 2, 1}, 0.0);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(GaussianFieldModel(mu, asym), ValidationError);
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianFieldModel(mu, indefinite), ValidationError);
  CHECK_THROWS_AS(GaussianFieldModel(mu, Eigen::MatrixXd::Identity(3, 3)), ShapeError);
}

TEST_CASE("single-component mixture equals scalar gaussian prediction") {
  const GmmPixelModel gmm({1, 1, 1}, {{1.0, 0.3, 0.2}});
  Eigen::MatrixXd cov(1, 1);
  cov << 0.2;
  const GaussianFieldModel gauss(Grid({1, 1, 1}, 0.3), cov);
  const auto s = linear_schedule(50, 1e-4, 0.05);
  for (int t : {1, 10, 50})
    for (double x : {-1.0, 0.0, 0.4, 2.5}) {
      const Grid xt({1, 1, 1}, x);
      CHECK(gmm.predict(xt, t, s)[0] == doctest::Approx(gauss.predict(xt, t, s)[0]).epsilon(1e-12));
    }
}

TEST_CASE("symmetric mixture") {
  const GmmPixelModel gmm({1, 1, 1}, kSymmetric);
  const auto s = linear_schedule(100, 1e-4, 0.02);
  for (int t : {1, 50, 100}) {
    CHECK(gmm.predict(Grid({1, 1, 1}, 0.0), t, s)[0] == 0.0);
    for (double x : {0.3, 1.1, 2.0})
      CHECK(gmm.log_marginal(Grid({1, 1, 1}, x), t, s) ==
            doctest::Approx(gmm.log_marginal(Grid({1, 1, 1}, -x), t, s)).epsilon(1e-14));
  }
}

TEST_CASE("mixture near one component follows that component") {
  const GmmPixelModel gmm({1, 1, 1}, kSymmetric);
  const GmmPixelModel plus({1, 1, 1}, {{1.0, 1.0, 0.01}});
  const auto s = one_step(0.99);
  const Grid xt({1, 1, 1}, 0.995 * std::sqrt(0.99));
  CHECK(std::abs(gmm.predict(xt, 1, s)[0] - plus.predict(xt, 1, s)[0]) < 1e-3);
}

TEST_CASE("mixture prediction matches the direct-density oracle") {
  const GmmPixelModel gmm({3, 3, 1}, kDefaultGmm);
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  RngStream rng(8);
  for (int t : {5, 100, 500, 1000}) {
    const Grid xt = randn_grid(gmm.shape(), rng);
    const Grid eps = gmm.predict(xt, t, s);
    for (std::size_t i = 0; i < xt.size(); ++i)
      CHECK(eps[i] == doctest::Approx(oracle::gmm_eps(kDefaultGmm, xt[i], s.alpha_bar(t))).epsilon(1e-10));
  }
}

TEST_CASE("mixture prediction stays finite where direct densities underflow") {
  const GmmPixelModel gmm({1, 1, 1}, kDefaultGmm);
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  const Grid far({1, 1, 1}, 40.0);
  const Grid eps = gmm.predict(far, 1, s);
  CHECK(std::isfinite(eps[0]));
  CHECK(std::isfinite(gmm.log_marginal(far, 1, s)));
}

TEST_CASE("log marginal of standard-normal data is invariant") {
  const auto model = standard_scalar();
  const auto s = linear_schedule(100, 1e-4, 0.02);
  for (int t : {0, 1, 50, 100})
    CHECK(model.log_marginal(Grid({1, 1, 1}, 0.0), t, s) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("marginal densities integrate to one") {
  const auto s = linear_schedule(100, 1e-4, 0.02);
  const auto gauss = standard_scalar();
  const GmmPixelModel gmm({1, 1, 1}, kDefaultGmm);
  const GmmPixelModel sym({1, 1, 1}, kSymmetric);
  for (const EpsilonModel* model : {static_cast<const EpsilonModel*>(&gauss),
                                    static_cast<const EpsilonModel*>(&gmm),
                                    static_cast<const EpsilonModel*>(&sym)}) {
    for (int t : {1, 10, 100}) {
      // Composite Simpson on [-12, 12] with h = 1e-4.
      const double lo = -12.0, hi = 12.0;
      const int n = 240000;
      const double h = (hi - lo) / n;
      double sum = 0.0;
      for (int k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        sum += w * std::exp(model->log_marginal(Grid({1, 1, 1}, lo + k * h), t, s));
      }
      CHECK(std::abs(sum * h / 3.0 - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("score identity against finite differences, D = 1") {
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  const auto gauss = standard_scalar();
  const GmmPixelModel gmm({1, 1, 1}, kDefaultGmm);
  for (const EpsilonModel* model : {static_cast<const EpsilonModel*>(&gauss),
                                    static_cast<const EpsilonModel*>(&gmm)}) {
    for (int t : {100, 500, 900}) {
      const double sd = std::sqrt(1.0 - s.alpha_bar(t));
      for (double x : {-0.4, 0.2, 0.55, 1.3}) {
        const Grid xt({1, 1, 1}, x);
        const double eps = model->predict(xt, t, s)[0];
        const double fd = -sd * oracle::fd_score(*model, xt, 0, t, s, 1e-5);
        CHECK(std::abs(eps - fd) <= 1e-5 * std::max(std::abs(eps), 1e-3));
      }
    }
  }
}

TEST_CASE("score identity against finite differences, D = 64") {
  const auto model = make_gaussian_field({8, 8, 1}, 0.5, 0.04, 2.0);
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  RngStream rng(64);
  for (int t : {100, 500, 900}) {
    const double sd = std::sqrt(1.0 - s.alpha_bar(t));
    Grid xt = forward_sample(model.sample(rng), t, s, rng);
    const Grid eps = model.predict(xt, t, s);
    for (int k = 0; k < 5; ++k) {
      const auto i = static_cast<std::size_t>(rng.uniform_int(0, 63));
      const double fd = -sd * oracle::fd_score(model, xt, i, t, s, 1e-5);
      CHECK(std::abs(eps[i] - fd) <= 1e-5 * std::max(std::abs(eps[i]), 1e-3));
    }
  }
}

TEST_CASE("conditional mean beats perturbed predictors in MSE") {
  const auto s = linear_schedule(1000, 1e-4, 0.02);
  const auto gauss = make_gaussian_field({4, 4, 1}, 0.5, 0.04, 2.0);
  const GmmPixelModel gmm({4, 4, 1}, kDefaultGmm);
  for (const EpsilonModel* model : {static_cast<const EpsilonModel*>(&gauss),
                                    static_cast<const EpsilonModel*>(&gmm)}) {
    RngStream rng(77);
    for (int t : {50, 300, 800}) {
      double exact = 0.0, lo = 0.0, hi = 0.0;
      for (int n = 0; n < 4000; ++n) {
        const Grid x0 = model->sample(rng);
        const Grid eps = randn_grid(x0.shape(), rng);
        const Grid xt = forward_sample_with_noise(x0, t, s, eps);
        const Grid pred = model->predict(xt, t, s);
        for (std::size_t i = 0; i < eps.size(); ++i) {
          exact += std::pow(eps[i] - pred[i], 2);
          lo += std::pow(eps[i] - 0.9 * pred[i], 2);
          hi += std::pow(eps[i] - 1.1 * pred[i], 2);
        }
      }
      CHECK(exact < lo);
      CHECK(exact < hi);
    }
  }
}

TEST_CASE("predict checks shapes and step range") {
  const auto model = make_gaussian_field({2, 2, 1}, 0.0, 1.0, 1.0);
  const GmmPixelModel gmm({2, 2, 1}, kDefaultGmm);
  const auto s = linear_schedule(10, 1e-4, 0.02);
  CHECK_THROWS_AS(model.predict(Grid({2, 3, 1}), 1, s), ShapeError);
  CHECK_THROWS_AS(gmm.predict(Grid({2, 2, 2}), 1, s), ShapeError);
  CHECK_THROWS_AS(model.predict(Grid({2, 2, 1}), 0, s), IndexError);
  CHECK_THROWS_AS(gmm.predict(Grid({2, 2, 1}), 11, s), IndexError);
}

TEST_CASE("gmm rejects invalid mixtures") {
  CHECK_THROWS_AS(GmmPixelModel({1, 1, 1}, {}), ConfigError);
  CHECK_THROWS_AS(GmmPixelModel({1, 1, 1}, {{0.5, 0.0, 1.0}}), ConfigError);
  CHECK_THROWS_AS(GmmPixelModel({1, 1, 1}, {{1.0, 0.0, 0.0}}), ConfigError);
}

TEST_CASE("direct draws match model moments") {
  const GmmPixelModel gmm({1, 1, 1}, kDefaultGmm);
  RngStream rng(5);
  std::vector<double> v;
  for (int i = 0; i < 100000; ++i) v.push_back(gmm.sample(rng)[0]);
  const double sd = gmm.marginal_std();
  CHECK(sd == doctest::Approx(std::sqrt(0.005 + 0.0625)));
  CHECK(std::abs(oracle::variance(v) - sd * sd) < 0.02 * sd * sd);
}

TEST_CASE("model fingerprints are stable and parameter sensitive") {
  CHECK(make_gaussian_field({2, 2, 1}, 0.5, 0.04, 2.0).fingerprint() ==
        make_gaussian_field({2, 2, 1}, 0.5, 0.04, 2.0).fingerprint());
  CHECK(make_gaussian_field({2, 2, 1}, 0.5, 0.04, 2.0).fingerprint() !=
        make_gaussian_field({2, 2, 1}, 0.5, 0.04, 2.5).fingerprint());
  CHECK(GmmPixelModel({2, 2, 1}, kDefaultGmm).fingerprint() !=
        GmmPixelModel({2, 2, 1}, kSymmetric).fingerprint());
}
