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

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "fcdiff/denoiser.hpp"
#include "fcdiff/grid.hpp"
#include "fcdiff/schedule.hpp"

// Reference computations written independently of the library code paths:
// dense solves instead of eigenbases, direct densities instead of log space.
namespace oracle {

inline Eigen::VectorXd flat(const fcdiff::Grid& g) {
  return Eigen::Map<const Eigen::VectorXd>(g.values().data(), static_cast<Eigen::Index>(g.size()));
}

/// E[x0 | x_t] for N(mu, Sigma) data by a dense LDLT solve.
inline Eigen::VectorXd gaussian_posterior_mean(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                                               const Eigen::VectorXd& xt, double ab) {
  const auto D = mu.size();
  const Eigen::MatrixXd K = ab * cov + (1.0 - ab) * Eigen::MatrixXd::Identity(D, D);
  return mu + std::sqrt(ab) * cov * K.ldlt().solve(xt - std::sqrt(ab) * mu);
}

inline Eigen::VectorXd gaussian_eps(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                                    const Eigen::VectorXd& xt, double ab) {
  return (xt - std::sqrt(ab) * gaussian_posterior_mean(mu, cov, xt, ab)) / std::sqrt(1.0 - ab);
}

/// Scalar mixture posterior mean with plain (non-log) densities.
inline double gmm_eps(const std::vector<fcdiff::GmmComponent>& comps, double xt, double ab) {
  const double a = std::sqrt(ab);
  double norm = 0.0, num = 0.0;
  for (const auto& c : comps) {
    const double v = ab * c.variance + 1.0 - ab;
    const double d = xt - a * c.mean;
    const double p = c.weight * std::exp(-0.5 * d * d / v) / std::sqrt(2.0 * M_PI * v);
    norm += p;
    num += p * (c.mean + a * c.variance / v * d);
  }
  const double x0 = num / norm;
  return (xt - a * x0) / std::sqrt(1.0 - ab);
}

/// Central finite difference of log p_t along coordinate i.
inline double fd_score(const fcdiff::EpsilonModel& model, const fcdiff::Grid& x, std::size_t i,
                       int t, const fcdiff::NoiseSchedule& s, double h) {
  fcdiff::Grid up = x, dn = x;
  up[i] += h;
  dn[i] -= h;
  return (model.log_marginal(up, t, s) - model.log_marginal(dn, t, s)) / (2.0 * h);
}

/// Sample variance (n - 1 denominator).
inline double variance(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace oracle
