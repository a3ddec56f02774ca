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

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcdiff/grid.hpp"
#include "fcdiff/rng.hpp"
#include "fcdiff/schedule.hpp"

namespace fcdiff {

/// Noise predictor contract: given x_t at step t, estimate the injected
/// standard-normal noise. Implementations here are exact conditional means
/// of analytic data distributions, so they also expose the noised marginal
/// density, direct data draws and the data moments.
class EpsilonModel {
 public:
  virtual ~EpsilonModel() = default;

  virtual const Shape& shape() const = 0;

  /// eps_hat(x_t, t) for 1 <= t <= T. Output has the input's shape.
  virtual Grid predict(const Grid& x_t, int t, const NoiseSchedule& s) const = 0;

  /// log p_t(x_t) of the noised marginal, 0 <= t <= T.
  virtual double log_marginal(const Grid& x_t, int t, const NoiseSchedule& s) const = 0;

  /// One draw from the data distribution q(x_0).
  virtual Grid sample(RngStream& rng) const = 0;

  /// Per-entry data mean and full covariance over the flattened grid.
  virtual Grid mean() const = 0;
  virtual Eigen::MatrixXd covariance() const = 0;

  /// Scalar marginal moments averaged over entries.
  virtual double marginal_mean() const = 0;
  virtual double marginal_std() const = 0;

  virtual std::string fingerprint() const = 0;

 protected:
  void require_input(const Grid& x_t, const char* what) const;
};

/// Multivariate Gaussian data N(mu, Sigma) over the flattened grid.
///
/// Sigma is eigendecomposed once (Sigma = U diag(lambda) U^T). For
/// a = sqrt(alpha_bar_t), s2 = 1 - alpha_bar_t and r = x_t - a mu:
///   eps_hat = sqrt(s2) * U diag(1 / (a^2 lambda + s2)) U^T r,
/// which equals (x_t - a E[x_0 | x_t]) / sqrt(s2).
class GaussianFieldModel final : public EpsilonModel {
 public:
  GaussianFieldModel(Grid mean, const Eigen::MatrixXd& covariance);

  const Shape& shape() const override { return mean_.shape(); }
  Grid predict(const Grid& x_t, int t, const NoiseSchedule& s) const override;
  double log_marginal(const Grid& x_t, int t, const NoiseSchedule& s) const override;
  Grid sample(RngStream& rng) const override;
  Grid mean() const override { return mean_; }
  Eigen::MatrixXd covariance() const override;
  double marginal_mean() const override;
  double marginal_std() const override;
  std::string fingerprint() const override;

  const Eigen::MatrixXd& eigvecs() const { return eigvecs_; }
  const Eigen::VectorXd& eigvals() const { return eigvals_; }

  /// E[x_0 | x_t].
  Grid posterior_mean(const Grid& x_t, int t, const NoiseSchedule& s) const;

 private:
  Grid mean_;
  Eigen::MatrixXd eigvecs_;
  Eigen::VectorXd eigvals_;
  std::string fingerprint_;
};

/// Sigma_ij = variance * exp(-d_ij / length) between pixels of the same
/// channel at Euclidean pixel distance d_ij; channels are independent.
Eigen::MatrixXd exponential_covariance(const Shape& shape, double variance, double length);

GaussianFieldModel make_gaussian_field(const Shape& shape, double mean, double variance,
                                       double correlation_length);

struct GmmComponent {
  double weight;
  double mean;
  double variance;
};

/// Every entry drawn independently from the same 1-D Gaussian mixture.
/// Responsibilities are evaluated in log space.
class GmmPixelModel final : public EpsilonModel {
 public:
  GmmPixelModel(Shape shape, std::vector<GmmComponent> components);

  const Shape& shape() const override { return shape_; }
  Grid predict(const Grid& x_t, int t, const NoiseSchedule& s) const override;
  double log_marginal(const Grid& x_t, int t, const NoiseSchedule& s) const override;
  Grid sample(RngStream& rng) const override;
  Grid mean() const override;
  Eigen::MatrixXd covariance() const override;
  double marginal_mean() const override;
  double marginal_std() const override;
  std::string fingerprint() const override;

  const std::vector<GmmComponent>& components() const { return components_; }

 private:
  Shape shape_;
  std::vector<GmmComponent> components_;
};

}  // namespace fcdiff
