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

#include "fcdiff/denoiser.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fcdiff/error.hpp"

namespace fcdiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void append_bits(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(bits >> (8 * i)));
}

std::string shape_tag(const Shape& s) {
  std::ostringstream os;
  os << s.height << "x" << s.width << "x" << s.channels;
  return os.str();
}

Eigen::Map<const Eigen::VectorXd> as_vector(const Grid& g) {
  return {g.values().data(), static_cast<Eigen::Index>(g.size())};
}

}  // namespace

void EpsilonModel::require_input(const Grid& x_t, const char* what) const {
  if (x_t.shape() != shape()) {
    std::ostringstream os;
    os << what << ": input shape " << shape_tag(x_t.shape()) << " does not match model "
       << shape_tag(shape());
    throw ShapeError(os.str());
  }
}

// ---------------------------------------------------------------------------
// GaussianFieldModel

GaussianFieldModel::GaussianFieldModel(Grid mean, const Eigen::MatrixXd& covariance)
    : mean_(std::move(mean)) {
  const auto D = static_cast<Eigen::Index>(mean_.size());
  if (D == 0) throw ValidationError("gaussian field: empty mean grid");
  if (covariance.rows() != D || covariance.cols() != D) {
    std::ostringstream os;
    os << "gaussian field: covariance is " << covariance.rows() << "x" << covariance.cols()
       << ", expected " << D << "x" << D;
    throw ShapeError(os.str());
  }
  if (!covariance.allFinite()) throw ValidationError("gaussian field: non-finite covariance");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff()))
    throw ValidationError("gaussian field: covariance is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(covariance);
  if (solver.info() != Eigen::Success)
    throw ValidationError("gaussian field: eigendecomposition failed");
  eigvals_ = solver.eigenvalues();
  eigvecs_ = solver.eigenvectors();

  const double scale = std::max(1.0, eigvals_.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < D; ++i) {
    if (eigvals_[i] < -1e-10 * scale)
      throw ValidationError("gaussian field: covariance is not positive semi-definite");
    eigvals_[i] = std::max(eigvals_[i], 0.0);
  }
  const double ortho_err =
      (eigvecs_.transpose() * eigvecs_ - Eigen::MatrixXd::Identity(D, D)).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-10) throw ValidationError("gaussian field: eigenvectors not orthonormal");

  std::string bytes = "gaussian_field:" + shape_tag(mean_.shape()) + ":";
  for (double v : mean_.values()) append_bits(bytes, v);
  for (Eigen::Index j = 0; j < D; ++j)
    for (Eigen::Index i = 0; i < D; ++i) append_bits(bytes, covariance(i, j));
  fingerprint_ = fnv1a_hex(bytes);
}

Grid GaussianFieldModel::predict(const Grid& x_t, int t, const NoiseSchedule& s) const {
  require_input(x_t, "gaussian_predict");
  s.beta(t);  // range check, t in [1, T]
  const double ab = s.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double s2 = 1.0 - ab;

  const Eigen::VectorXd r = as_vector(x_t) - a * as_vector(mean_);
  Eigen::VectorXd y = eigvecs_.transpose() * r;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] *= std::sqrt(s2) / (ab * eigvals_[i] + s2);
  const Eigen::VectorXd eps = eigvecs_ * y;

  Grid out(x_t.shape());
  std::copy(eps.data(), eps.data() + eps.size(), out.values().begin());
  out.check_finite();
  return out;
}

Grid GaussianFieldModel::posterior_mean(const Grid& x_t, int t, const NoiseSchedule& s) const {
  require_input(x_t, "posterior_mean");
  const double ab = s.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double s2 = 1.0 - ab;
  const Eigen::VectorXd r = as_vector(x_t) - a * as_vector(mean_);
  Eigen::VectorXd y = eigvecs_.transpose() * r;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double denom = ab * eigvals_[i] + s2;
    y[i] = denom > 0.0 ? y[i] * a * eigvals_[i] / denom : 0.0;
  }
  const Eigen::VectorXd m = as_vector(mean_) + eigvecs_ * y;
  Grid out(x_t.shape());
  std::copy(m.data(), m.data() + m.size(), out.values().begin());
  return out;
}

double GaussianFieldModel::log_marginal(const Grid& x_t, int t, const NoiseSchedule& s) const {
  require_input(x_t, "log_marginal");
  const double ab = s.alpha_bar(t);
  const double s2 = 1.0 - ab;
  const Eigen::VectorXd r = as_vector(x_t) - std::sqrt(ab) * as_vector(mean_);
  const Eigen::VectorXd y = eigvecs_.transpose() * r;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = ab * eigvals_[i] + s2;
    if (!(v > 0.0)) throw ValidationError("log_marginal: degenerate direction at t=0");
    lp -= 0.5 * (y[i] * y[i] / v + std::log(v) + kLog2Pi);
  }
  return lp;
}

Grid GaussianFieldModel::sample(RngStream& rng) const {
  Eigen::VectorXd z(eigvals_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = std::sqrt(eigvals_[i]) * rng.normal();
  const Eigen::VectorXd x = as_vector(mean_) + eigvecs_ * z;
  Grid out(mean_.shape());
  std::copy(x.data(), x.data() + x.size(), out.values().begin());
  return out;
}

Eigen::MatrixXd GaussianFieldModel::covariance() const {
  return eigvecs_ * eigvals_.asDiagonal() * eigvecs_.transpose();
}

double GaussianFieldModel::marginal_mean() const { return grid_stats(mean_).first; }

double GaussianFieldModel::marginal_std() const {
  return std::sqrt(eigvals_.sum() / static_cast<double>(eigvals_.size()));
}

std::string GaussianFieldModel::fingerprint() const { return fingerprint_; }

Eigen::MatrixXd exponential_covariance(const Shape& shape, double variance, double length) {
  require_valid_shape(shape);
  if (!(variance >= 0.0) || !(length > 0.0))
    throw ConfigError("exponential covariance needs variance >= 0 and length > 0");
  const auto D = static_cast<Eigen::Index>(shape.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
  const std::size_t C = shape.channels;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const std::size_t pi = i / C, ci = i % C;
    const double yi = static_cast<double>(pi / shape.width);
    const double xi = static_cast<double>(pi % shape.width);
    for (std::size_t j = 0; j < shape.size(); ++j) {
      if (j % C != ci) continue;
      const std::size_t pj = j / C;
      const double dy = yi - static_cast<double>(pj / shape.width);
      const double dx = xi - static_cast<double>(pj % shape.width);
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          variance * std::exp(-std::sqrt(dx * dx + dy * dy) / length);
    }
  }
  return cov;
}

GaussianFieldModel make_gaussian_field(const Shape& shape, double mean, double variance,
                                       double correlation_length) {
  return GaussianFieldModel(Grid(shape, mean),
                            exponential_covariance(shape, variance, correlation_length));
}

// ---------------------------------------------------------------------------
// GmmPixelModel

GmmPixelModel::GmmPixelModel(Shape shape, std::vector<GmmComponent> components)
    : shape_(shape), components_(std::move(components)) {
  require_valid_shape(shape_);
  if (components_.empty()) throw ConfigError("gmm: needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight))
      throw ConfigError("gmm: component weights must be positive");
    if (!(c.variance > 0.0) || !std::isfinite(c.variance))
      throw ConfigError("gmm: component variances must be positive");
    if (!std::isfinite(c.mean)) throw ConfigError("gmm: non-finite component mean");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("gmm: weights must sum to 1");
}

Grid GmmPixelModel::predict(const Grid& x_t, int t, const NoiseSchedule& s) const {
  require_input(x_t, "gmm_predict");
  s.beta(t);
  const double ab = s.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double s2 = 1.0 - ab;
  const std::size_t K = components_.size();
  std::vector<double> var(K), logw(K), logp(K);
  for (std::size_t k = 0; k < K; ++k) {
    var[k] = ab * components_[k].variance + s2;
    logw[k] = std::log(components_[k].weight) - 0.5 * (std::log(var[k]) + kLog2Pi);
  }
  Grid out(x_t.shape());
  auto o = out.values();
  const auto xv = x_t.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    double lmax = -INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      const double d = xv[i] - a * components_[k].mean;
      logp[k] = logw[k] - 0.5 * d * d / var[k];
      lmax = std::max(lmax, logp[k]);
    }
    double norm = 0.0, acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double r = std::exp(logp[k] - lmax);
      norm += r;
      acc += r * (xv[i] - a * components_[k].mean) / var[k];
    }
    o[i] = std::sqrt(s2) * acc / norm;
  }
  out.check_finite();
  return out;
}

double GmmPixelModel::log_marginal(const Grid& x_t, int t, const NoiseSchedule& s) const {
  require_input(x_t, "log_marginal");
  const double ab = s.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double s2 = 1.0 - ab;
  const std::size_t K = components_.size();
  std::vector<double> var(K), logw(K), logp(K);
  for (std::size_t k = 0; k < K; ++k) {
    var[k] = ab * components_[k].variance + s2;
    logw[k] = std::log(components_[k].weight) - 0.5 * (std::log(var[k]) + kLog2Pi);
  }
  double total = 0.0;
  for (double x : x_t.values()) {
    double lmax = -INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      const double d = x - a * components_[k].mean;
      logp[k] = logw[k] - 0.5 * d * d / var[k];
      lmax = std::max(lmax, logp[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(logp[k] - lmax);
    total += lmax + std::log(sum);
  }
  return total;
}

Grid GmmPixelModel::sample(RngStream& rng) const {
  Grid out(shape_);
  for (double& v : out.values()) {
    const double u = rng.uniform();
    double cum = 0.0;
    const GmmComponent* pick = &components_.back();
    for (const auto& c : components_) {
      cum += c.weight;
      if (u < cum) {
        pick = &c;
        break;
      }
    }
    v = pick->mean + std::sqrt(pick->variance) * rng.normal();
  }
  return out;
}

double GmmPixelModel::marginal_mean() const {
  double m = 0.0;
  for (const auto& c : components_) m += c.weight * c.mean;
  return m;
}

double GmmPixelModel::marginal_std() const {
  const double m = marginal_mean();
  double second = 0.0;
  for (const auto& c : components_) second += c.weight * (c.variance + c.mean * c.mean);
  return std::sqrt(std::max(second - m * m, 0.0));
}

Grid GmmPixelModel::mean() const { return Grid(shape_, marginal_mean()); }

Eigen::MatrixXd GmmPixelModel::covariance() const {
  const double sd = marginal_std();
  const auto D = static_cast<Eigen::Index>(shape_.size());
  return Eigen::MatrixXd::Identity(D, D) * (sd * sd);
}

std::string GmmPixelModel::fingerprint() const {
  std::string bytes = "gmm_pixel:" + shape_tag(shape_) + ":";
  for (const auto& c : components_) {
    append_bits(bytes, c.weight);
    append_bits(bytes, c.mean);
    append_bits(bytes, c.variance);
  }
  return fnv1a_hex(bytes);
}

}  // namespace fcdiff
