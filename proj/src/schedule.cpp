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

#include "fcdiff/schedule.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fcdiff/error.hpp"

namespace fcdiff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
  if (beta_.empty()) throw ConfigError("schedule needs T >= 1 steps");
  const std::size_t T = beta_.size();
  alpha_.resize(T);
  alpha_bar_.resize(T + 1);
  beta_tilde_.resize(T);
  alpha_bar_[0] = 1.0;
  for (std::size_t i = 0; i < T; ++i) {
    const double b = beta_[i];
    if (!(b > 0.0 && b < 1.0)) {
      std::ostringstream os;
      os << "beta at t=" << i + 1 << " is " << b << ", must lie in (0, 1)";
      throw ConfigError(os.str());
    }
    alpha_[i] = 1.0 - b;
    alpha_bar_[i + 1] = alpha_bar_[i] * alpha_[i];
    beta_tilde_[i] = (1.0 - alpha_bar_[i]) / (1.0 - alpha_bar_[i + 1]) * b;
  }
  if (!(alpha_bar_[T] > 0.0)) throw ConfigError("schedule underflows: alpha_bar(T) == 0");
}

void NoiseSchedule::require_step(int t) const {
  if (t < 1 || t > T()) {
    std::ostringstream os;
    os << "step t=" << t << " outside [1, " << T() << "]";
    throw IndexError(os.str());
  }
}

double NoiseSchedule::beta(int t) const {
  require_step(t);
  return beta_[t - 1];
}

double NoiseSchedule::alpha(int t) const {
  require_step(t);
  return alpha_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > T()) {
    std::ostringstream os;
    os << "step t=" << t << " outside [0, " << T() << "]";
    throw IndexError(os.str());
  }
  return alpha_bar_[t];
}

double NoiseSchedule::beta_tilde(int t) const {
  require_step(t);
  return beta_tilde_[t - 1];
}

std::string NoiseSchedule::fingerprint() const {
  std::string bytes = "schedule:" + std::to_string(T()) + ":";
  for (double b : beta_) {
    const auto bits = std::bit_cast<std::uint64_t>(b);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>(bits >> (8 * i)));
  }
  return fnv1a_hex(bytes);
}

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw ConfigError("schedule T must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    std::ostringstream os;
    os << "schedule betas must satisfy 0 < beta_start <= beta_end < 1 (got " << beta_start
       << ", " << beta_end << ")";
    throw ConfigError(os.str());
  }
  std::vector<double> betas(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) {
    const double f = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    betas[i] = beta_start + f * (beta_end - beta_start);
  }
  return NoiseSchedule(std::move(betas));
}

PosteriorCoeffs posterior_mean_coeffs(const NoiseSchedule& s, int t) {
  const double ab_t = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  const double b = s.beta(t);
  return {std::sqrt(ab_prev) * b / (1.0 - ab_t),
          std::sqrt(s.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab_t)};
}

std::vector<int> depths_from_fractions(int T, const std::vector<double>& fractions) {
  std::vector<int> out;
  out.reserve(fractions.size());
  for (double f : fractions) out.push_back(static_cast<int>(std::lround(f * T)));
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fcdiff
