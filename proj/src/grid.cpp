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

#include "fcdiff/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fcdiff/error.hpp"

namespace fcdiff {

void require_valid_shape(const Shape& shape) {
  if (shape.height == 0 || shape.width == 0 || shape.channels == 0) {
    std::ostringstream os;
    os << "invalid grid shape (" << shape.height << "," << shape.width << ","
       << shape.channels << "): every dimension must be >= 1";
    throw ShapeError(os.str());
  }
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (a.shape() != b.shape()) {
    std::ostringstream os;
    os << what << ": shape mismatch (" << a.height() << "," << a.width() << ","
       << a.channels() << ") vs (" << b.height() << "," << b.width() << ","
       << b.channels() << ")";
    throw ShapeError(os.str());
  }
}

Grid::Grid(Shape shape, double fill) : shape_(shape) {
  require_valid_shape(shape);
  if (!std::isfinite(fill)) throw ValidationError("grid fill value is not finite");
  values_.assign(shape.size(), fill);
}

Grid::Grid(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  require_valid_shape(shape);
  if (values_.size() != shape.size()) {
    std::ostringstream os;
    os << "grid payload has " << values_.size() << " values, shape needs "
       << shape.size();
    throw ShapeError(os.str());
  }
  check_finite();
}

void Grid::check_finite() const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      std::ostringstream os;
      os << "non-finite grid value at flat index " << i;
      throw ValidationError(os.str());
    }
  }
}

std::pair<double, double> grid_stats(const Grid& g) {
  const auto v = g.values();
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, ss / static_cast<double>(v.size())};
}

Grid clamp_unit(const Grid& g) {
  g.check_finite();
  Grid out = g;
  for (double& x : out.values()) x = std::clamp(x, 0.0, 1.0);
  return out;
}

Grid axpby(double a, const Grid& x, double b, const Grid& y) {
  require_same_shape(x, y, "axpby");
  Grid out(x.shape());
  auto o = out.values();
  const auto xv = x.values();
  const auto yv = y.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * xv[i] + b * yv[i];
  return out;
}

Grid scaled(const Grid& x, double a) {
  Grid out = x;
  for (double& v : out.values()) v *= a;
  return out;
}

double mean_abs_diff(const Grid& a, const Grid& b) {
  require_same_shape(a, b, "mean_abs_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double mean_squared_diff(const Grid& a, const Grid& b) {
  require_same_shape(a, b, "mean_squared_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace fcdiff
