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

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace fcdiff {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  std::size_t pixels() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

/// H x W x C array of doubles, row-major and channel-interleaved.
///
/// Every value is finite; constructors reject NaN/Inf and zero dimensions.
/// Mutation goes through `values()` on an exclusively owned instance, which
/// keeps sharing across threads read-only.
class Grid {
 public:
  Grid() = default;
  explicit Grid(Shape shape, double fill = 0.0);
  Grid(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return values_[(y * shape_.width + x) * shape_.channels + c];
  }
  double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return values_[(y * shape_.width + x) * shape_.channels + c];
  }

  /// Throws ValidationError if any entry is non-finite. Operations that
  /// write through `values()` call this before handing results out.
  void check_finite() const;

  bool operator==(const Grid& other) const = default;

 private:
  Shape shape_{};
  std::vector<double> values_;
};

void require_valid_shape(const Shape& shape);
void require_same_shape(const Grid& a, const Grid& b, const char* what);

/// Exact arithmetic mean and population variance over all entries.
std::pair<double, double> grid_stats(const Grid& g);

/// Entry-wise clamp onto [0, 1].
Grid clamp_unit(const Grid& g);

/// out = a * x + b * y, entry-wise.
Grid axpby(double a, const Grid& x, double b, const Grid& y);
Grid scaled(const Grid& x, double a);

double mean_abs_diff(const Grid& a, const Grid& b);
double mean_squared_diff(const Grid& a, const Grid& b);

}  // namespace fcdiff
