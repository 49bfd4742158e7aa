#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace liftwave {

// Dense row-major array of doubles. Planes and activations use the 3D form
// (channels, height, width); convolution kernels use 4D
// (out_channels, in_channels, kernel_h, kernel_w).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  Tensor(int channels, int height, int width, double fill = 0.0)
      : Tensor(std::vector<int>{channels, height, width}, fill) {}

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  // 3D accessors.
  int channels() const { return dim(0); }
  int height() const { return dim(1); }
  int width() const { return dim(2); }
  double& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // One channel of a 3D tensor.
  std::span<double> plane(int c);
  std::span<const double> plane(int c) const;

  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;
  double max_abs() const noexcept;
  double sum() const noexcept;
  double squared_norm() const noexcept;

  std::string shape_string() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

// Whole-sample symmetric extension: ... x2 x1 | x0 x1 x2 ... x(n-1) | x(n-2) ...
// Maps any integer index onto [0, n).
inline int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

// Channel-stacks 3D tensors of identical spatial extent.
Tensor stack_channels(std::span<const Tensor> parts);
// Copies channel `c` of a 3D tensor into a single-channel tensor.
Tensor take_channel(const Tensor& t, int c);

// Resizes a 3D tensor to (height, width): trailing rows/columns are dropped,
// or appended by whole-sample symmetric extension.
Tensor fit_extent(const Tensor& t, int height, int width);
// Adjoint of fit_extent: folds a gradient on the fitted extent back onto the
// original (height, width).
Tensor fit_extent_adjoint(const Tensor& grad, int height, int width);

}  // namespace liftwave
