#include "liftwave/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "liftwave/errors.hpp"

namespace liftwave {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (int e : shape_) {
    if (e < 0) throw ConfigError("negative tensor extent");
    n *= static_cast<std::size_t>(e);
  }
  data_.assign(n, fill);
}

std::span<double> Tensor::plane(int c) {
  const std::size_t n = static_cast<std::size_t>(shape_[1]) * shape_[2];
  return {data_.data() + c * n, n};
}

std::span<const double> Tensor::plane(int c) const {
  const std::size_t n = static_cast<std::size_t>(shape_[1]) * shape_[2];
  return {data_.data() + c * n, n};
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other))
    throw ConfigError("tensor add: " + shape_string() + " vs " + other.shape_string());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  if (!same_shape(other))
    throw ConfigError("tensor sub: " + shape_string() + " vs " + other.shape_string());
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::squared_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ')';
  return os.str();
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ConfigError("max_abs_diff: " + a.shape_string() + " vs " + b.shape_string());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor stack_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ConfigError("stack_channels: no inputs");
  const int h = parts[0].height(), w = parts[0].width();
  int c = 0;
  for (const Tensor& p : parts) {
    if (p.height() != h || p.width() != w)
      throw ConfigError("stack_channels: extent mismatch " + p.shape_string());
    c += p.channels();
  }
  Tensor out(c, h, w);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + off);
    off += p.size();
  }
  return out;
}

Tensor take_channel(const Tensor& t, int c) {
  Tensor out(1, t.height(), t.width());
  auto src = t.plane(c);
  std::copy(src.begin(), src.end(), out.values().begin());
  return out;
}

Tensor fit_extent(const Tensor& t, int height, int width) {
  if (t.height() == height && t.width() == width) return t;
  Tensor out(t.channels(), height, width);
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < height; ++y) {
      const int sy = y < t.height() ? y : mirror_index(y, t.height());
      for (int x = 0; x < width; ++x) {
        const int sx = x < t.width() ? x : mirror_index(x, t.width());
        out.at(c, y, x) = t.at(c, sy, sx);
      }
    }
  return out;
}

Tensor fit_extent_adjoint(const Tensor& grad, int height, int width) {
  if (grad.height() == height && grad.width() == width) return grad;
  Tensor out(grad.channels(), height, width);
  for (int c = 0; c < grad.channels(); ++c)
    for (int y = 0; y < grad.height(); ++y) {
      const int sy = y < height ? y : mirror_index(y, height);
      for (int x = 0; x < grad.width(); ++x) {
        const int sx = x < width ? x : mirror_index(x, width);
        out.at(c, sy, sx) += grad.at(c, y, x);
      }
    }
  return out;
}

}  // namespace liftwave
