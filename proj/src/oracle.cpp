#include "liftwave/oracle.hpp"

#include <cmath>
#include <numbers>

#include "liftwave/errors.hpp"
#include "liftwave/nn.hpp"

namespace liftwave {

double oracle_sigma(int level) {
  if (level < 1) throw InputError("oracle level must be >= 1");
  return std::ldexp(1.0, level - 1);
}

OracleBank make_oracle_bank(int channels, int level) {
  if (channels < 1) throw ConfigError("oracle bank needs at least one channel");
  OracleBank b;
  b.level = level;
  b.sigma = oracle_sigma(level);
  b.radius = static_cast<int>(std::ceil(3.0 * b.sigma));
  for (int k = 0; k + 1 < channels; ++k) b.orientations.push_back(k * std::numbers::pi / (channels - 1));
  return b;
}

namespace {

// Sampled 1D Gaussian (sum 1) and its scale-normalized derivative.
void gaussian_1d(double sigma, int r, std::vector<double>& g, std::vector<double>& dg) {
  g.assign(2 * r + 1, 0.0);
  dg.assign(2 * r + 1, 0.0);
  double s = 0.0;
  for (int i = -r; i <= r; ++i) {
    g[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    s += g[i + r];
  }
  for (int i = -r; i <= r; ++i) {
    g[i + r] /= s;
    dg[i + r] = -i / sigma * g[i + r];
  }
}

// Separable correlation with whole-sample symmetric extension.
Tensor separable(const Tensor& img, const std::vector<double>& ky, const std::vector<double>& kx) {
  const int h = img.height(), w = img.width();
  const int ry = static_cast<int>(ky.size()) / 2, rx = static_cast<int>(kx.size()) / 2;
  Tensor tmp(1, h, w), out(1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -rx; i <= rx; ++i) s += kx[i + rx] * img.at(0, y, mirror_index(x + i, w));
      tmp.at(0, y, x) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -ry; i <= ry; ++i) s += ky[i + ry] * tmp.at(0, mirror_index(y + i, h), x);
      out.at(0, y, x) = s;
    }
  return out;
}

}  // namespace

Tensor OracleBank::kernels() const {
  std::vector<double> g, dg;
  gaussian_1d(sigma, radius, g, dg);
  const int n = 2 * radius + 1;
  Tensor k(std::vector<int>{channels(), 1, n, n});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      k[static_cast<std::size_t>(y) * n + x] = g[y] * g[x];
      for (std::size_t c = 0; c < orientations.size(); ++c)
        k[((c + 1) * n + y) * n + x] =
            std::cos(orientations[c]) * g[y] * dg[x] + std::sin(orientations[c]) * dg[y] * g[x];
    }
  return k;
}

Tensor oracle_responses(const Tensor& image, const OracleBank& bank) {
  if (image.rank() != 3 || image.channels() != 1)
    throw InputError("oracle input must be a single plane, got " + image.shape_string());
  std::vector<double> g, dg;
  gaussian_1d(bank.sigma, bank.radius, g, dg);
  const Tensor smooth = separable(image, g, g);
  const Tensor rx = separable(image, g, dg);
  const Tensor ry = separable(image, dg, g);
  const int h = image.height(), w = image.width();
  Tensor out(bank.channels(), h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(0, y, x) = std::abs(smooth.at(0, y, x));
  for (std::size_t c = 0; c < bank.orientations.size(); ++c) {
    const double cs = std::cos(bank.orientations[c]), sn = std::sin(bank.orientations[c]);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(static_cast<int>(c) + 1, y, x) = std::abs(cs * rx.at(0, y, x) + sn * ry.at(0, y, x));
  }
  return out;
}

Tensor average_pool(const Tensor& t, int fy, int fx, int out_h, int out_w) {
  if (fy < 1 || fx < 1) throw InputError("pooling factors must be >= 1");
  const int h = t.height(), w = t.width();
  Tensor out(t.channels(), out_h, out_w);
  for (int c = 0; c < t.channels(); ++c)
    for (int i = 0; i < out_h; ++i) {
      const int y0 = std::min(i * fy, h - 1), y1 = std::max(y0 + 1, std::min((i + 1) * fy, h));
      for (int j = 0; j < out_w; ++j) {
        const int x0 = std::min(j * fx, w - 1), x1 = std::max(x0 + 1, std::min((j + 1) * fx, w));
        double s = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) s += t.at(c, y, x);
        out.at(c, i, j) = s / ((y1 - y0) * (x1 - x0));
      }
    }
  return out;
}

Tensor oracle_opacities(const Tensor& image, const OracleBank& bank, int out_h, int out_w,
                        int row_factor, int col_factor) {
  return normalize_forward(average_pool(oracle_responses(image, bank), row_factor, col_factor, out_h, out_w));
}

Tensor oracle_opacities(const Tensor& image, int level, const OracleBank& bank) {
  const int f = 1 << level;
  return oracle_opacities(image, bank, (image.height() + f - 1) / f, (image.width() + f - 1) / f, f, f);
}

}  // namespace liftwave
