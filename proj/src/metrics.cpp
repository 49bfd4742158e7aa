#include "liftwave/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "liftwave/errors.hpp"

namespace liftwave {

namespace {

void same_extent(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rank() != 3 || a.channels() != 1 || !a.same_shape(b))
    throw InputError(std::string(what) + ": images must be single planes of equal extent (" +
                     a.shape_string() + " vs " + b.shape_string() + ")");
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  same_extent(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

namespace {

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;

std::array<double, kWin> gaussian_window() {
  std::array<double, kWin> g{};
  double s = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    g[i] = std::exp(-d * d / (2 * kWinSigma * kWinSigma));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

// Valid-position separable filtering of a plane.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w) {
  static const auto g = gaussian_window();
  const int oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow), out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWin; ++k) s += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

struct SsimParts {
  double ssim;
  double cs;
};

SsimParts ssim_parts(const std::vector<double>& a, const std::vector<double>& b, int h, int w, double peak) {
  if (h < kWin || w < kWin) throw InputError("ssim: images must be at least 11x11");
  const double c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w), mu_b = filter_valid(b, h, w);
  const auto s_aa = filter_valid(aa, h, w), s_bb = filter_valid(bb, h, w), s_ab = filter_valid(ab, h, w);
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = s_aa[i] - mu_a[i] * mu_a[i];
    const double vb = s_bb[i] - mu_b[i] * mu_b[i];
    const double cov = s_ab[i] - mu_a[i] * mu_b[i];
    const double cs = (2 * cov + c2) / (va + vb + c2);
    const double l = (2 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
    ssim_sum += l * cs;
    cs_sum += cs;
  }
  const double n = static_cast<double>(mu_a.size());
  return {ssim_sum / n, cs_sum / n};
}

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::vector<double> downsample2(const std::vector<double>& img, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const std::size_t i = static_cast<std::size_t>(2 * y) * w + 2 * x;
      out[static_cast<std::size_t>(y) * ow + x] = 0.25 * (img[i] + img[i + 1] + img[i + w] + img[i + w + 1]);
    }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, double peak) {
  same_extent(a, b, "ssim");
  return ssim_parts(to_vec(a), to_vec(b), a.height(), a.width(), peak).ssim;
}

double ms_ssim(const Tensor& a, const Tensor& b, double peak) {
  same_extent(a, b, "ms_ssim");
  if (a.height() < kMsSsimMinExtent || a.width() < kMsSsimMinExtent)
    throw InputError("ms_ssim: images must be at least 176x176");
  static constexpr std::array<double, 5> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  std::vector<double> x = to_vec(a), y = to_vec(b);
  int h = a.height(), w = a.width();
  double result = 1.0;
  for (std::size_t s = 0; s < weights.size(); ++s) {
    const SsimParts p = ssim_parts(x, y, h, w, peak);
    const double term = s + 1 == weights.size() ? p.ssim : p.cs;
    result *= std::pow(std::max(term, 0.0), weights[s]);
    if (s + 1 < weights.size()) {
      x = downsample2(x, h, w);
      y = downsample2(y, h, w);
      h /= 2;
      w /= 2;
    }
  }
  return result;
}

std::string RDCurve::check() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].rate > 0)) return "non-positive rate at point " + std::to_string(i);
    if (i == 0) continue;
    if (!(points[i].rate > points[i - 1].rate)) return "rates not strictly increasing at point " + std::to_string(i);
    if (points[i].quality < points[i - 1].quality - 1e-6)
      return "quality decreases at point " + std::to_string(i);
  }
  return {};
}

namespace {

// Least-squares cubic through (q, log10 r) via Householder QR on a
// normalized variable; returns coefficients in the raw variable.
std::array<double, 4> fit_cubic(const RDCurve& c) {
  const std::size_t n = c.points.size();
  double lo = c.points[0].quality, hi = lo;
  for (const auto& p : c.points) {
    lo = std::min(lo, p.quality);
    hi = std::max(hi, p.quality);
  }
  const double mid = 0.5 * (lo + hi), half = std::max(0.5 * (hi - lo), 1e-12);
  std::vector<std::array<double, 4>> a(n);
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (c.points[i].quality - mid) / half;
    a[i] = {1.0, t, t * t, t * t * t};
    rhs[i] = std::log10(c.points[i].rate);
  }
  for (int k = 0; k < 4; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += a[i][k] * a[i][k];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw InputError("bd_rate: degenerate curve");
    const double alpha = a[k][k] > 0 ? -norm : norm;
    std::vector<double> v(n, 0.0);
    for (std::size_t i = k; i < n; ++i) v[i] = a[i][k];
    v[k] -= alpha;
    double vv = 0.0;
    for (std::size_t i = k; i < n; ++i) vv += v[i] * v[i];
    if (vv == 0.0) continue;
    for (int j = k; j < 4; ++j) {
      double d = 0.0;
      for (std::size_t i = k; i < n; ++i) d += v[i] * a[i][j];
      for (std::size_t i = k; i < n; ++i) a[i][j] -= 2 * d / vv * v[i];
    }
    double d = 0.0;
    for (std::size_t i = k; i < n; ++i) d += v[i] * rhs[i];
    for (std::size_t i = k; i < n; ++i) rhs[i] -= 2 * d / vv * v[i];
  }
  std::array<double, 4> t{};
  for (int k = 3; k >= 0; --k) {
    double s = rhs[k];
    for (int j = k + 1; j < 4; ++j) s -= a[k][j] * t[j];
    if (std::abs(a[k][k]) < 1e-14) throw InputError("bd_rate: ill-conditioned fit");
    t[k] = s / a[k][k];
  }
  // Expand p(t) with t = (q - mid) / half into powers of q.
  std::array<double, 4> c3{};
  const double u = 1.0 / half, v0 = -mid / half;
  // (u q + v0)^k
  const std::array<std::array<double, 4>, 4> pw{{{1, 0, 0, 0},
                                                 {v0, u, 0, 0},
                                                 {v0 * v0, 2 * u * v0, u * u, 0},
                                                 {v0 * v0 * v0, 3 * u * v0 * v0, 3 * u * u * v0, u * u * u}}};
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j) c3[j] += t[k] * pw[k][j];
  return c3;
}

double integrate(const std::array<double, 4>& c, double lo, double hi) {
  auto prim = [&](double q) { return c[0] * q + c[1] * q * q / 2 + c[2] * q * q * q / 3 + c[3] * q * q * q * q / 4; };
  return prim(hi) - prim(lo);
}

}  // namespace

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
  if (anchor.points.size() < 4 || test.points.size() < 4)
    throw InputError("bd_rate needs at least 4 points per curve");
  for (const RDCurve* c : {&anchor, &test})
    for (const auto& p : c->points)
      if (!(p.rate > 0) || !std::isfinite(p.quality)) throw InputError("bd_rate: invalid RD point");
  auto range = [](const RDCurve& c) {
    double lo = c.points[0].quality, hi = lo;
    for (const auto& p : c.points) {
      lo = std::min(lo, p.quality);
      hi = std::max(hi, p.quality);
    }
    return std::pair{lo, hi};
  };
  const auto [alo, ahi] = range(anchor);
  const auto [tlo, thi] = range(test);
  const double lo = std::max(alo, tlo), hi = std::min(ahi, thi);
  if (!(hi > lo)) throw InputError("bd_rate: curves have no quality overlap");
  const auto pa = fit_cubic(anchor), pt = fit_cubic(test);
  const double avg = (integrate(pt, lo, hi) - integrate(pa, lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

void write_rd_csv(const std::string& path, const std::vector<RDCurve>& curves) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << "metric,rate_bpp,quality\n";
  f.precision(10);
  for (const auto& c : curves)
    for (const auto& p : c.points) f << c.metric << ',' << p.rate << ',' << p.quality << '\n';
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::map<std::string, RDCurve> read_rd_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::map<std::string, RDCurve> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("metric", 0) == 0) continue;
    std::stringstream ss(line);
    std::string metric, rate, quality;
    if (!std::getline(ss, metric, ',') || !std::getline(ss, rate, ',') || !std::getline(ss, quality))
      throw InputError(path + ":" + std::to_string(lineno) + ": expected metric,rate_bpp,quality");
    RDPoint p;
    try {
      p.rate = std::stod(rate);
      p.quality = std::stod(quality);
    } catch (const std::exception&) {
      throw InputError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
    RDCurve& c = out[metric];
    c.metric = metric;
    c.points.push_back(p);
  }
  return out;
}

}  // namespace liftwave
