#pragma once

#include <map>
#include <string>
#include <vector>

#include "liftwave/tensor.hpp"

namespace liftwave {

// Images for metrics are single planes on the [0, peak] scale.
// Identical images give +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak = 255.0);
double mse(const Tensor& a, const Tensor& b);

// Gaussian-windowed SSIM (11x11, sigma 1.5, valid positions only) with
// C1 = (0.01 peak)^2 and C2 = (0.03 peak)^2.
double ssim(const Tensor& a, const Tensor& b, double peak = 255.0);
// Five dyadic scales with 2x2 average downsampling; contrast-structure
// terms are clipped at zero before weighting.
double ms_ssim(const Tensor& a, const Tensor& b, double peak = 255.0);
inline constexpr int kMsSsimMinExtent = 176;

struct RDPoint {
  double rate = 0.0;  // bits per pixel
  double quality = 0.0;
};

struct RDCurve {
  std::string metric;
  std::vector<RDPoint> points;

  // Empty when rates strictly increase and quality does not drop by more
  // than 1e-6; otherwise a description of the first violation.
  std::string check() const;
};

// Mean percentage rate difference of `test` against `anchor` over their
// common quality range, from cubic least-squares fits of log10(rate)
// against quality. Negative values are savings.
double bd_rate(const RDCurve& anchor, const RDCurve& test);

// CSV with header "metric,rate_bpp,quality"; one curve per metric.
void write_rd_csv(const std::string& path, const std::vector<RDCurve>& curves);
std::map<std::string, RDCurve> read_rd_csv(const std::string& path);

}  // namespace liftwave
