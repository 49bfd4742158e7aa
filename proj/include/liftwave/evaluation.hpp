#pragma once

#include <vector>

#include "liftwave/codestream.hpp"
#include "liftwave/metrics.hpp"

namespace liftwave {

// `count` evenly spaced rate targets from lo to hi bits per pixel.
std::vector<double> bpp_targets(double lo = 0.1, double hi = 1.0, int count = 10);

struct SweepPoint {
  double target = 0.0;
  double base_step = 0.0;
  double bpp = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;  // NaN below the multi-scale extent
};

// For each target, bisects log(base_step) for the largest rate not above
// the target (or the smallest achievable one), then encodes, decodes and
// scores the rounded reconstruction.
std::vector<SweepPoint> rd_sweep(const Tensor& image, const LearnedStructure& model, const ParamStore& weights,
                                 const std::vector<double>& targets);

// Pointwise mean over images swept with the same targets.
std::vector<SweepPoint> average_sweeps(const std::vector<std::vector<SweepPoint>>& sweeps);

// "psnr", "ssim" and, when available, "ms-ssim" curves; points with a
// repeated rate are dropped.
std::vector<RDCurve> sweep_curves(const std::vector<SweepPoint>& sweep);

}  // namespace liftwave
