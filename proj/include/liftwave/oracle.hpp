#pragma once

#include <vector>

#include "liftwave/tensor.hpp"

namespace liftwave {

// sigma_d = 2^(d-1).
double oracle_sigma(int level);

// One non-oriented Gaussian and channels-1 first-derivative-of-Gaussian
// filters at angles k*pi/(channels-1), all at sigma_d and truncated at
// +-3 sigma. Derivatives are scale-normalized (multiplied by sigma).
struct OracleBank {
  int level = 1;
  double sigma = 1.0;
  std::vector<double> orientations;  // radians, measured from +x toward +y (down)
  int radius = 3;

  int channels() const { return 1 + static_cast<int>(orientations.size()); }
  // Explicit 2D kernels, (channels, 1, 2r+1, 2r+1); the responses below are
  // computed separably and equal convolution with these.
  Tensor kernels() const;
};

OracleBank make_oracle_bank(int channels, int level);

// Full-resolution filter magnitudes, (channels, H, W).
Tensor oracle_responses(const Tensor& image, const OracleBank& bank);

// Average pooling of (C, H, W) over row_factor x col_factor blocks anchored
// at the origin onto an (out_h, out_w) grid.
Tensor average_pool(const Tensor& t, int row_factor, int col_factor, int out_h, int out_w);

// Normalized opacity maps on an (out_h, out_w) grid that is row_factor x
// col_factor coarser than the image.
Tensor oracle_opacities(const Tensor& image, const OracleBank& bank, int out_h, int out_w,
                        int row_factor, int col_factor);
// Level-d subband grid: 2^d pooling in both directions.
Tensor oracle_opacities(const Tensor& image, int level, const OracleBank& bank);

}  // namespace liftwave
