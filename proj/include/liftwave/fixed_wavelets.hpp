#pragma once

#include "liftwave/lifting.hpp"

namespace liftwave {

// LeGall 5/3: predict -(x[0] + x[1]) / 2, update (d[-1] + d[0]) / 4.
FixedFilter legall53_predict();
FixedFilter legall53_update();

// CDF 9/7 lifting factorization.
namespace cdf97 {
inline constexpr double kAlpha = -1.586134342059924;
inline constexpr double kBeta = -0.052980118572961;
inline constexpr double kGamma = 0.882911075530934;
inline constexpr double kDelta = 0.443506852043971;
inline constexpr double kK = 1.230174104914001;
}  // namespace cdf97

LiftingStructure legall53_structure(int levels = 1);
LiftingStructure cdf97_structure(int levels = 1);

// Appends a fixed predict (L -> H, or LL -> HL on both row bands) or update
// step along `axis`, registering its operator under `id`.
void add_fixed_step(LiftingStructure& s, const std::string& id, const FixedFilter& f, Axis axis,
                    bool predict);
void add_gain(LiftingStructure& s, std::vector<Band> targets, double gain);

}  // namespace liftwave
