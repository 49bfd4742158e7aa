#include "liftwave/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "liftwave/errors.hpp"
#include "liftwave/image_io.hpp"

namespace liftwave {

std::vector<double> bpp_targets(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2) throw ConfigError("bpp range needs 0 < lo < hi and >= 2 points");
  std::vector<double> t;
  for (int i = 0; i < count; ++i) t.push_back(lo + (hi - lo) * i / (count - 1));
  return t;
}

namespace {

constexpr double kMinStep = 1.0 / 64;
constexpr double kMaxStep = 8192.0;
constexpr int kBisections = 24;

}  // namespace

std::vector<SweepPoint> rd_sweep(const Tensor& image, const LearnedStructure& model, const ParamStore& weights,
                                 const std::vector<double>& targets) {
  const Analysis a = analyze_for_coding(image, model, weights);
  auto rate = [&](double step) { return encode_analysis(a, model, step, false).bpp; };
  const Tensor reference = round_to_pixels(image);
  const bool multiscale = image.height() >= kMsSsimMinExtent && image.width() >= kMsSsimMinExtent;

  std::vector<SweepPoint> out;
  for (double target : targets) {
    double lo = std::log(kMinStep), hi = std::log(kMaxStep);
    if (rate(std::exp(lo)) <= target) {
      hi = lo;
    } else {
      for (int i = 0; i < kBisections; ++i) {
        const double mid = 0.5 * (lo + hi);
        (rate(std::exp(mid)) > target ? lo : hi) = mid;
      }
    }
    SweepPoint p;
    p.target = target;
    p.base_step = std::exp(hi);
    const EncodeResult enc = encode_analysis(a, model, p.base_step);
    const DecodeResult dec = decode_image(enc.bytes, weights);
    const Tensor rec = round_to_pixels(dec.image);
    p.bpp = enc.bpp;
    p.psnr = psnr(reference, rec);
    p.ssim = ssim(reference, rec);
    p.ms_ssim = multiscale ? ms_ssim(reference, rec) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(p);
  }
  return out;
}

std::vector<SweepPoint> average_sweeps(const std::vector<std::vector<SweepPoint>>& sweeps) {
  if (sweeps.empty()) throw InputError("no sweeps to average");
  std::vector<SweepPoint> mean(sweeps[0].size());
  for (const auto& s : sweeps) {
    if (s.size() != mean.size()) throw InputError("sweeps have different target lists");
    for (std::size_t i = 0; i < s.size(); ++i) {
      mean[i].target = s[i].target;
      mean[i].base_step += s[i].base_step / sweeps.size();
      mean[i].bpp += s[i].bpp / sweeps.size();
      mean[i].psnr += s[i].psnr / sweeps.size();
      mean[i].ssim += s[i].ssim / sweeps.size();
      mean[i].ms_ssim += s[i].ms_ssim / sweeps.size();
    }
  }
  return mean;
}

std::vector<RDCurve> sweep_curves(const std::vector<SweepPoint>& sweep) {
  std::vector<SweepPoint> pts = sweep;
  std::sort(pts.begin(), pts.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.bpp < b.bpp; });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.bpp == b.bpp; }),
            pts.end());
  RDCurve p{"psnr", {}}, s{"ssim", {}}, m{"ms-ssim", {}};
  bool have_ms = true;
  for (const SweepPoint& q : pts) {
    p.points.push_back({q.bpp, q.psnr});
    s.points.push_back({q.bpp, q.ssim});
    m.points.push_back({q.bpp, q.ms_ssim});
    have_ms = have_ms && std::isfinite(q.ms_ssim);
  }
  std::vector<RDCurve> out{p, s};
  if (have_ms && !pts.empty()) out.push_back(m);
  return out;
}

}  // namespace liftwave
