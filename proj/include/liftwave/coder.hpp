#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "liftwave/lifting.hpp"
#include "liftwave/tensor.hpp"

namespace liftwave {

// Deadzone uniform quantizer: the zero bin is [-step, step].
struct Quantizer {
  double step = 1.0;
  void validate() const;
};

struct IndexPlane {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> values;

  std::int32_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  bool all_zero() const;
  bool operator==(const IndexPlane&) const = default;
};

IndexPlane quantize(const Tensor& coeffs, const Quantizer& q);
Tensor dequantize(const IndexPlane& indices, const Quantizer& q);
// Reconstruction from magnitudes known down to bitplane `shift`: entries are
// sign * (|q| >> shift); nonzero ones reconstruct at the midpoint
// (v + 1/2) * 2^shift * step.
Tensor dequantize_partial(const IndexPlane& partial, int shift, const Quantizer& q);
// quantize followed by dequantize.
Tensor quantize_reconstruct(const Tensor& coeffs, const Quantizer& q);

struct AnnealSchedule {
  double t0 = 1.0;
  double decay = 0.9;
  double t_min = 0.05;
  double temperature(int epoch) const;
};

// Soft staircase: sum of sigmoids at the bin edges +-k*step with the jump
// heights of the hard reconstruction (1.5 step at k = 1, step beyond) and
// width 0.2 step.
double soft_staircase(double x, double step);
double soft_staircase_derivative(double x, double step);

enum class SurrogateMode {
  hard,    // value is the hard reconstruction; derivative is the annealed surrogate
  smooth,  // value and derivative both follow x + T * (soft(x) - x)
};

struct SurrogateResult {
  Tensor value;
  Tensor derivative;  // elementwise d value / d x
};

// Backward derivative 1 + T * (soft'(x) - 1): the straight-through
// estimator at T = 0.
SurrogateResult surrogate_quantize(const Tensor& coeffs, const Quantizer& q, double temperature,
                                   SurrogateMode mode);

// Discretized Laplacian of scale b over deadzone indices:
// P(0) = 1 - e^(-step/b), P(k) = e^(-|k| step/b) (1 - e^(-step/b)) / 2.
// Indices beyond kMaxModeledIndex share the folded tail probability and pay
// kEscapeBits more for a raw magnitude.
inline constexpr std::int32_t kMaxModeledIndex = 4096;
inline constexpr double kEscapeBits = 32.0;

double index_bits(std::int32_t q, double step, double scale);
// d index_bits / d ln(scale).
double index_bits_dlogscale(std::int32_t q, double step, double scale);
// Discrete entropy of the model, bits per index.
double model_entropy(double step, double scale);

struct RateEstimate {
  double bits = 0.0;
  std::vector<double> per_index;
  double d_log_scale = 0.0;
};

RateEstimate rate_estimate(const IndexPlane& indices, double step, double scale);

// Per-class Laplacian scales, stored as ln(b).
struct RateModel {
  std::vector<double> log_scale;
  double scale(std::size_t cls) const;
};

// Coarse-to-fine subband order: LL_D, HL_D, LH_D, HH_D, HL_(D-1), ...;
// position in this list is the subband class.
std::vector<std::pair<int, Band>> subband_order(int levels);
std::vector<const Tensor*> ordered_bands(const SubbandPyramid& p);
std::vector<Tensor*> ordered_bands(SubbandPyramid& p);

// Binary adaptive range coder (carry-propagating, byte oriented). Each bit
// model blends a fast and a slow estimate.
struct BitModel {
  std::uint16_t fast = 1u << 14;
  std::uint16_t slow = 1u << 14;
  std::uint32_t p0() const { return (static_cast<std::uint32_t>(fast) + slow) >> 1; }
  void update(int bit);
};

class RangeEncoder {
 public:
  void encode(BitModel& m, int bit);
  void encode_bypass(std::uint32_t value, int bits);
  std::vector<std::uint8_t> finish();
  // Bytes already committed plus bytes held back for carry resolution.
  std::size_t pending_size() const { return out_.size() + cache_size_; }

 private:
  void shift_low();
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

// Reads past the end of its byte span as zeros and never touches memory
// beyond it.
class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes);
  int decode(BitModel& m);
  std::uint32_t decode_bypass(int bits);
  std::size_t bytes_consumed() const { return pos_; }

 private:
  std::uint8_t next();
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// Bitplane coding of one subband, most significant plane first.
struct EncodedPlane {
  std::vector<std::uint8_t> bytes;
  int planes = 0;
  // prefix[i]: bytes sufficient to decode planes planes-1 .. planes-1-i
  // exactly; the last entry is the full length.
  std::vector<std::uint32_t> prefix;
};

inline constexpr int kMaxPlanes = 31;

// Without `truncation` every prefix is the full length (size-only use).
EncodedPlane encode_plane(const IndexPlane& indices, bool truncation = true);
// Decodes planes down to `stop_plane` (0 = lossless) and returns entries
// sign * (|q| >> stop_plane).
IndexPlane decode_plane(std::span<const std::uint8_t> bytes, int height, int width, int stop_plane = 0);

// Payload framing: per subband a u32 LE length, the coder bytes and the
// terminator 0xFF 0x7F.
struct SubbandPayload {
  std::vector<std::uint8_t> bytes;
  std::vector<EncodedPlane> planes;  // bytes dropped, truncation info kept
};

SubbandPayload encode_subbands(const std::vector<IndexPlane>& subbands, bool truncation = true);
// Frame contents in order; `base_offset` is only used in error messages.
std::vector<std::span<const std::uint8_t>> parse_frames(std::span<const std::uint8_t> payload,
                                                        std::size_t count, std::size_t base_offset = 0,
                                                        std::size_t* consumed = nullptr);
std::vector<IndexPlane> decode_subbands(std::span<const std::uint8_t> payload,
                                        const std::vector<std::pair<int, int>>& extents);

}  // namespace liftwave
