#include "liftwave/coder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <functional>
#include <memory>
#include <numbers>
#include <type_traits>

#include "liftwave/errors.hpp"

namespace liftwave {

void Quantizer::validate() const {
  if (!(step > 0.0) || !std::isfinite(step))
    throw ConfigError("quantizer step must be positive, got " + std::to_string(step));
}

bool IndexPlane::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](std::int32_t v) { return v == 0; });
}

namespace {
constexpr double kMaxMagnitude = 1073741824.0;  // 2^30, keeps plane counts <= 31
}

IndexPlane quantize(const Tensor& coeffs, const Quantizer& q) {
  q.validate();
  if (coeffs.rank() != 3 || coeffs.channels() != 1)
    throw InputError("quantize expects a single plane, got " + coeffs.shape_string());
  IndexPlane out;
  out.height = coeffs.height();
  out.width = coeffs.width();
  out.values.resize(coeffs.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double x = coeffs[i];
    if (!std::isfinite(x)) throw InputError("quantize: non-finite coefficient");
    const double m = std::min(std::floor(std::abs(x) / q.step), kMaxMagnitude);
    out.values[i] = static_cast<std::int32_t>(x < 0 ? -m : m);
  }
  return out;
}

Tensor dequantize(const IndexPlane& indices, const Quantizer& q) {
  return dequantize_partial(indices, 0, q);
}

Tensor dequantize_partial(const IndexPlane& partial, int shift, const Quantizer& q) {
  q.validate();
  Tensor out(1, partial.height, partial.width);
  const double unit = std::ldexp(q.step, shift);
  for (std::size_t i = 0; i < partial.values.size(); ++i) {
    const std::int32_t v = partial.values[i];
    if (v == 0) continue;
    const double mag = (std::abs(static_cast<double>(v)) + 0.5) * unit;
    out[i] = v < 0 ? -mag : mag;
  }
  return out;
}

Tensor quantize_reconstruct(const Tensor& coeffs, const Quantizer& q) {
  return dequantize(quantize(coeffs, q), q);
}

double AnnealSchedule::temperature(int epoch) const {
  return std::max(t_min, t0 * std::pow(decay, epoch));
}

namespace {

double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

constexpr double kSoftWidth = 0.2;   // sigmoid width in steps
constexpr double kSoftReach = 40.0;  // widths beyond which a sigmoid is saturated

double jump(long k, double step) { return k == 1 ? 1.5 * step : step; }

// F(z) = sum_k J_k sigmoid((z - k step) / w) and its derivative.
void edge_sum(double z, double step, double& value, double& deriv) {
  const double w = kSoftWidth * step;
  value = 0.0;
  deriv = 0.0;
  const double kmax = std::floor((z + kSoftReach * w) / step);
  if (kmax < 1) return;
  const double kexact = std::max(1.0, std::ceil((z - kSoftReach * w) / step));
  const double saturated = kexact - 1.0;  // k = 1 .. kexact-1 fully on
  if (saturated >= 1.0) value += 1.5 * step + (saturated - 1.0) * step;
  for (double k = kexact; k <= kmax; k += 1.0) {
    const double s = sigmoid((z - k * step) / w);
    const double j = jump(static_cast<long>(k), step);
    value += j * s;
    deriv += j * s * (1.0 - s) / w;
  }
}

}  // namespace

double soft_staircase(double x, double step) {
  double a, da, b, db;
  edge_sum(x, step, a, da);
  edge_sum(-x, step, b, db);
  return a - b;
}

double soft_staircase_derivative(double x, double step) {
  double a, da, b, db;
  edge_sum(x, step, a, da);
  edge_sum(-x, step, b, db);
  return da + db;
}

SurrogateResult surrogate_quantize(const Tensor& coeffs, const Quantizer& q, double temperature,
                                   SurrogateMode mode) {
  q.validate();
  if (temperature < 0.0) throw ConfigError("surrogate temperature must be >= 0");
  SurrogateResult r;
  r.value = mode == SurrogateMode::hard ? quantize_reconstruct(coeffs, q) : Tensor(coeffs.shape());
  r.derivative = Tensor(coeffs.shape());
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double x = coeffs[i];
    double a, da, b, db;
    edge_sum(x, q.step, a, da);
    edge_sum(-x, q.step, b, db);
    r.derivative[i] = 1.0 + temperature * (da + db - 1.0);
    if (mode == SurrogateMode::smooth) r.value[i] = x + temperature * ((a - b) - x);
  }
  return r;
}

double index_bits(std::int32_t q, double step, double scale) {
  const double t = step / scale;
  const double zero_bits = -std::log2(-std::expm1(-t));
  const double k = std::abs(static_cast<double>(q));
  if (k == 0) return zero_bits;
  if (k <= kMaxModeledIndex) return 1.0 + zero_bits + k * t / std::numbers::ln2;
  return (kMaxModeledIndex + 1.0) * t / std::numbers::ln2 + kEscapeBits;
}

double index_bits_dlogscale(std::int32_t q, double step, double scale) {
  const double t = step / scale;
  const double dzero = t / (std::expm1(t) * std::numbers::ln2);
  const double k = std::abs(static_cast<double>(q));
  if (k == 0) return dzero;
  if (k <= kMaxModeledIndex) return dzero - k * t / std::numbers::ln2;
  return -(kMaxModeledIndex + 1.0) * t / std::numbers::ln2;
}

double model_entropy(double step, double scale) {
  const double t = step / scale;
  double h = 0.0;
  const double p0 = -std::expm1(-t);
  h += p0 * index_bits(0, step, scale);
  for (std::int32_t k = 1; k <= kMaxModeledIndex; ++k) {
    const double pk = std::exp(-k * t) * p0;  // both signs
    if (pk < 1e-300) break;
    h += pk * index_bits(k, step, scale);
  }
  const double pesc = std::exp(-(kMaxModeledIndex + 1.0) * t);
  if (pesc > 0) h += pesc * index_bits(kMaxModeledIndex + 1, step, scale);
  return h;
}

RateEstimate rate_estimate(const IndexPlane& indices, double step, double scale) {
  if (!(step > 0) || !(scale > 0)) throw ConfigError("rate model needs positive step and scale");
  RateEstimate r;
  r.per_index.reserve(indices.values.size());
  for (std::int32_t q : indices.values) {
    const double l = index_bits(q, step, scale);
    r.per_index.push_back(l);
    r.bits += l;
    r.d_log_scale += index_bits_dlogscale(q, step, scale);
  }
  return r;
}

double RateModel::scale(std::size_t cls) const {
  if (cls >= log_scale.size()) throw ConfigError("rate model class out of range");
  return std::exp(log_scale[cls]);
}

std::vector<std::pair<int, Band>> subband_order(int levels) {
  std::vector<std::pair<int, Band>> o{{levels, Band::LL}};
  for (int d = levels; d >= 1; --d)
    for (Band b : {Band::HL, Band::LH, Band::HH}) o.emplace_back(d, b);
  return o;
}

std::vector<const Tensor*> ordered_bands(const SubbandPyramid& p) {
  std::vector<const Tensor*> out;
  for (const auto& [d, b] : subband_order(p.levels())) out.push_back(&p.band(d, b));
  return out;
}

std::vector<Tensor*> ordered_bands(SubbandPyramid& p) {
  std::vector<Tensor*> out;
  for (const auto& [d, b] : subband_order(p.levels())) out.push_back(&p.band(d, b));
  return out;
}

// --- range coder ---

namespace {
constexpr int kProbBits = 15;
constexpr std::uint32_t kTop = 1u << 24;
}  // namespace

void BitModel::update(int bit) {
  if (bit == 0) {
    fast = static_cast<std::uint16_t>(fast + (((1u << kProbBits) - fast) >> 4));
    slow = static_cast<std::uint16_t>(slow + (((1u << kProbBits) - slow) >> 7));
  } else {
    fast = static_cast<std::uint16_t>(fast - (fast >> 4));
    slow = static_cast<std::uint16_t>(slow - (slow >> 7));
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::encode(BitModel& m, int bit) {
  const std::uint32_t bound = (range_ >> kProbBits) * m.p0();
  if (bit == 0) {
    range_ = bound;
  } else {
    low_ += bound;
    range_ -= bound;
  }
  m.update(bit);
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_bypass(std::uint32_t value, int bits) {
  for (int i = bits - 1; i >= 0; --i) {
    range_ >>= 1;
    if ((value >> i) & 1u) low_ += range_;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next();
}

std::uint8_t RangeDecoder::next() {
  const std::uint8_t b = pos_ < bytes_.size() ? bytes_[pos_] : 0;
  ++pos_;
  return b;
}

int RangeDecoder::decode(BitModel& m) {
  const std::uint32_t bound = (range_ >> kProbBits) * m.p0();
  int bit;
  if (code_ < bound) {
    range_ = bound;
    bit = 0;
  } else {
    code_ -= bound;
    range_ -= bound;
    bit = 1;
  }
  m.update(bit);
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next();
  }
  return bit;
}

std::uint32_t RangeDecoder::decode_bypass(int bits) {
  std::uint32_t v = 0;
  for (int i = 0; i < bits; ++i) {
    range_ >>= 1;
    std::uint32_t bit = 0;
    if (code_ >= range_) {
      code_ -= range_;
      bit = 1;
    }
    v = (v << 1) | bit;
    while (range_ < kTop) {
      range_ <<= 8;
      code_ = (code_ << 8) | next();
    }
  }
  return v;
}

// --- bitplane coding ---

namespace {

constexpr int kPlaneCountBits = 5;

struct PlaneContexts {
  BitModel sig[kMaxPlanes + 1][3];
  BitModel sign[3];
  BitModel refine[kMaxPlanes + 1][3];
};

// Significant 8-neighbours, capped at 2.
int neighbour_class(const std::vector<std::int8_t>& sig_plane, int h, int w, int y, int x) {
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    const int yy = y + dy;
    if (yy < 0 || yy >= h) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      const int xx = x + dx;
      if ((dy == 0 && dx == 0) || xx < 0 || xx >= w) continue;
      n += sig_plane[static_cast<std::size_t>(yy) * w + xx] >= 0;
      if (n >= 2) return 2;
    }
  }
  return n;
}

// Runs planes planes-1 .. stop of the shared encode/decode recursion. With
// an encoder, bits come from `mag`/`neg`; with a decoder, they are filled in.
template <class Coder>
void code_planes(Coder& coder, int h, int w, int planes, int stop, std::vector<std::uint32_t>& mag,
                 std::vector<std::uint8_t>& neg, const std::function<void(int)>& after_plane) {
  constexpr bool encoding = std::is_same_v<Coder, RangeEncoder>;
  auto ctx = std::make_unique<PlaneContexts>();
  std::vector<std::int8_t> sig_plane(static_cast<std::size_t>(h) * w, -1);
  std::vector<std::uint32_t> known(static_cast<std::size_t>(h) * w, 0);
  for (int p = planes - 1; p >= stop; --p) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (sig_plane[i] < 0) {
          BitModel& m = ctx->sig[p][neighbour_class(sig_plane, h, w, y, x)];
          int bit;
          if constexpr (encoding) {
            bit = static_cast<int>((mag[i] >> p) & 1u);
            coder.encode(m, bit);
          } else {
            bit = coder.decode(m);
          }
          if (bit) {
            sig_plane[i] = static_cast<std::int8_t>(p);
            known[i] = 1;
            BitModel& sm = ctx->sign[0];
            if constexpr (encoding)
              coder.encode(sm, neg[i]);
            else
              neg[i] = static_cast<std::uint8_t>(coder.decode(sm));
          }
        } else {
          const int age = std::min(sig_plane[i] - p - 1, 2);
          BitModel& m = ctx->refine[p][age];
          int bit;
          if constexpr (encoding) {
            bit = static_cast<int>((mag[i] >> p) & 1u);
            coder.encode(m, bit);
          } else {
            bit = coder.decode(m);
          }
          known[i] = (known[i] << 1) | static_cast<std::uint32_t>(bit);
        }
      }
    }
    if (after_plane) after_plane(p);
  }
  if constexpr (!encoding) mag = std::move(known);
}

}  // namespace

IndexPlane decode_plane(std::span<const std::uint8_t> bytes, int height, int width, int stop_plane) {
  IndexPlane out;
  out.height = height;
  out.width = width;
  out.values.assign(static_cast<std::size_t>(height) * width, 0);
  if (bytes.empty()) return out;
  RangeDecoder dec(bytes);
  const int planes = static_cast<int>(dec.decode_bypass(kPlaneCountBits));
  if (planes < 1 || planes > kMaxPlanes) throw FormatError("invalid bitplane count " + std::to_string(planes), 0);
  if (stop_plane >= planes) return out;
  std::vector<std::uint32_t> mag;
  std::vector<std::uint8_t> neg(out.values.size(), 0);
  code_planes(dec, height, width, planes, stop_plane, mag, neg, nullptr);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const auto v = static_cast<std::int32_t>(mag[i]);
    out.values[i] = neg[i] ? -v : v;
  }
  return out;
}

EncodedPlane encode_plane(const IndexPlane& indices, bool truncation) {
  EncodedPlane e;
  const std::size_t n = indices.values.size();
  std::vector<std::uint32_t> mag(n);
  std::vector<std::uint8_t> neg(n);
  std::uint32_t maxmag = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t v = indices.values[i];
    if (v == std::numeric_limits<std::int32_t>::min()) throw InputError("index magnitude out of range");
    mag[i] = static_cast<std::uint32_t>(v < 0 ? -v : v);
    neg[i] = v < 0;
    maxmag = std::max(maxmag, mag[i]);
  }
  e.planes = std::bit_width(maxmag);
  if (e.planes == 0) return e;
  if (e.planes > kMaxPlanes) throw InputError("index magnitude needs more than 31 bitplanes");
  RangeEncoder enc;
  enc.encode_bypass(static_cast<std::uint32_t>(e.planes), kPlaneCountBits);
  std::vector<std::size_t> checkpoints;
  code_planes(enc, indices.height, indices.width, e.planes, 0, mag, neg,
              [&](int) { checkpoints.push_back(enc.pending_size()); });
  e.bytes = enc.finish();
  if (!truncation) {
    e.prefix.assign(static_cast<std::size_t>(e.planes), static_cast<std::uint32_t>(e.bytes.size()));
    return e;
  }
  // Shortest prefix (searching upward from the coder position at the end of
  // each plane) whose zero-padded decode reproduces that plane exactly.
  std::size_t prev = 0;
  for (int i = 0; i < e.planes; ++i) {
    const int p = e.planes - 1 - i;
    IndexPlane expect;
    expect.height = indices.height;
    expect.width = indices.width;
    expect.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = static_cast<std::int32_t>(mag[j] >> p);
      expect.values[j] = neg[j] ? -v : v;
    }
    std::size_t len = std::min(std::max(prev, checkpoints[static_cast<std::size_t>(i)]), e.bytes.size());
    for (; len < e.bytes.size(); ++len) {
      try {
        if (decode_plane(std::span(e.bytes).first(len), indices.height, indices.width, p) == expect) break;
      } catch (const FormatError&) {
      }
    }
    e.prefix.push_back(static_cast<std::uint32_t>(len));
    prev = len;
  }
  // The complete stream is the last layer.
  e.prefix.back() = static_cast<std::uint32_t>(e.bytes.size());
  return e;
}

SubbandPayload encode_subbands(const std::vector<IndexPlane>& subbands, bool truncation) {
  SubbandPayload out;
  for (const IndexPlane& s : subbands) {
    EncodedPlane e = encode_plane(s, truncation);
    const auto len = static_cast<std::uint32_t>(e.bytes.size());
    for (int k = 0; k < 32; k += 8) out.bytes.push_back(static_cast<std::uint8_t>(len >> k));
    out.bytes.insert(out.bytes.end(), e.bytes.begin(), e.bytes.end());
    out.bytes.push_back(0xFF);
    out.bytes.push_back(0x7F);
    e.bytes.clear();
    out.planes.push_back(std::move(e));
  }
  return out;
}

std::vector<std::span<const std::uint8_t>> parse_frames(std::span<const std::uint8_t> payload,
                                                        std::size_t count, std::size_t base_offset,
                                                        std::size_t* consumed) {
  std::vector<std::span<const std::uint8_t>> frames;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < count; ++f) {
    if (payload.size() - pos < 4)
      throw FormatError("truncated frame length for subband " + std::to_string(f), base_offset + pos);
    std::uint32_t len = 0;
    for (int k = 0; k < 4; ++k) len |= static_cast<std::uint32_t>(payload[pos + k]) << (8 * k);
    pos += 4;
    if (payload.size() - pos < static_cast<std::size_t>(len) + 2)
      throw FormatError("truncated payload for subband " + std::to_string(f), base_offset + pos);
    frames.push_back(payload.subspan(pos, len));
    pos += len;
    if (payload[pos] != 0xFF || payload[pos + 1] != 0x7F)
      throw FormatError("missing frame terminator for subband " + std::to_string(f), base_offset + pos);
    pos += 2;
  }
  if (consumed) *consumed = pos;
  return frames;
}

std::vector<IndexPlane> decode_subbands(std::span<const std::uint8_t> payload,
                                        const std::vector<std::pair<int, int>>& extents) {
  std::size_t consumed = 0;
  const auto frames = parse_frames(payload, extents.size(), 0, &consumed);
  if (consumed != payload.size()) throw FormatError("trailing bytes after subband frames", consumed);
  std::vector<IndexPlane> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    try {
      out.push_back(decode_plane(frames[i], extents[i].first, extents[i].second));
    } catch (const FormatError& e) {
      throw FormatError("subband " + std::to_string(i) + ": " + e.what(),
                        static_cast<std::size_t>(frames[i].data() - payload.data()));
    }
  }
  return out;
}

}  // namespace liftwave
