#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liftwave/coder.hpp"
#include "liftwave/learned_ops.hpp"
#include "liftwave/nn.hpp"

namespace liftwave {

using Digest = std::array<std::uint8_t, 32>;

// SHA-256 of the canonical weight container bytes.
Digest weights_digest(const ParamStore& weights);
std::string digest_hex(const Digest& d);

inline constexpr std::uint16_t kCodestreamVersion = 1;

// Layout (little-endian): "LWAV", u16 version, u32 width, u32 height,
// u8 levels, u8 name length + name, u8 N, u8 K, u8 R, u8 compact,
// 32-byte weight digest, u16 class count + f32 step per class, then per
// class u8 plane count + u32 prefix length per plane. Subband frames follow
// in coarse-to-fine class order.
struct CodestreamHeader {
  std::uint16_t version = kCodestreamVersion;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t levels = 0;
  std::string structure;
  NetConfig config;
  Digest digest{};
  std::vector<float> steps;
  std::vector<std::vector<std::uint32_t>> truncation;

  std::vector<std::uint8_t> serialize() const;
  // Throws FormatError (with offset) on anything malformed or truncated.
  static CodestreamHeader parse(std::span<const std::uint8_t> bytes, std::size_t* header_size = nullptr);
};

// L2 norm of the base wavelet's synthesis basis function for each subband
// class (coarse-to-fine order), by impulse response.
const std::vector<double>& class_norms(const std::string& base, int levels);
// step_c = base_step / norm_c, rounded to f32 as stored in the header.
std::vector<double> class_steps(double base_step, const std::string& base, int levels);

// Level shift between [0, 255] pixels and transform input.
inline constexpr double kLevelShift = 128.0;

struct EncodeResult {
  std::vector<std::uint8_t> bytes;
  CodestreamHeader header;
  std::vector<IndexPlane> indices;  // coarse-to-fine
  double bpp = 0.0;
};

// `weights` are rounded through the container format first, as the decoder
// sees them.
EncodeResult encode_image(const Tensor& image, const LearnedStructure& model, const ParamStore& weights,
                          double base_step);

// Analysis is independent of the step, so sweeps analyze once.
struct Analysis {
  SubbandPyramid pyramid;
  Digest digest;
};

Analysis analyze_for_coding(const Tensor& image, const LearnedStructure& model, const ParamStore& weights);
// Without `truncation` the table holds full lengths only; the size is the
// same.
EncodeResult encode_analysis(const Analysis& a, const LearnedStructure& model, double base_step,
                             bool truncation = true);

struct DecodeResult {
  CodestreamHeader header;
  Tensor image;  // unrounded reconstruction on the pixel scale
  std::size_t bytes_used = 0;
};

// Full decode, or the quality layers fitting in `max_bytes` (counted as the
// size of the equivalently truncated codestream).
DecodeResult decode_image(std::span<const std::uint8_t> bytes, const ParamStore& weights,
                          std::optional<std::size_t> max_bytes = std::nullopt);

// Rebuilds the structure a header names.
LearnedStructure structure_for(const CodestreamHeader& h);

}  // namespace liftwave
