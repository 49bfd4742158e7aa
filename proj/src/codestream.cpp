#include "liftwave/codestream.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>

#include "liftwave/errors.hpp"

namespace liftwave {

Digest weights_digest(const ParamStore& weights) {
  const auto bytes = serialize_weights(weights);
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 || len != d.size())
    throw IoError("SHA-256 computation failed");
  return d;
}

std::string digest_hex(const Digest& d) {
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : d) {
    s.push_back(hex[b >> 4]);
    s.push_back(hex[b & 15]);
  }
  return s;
}

namespace {

void put_u8(std::vector<std::uint8_t>& o, std::uint8_t v) { o.push_back(v); }
void put_u16(std::vector<std::uint8_t>& o, std::uint16_t v) {
  o.push_back(static_cast<std::uint8_t>(v));
  o.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& o, std::uint32_t v) {
  for (int k = 0; k < 32; k += 8) o.push_back(static_cast<std::uint8_t>(v >> k));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t pos() const { return pos_; }
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) throw FormatError(std::string("codestream header incomplete: ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return b_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> CodestreamHeader::serialize() const {
  std::vector<std::uint8_t> o = {'L', 'W', 'A', 'V'};
  put_u16(o, version);
  put_u32(o, width);
  put_u32(o, height);
  put_u8(o, levels);
  if (structure.size() > 255) throw ConfigError("structure name too long");
  put_u8(o, static_cast<std::uint8_t>(structure.size()));
  o.insert(o.end(), structure.begin(), structure.end());
  for (int v : {config.channels, config.kernel, config.res_blocks})
    put_u8(o, static_cast<std::uint8_t>(std::clamp(v, 0, 255)));
  put_u8(o, config.compact ? 1 : 0);
  o.insert(o.end(), digest.begin(), digest.end());
  put_u16(o, static_cast<std::uint16_t>(steps.size()));
  for (float f : steps) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(o, bits);
  }
  for (const auto& t : truncation) {
    put_u8(o, static_cast<std::uint8_t>(t.size()));
    for (std::uint32_t v : t) put_u32(o, v);
  }
  return o;
}

CodestreamHeader CodestreamHeader::parse(std::span<const std::uint8_t> bytes, std::size_t* header_size) {
  Cursor c(bytes);
  CodestreamHeader h;
  auto magic = c.take(4, "magic");
  if (std::memcmp(magic.data(), "LWAV", 4) != 0) throw FormatError("not a codestream (bad magic)", 0);
  h.version = c.u16("version");
  if (h.version != kCodestreamVersion)
    throw FormatError("unsupported codestream version " + std::to_string(h.version), 4);
  h.width = c.u32("width");
  h.height = c.u32("height");
  h.levels = c.u8("levels");
  if (h.levels < 1 || h.levels > 16) throw FormatError("invalid level count", c.pos() - 1);
  if (h.width > (1u << 20) || h.height > (1u << 20) || h.width < (1u << h.levels) || h.height < (1u << h.levels))
    throw FormatError("invalid image extents", 6);
  const std::uint8_t nlen = c.u8("structure name length");
  auto name = c.take(nlen, "structure name");
  h.structure.assign(name.begin(), name.end());
  bool known = false;
  for (const auto& n : structure_names()) known = known || n == h.structure;
  if (!known) throw FormatError("unknown structure '" + h.structure + "'", c.pos() - nlen);
  h.config.channels = c.u8("channels");
  h.config.kernel = c.u8("kernel");
  h.config.res_blocks = c.u8("residual blocks");
  const std::uint8_t compact = c.u8("compact flag");
  if (compact > 1) throw FormatError("invalid compact flag", c.pos() - 1);
  h.config.compact = compact == 1;
  try {
    h.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid net configuration: ") + e.what(), c.pos() - 4);
  }
  auto dg = c.take(32, "digest");
  std::copy(dg.begin(), dg.end(), h.digest.begin());
  const std::uint16_t classes = c.u16("class count");
  if (classes != 3u * h.levels + 1) throw FormatError("class count does not match levels", c.pos() - 2);
  for (std::uint16_t i = 0; i < classes; ++i) {
    const std::uint32_t bits = c.u32("step table");
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f) || !(f > 0)) throw FormatError("invalid quantizer step", c.pos() - 4);
    h.steps.push_back(f);
  }
  for (std::uint16_t i = 0; i < classes; ++i) {
    const std::uint8_t planes = c.u8("truncation table");
    if (planes > kMaxPlanes) throw FormatError("invalid bitplane count", c.pos() - 1);
    std::vector<std::uint32_t> t;
    for (std::uint8_t p = 0; p < planes; ++p) {
      t.push_back(c.u32("truncation table"));
      if (p > 0 && t[p] < t[p - 1]) throw FormatError("truncation table not monotone", c.pos() - 4);
    }
    h.truncation.push_back(std::move(t));
  }
  if (header_size) *header_size = c.pos();
  return h;
}

const std::vector<double>& class_norms(const std::string& base, int levels) {
  static std::mutex mu;
  static std::map<std::pair<std::string, int>, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(base, levels);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const LiftingStructure st = base_structure(base, levels);
  const int canvas = 16 << levels;
  const SubbandPyramid zero = make_pyramid(canvas, canvas, levels);
  std::vector<double> norms;
  for (const auto& [d, b] : subband_order(levels)) {
    SubbandPyramid p = zero;
    Tensor& t = p.band(d, b);
    t.at(0, (t.height() / 2) & ~1, (t.width() / 2) & ~1) = 1.0;
    norms.push_back(std::sqrt(synthesize(p, st, {}).squared_norm()));
  }
  return cache.emplace(key, std::move(norms)).first->second;
}

std::vector<double> class_steps(double base_step, const std::string& base, int levels) {
  if (!(base_step > 0) || !std::isfinite(base_step)) throw ConfigError("base quantizer step must be positive");
  std::vector<double> steps;
  for (double n : class_norms(base, levels)) steps.push_back(static_cast<float>(base_step / n));
  return steps;
}

LearnedStructure structure_for(const CodestreamHeader& h) {
  return make_structure(h.structure, h.config, h.levels);
}

Analysis analyze_for_coding(const Tensor& image, const LearnedStructure& model, const ParamStore& weights) {
  if (image.rank() != 3 || image.channels() != 1) throw InputError("encode expects a single plane");
  Analysis a;
  const ParamStore rounded = deserialize_weights(serialize_weights(weights));
  a.digest = weights_digest(rounded);
  Tensor x = image;
  for (double& v : x.values()) v -= kLevelShift;
  a.pyramid = analyze(x, model.structure, rounded);
  return a;
}

EncodeResult encode_analysis(const Analysis& a, const LearnedStructure& model, double base_step, bool truncation) {
  const LiftingStructure& st = model.structure;
  const std::vector<double> steps = class_steps(base_step, model.base, st.levels);
  EncodeResult r;
  const auto bands = ordered_bands(a.pyramid);
  for (std::size_t c = 0; c < bands.size(); ++c) r.indices.push_back(quantize(*bands[c], Quantizer{steps[c]}));
  SubbandPayload payload = encode_subbands(r.indices, truncation);
  CodestreamHeader& h = r.header;
  h.width = static_cast<std::uint32_t>(a.pyramid.width);
  h.height = static_cast<std::uint32_t>(a.pyramid.height);
  h.levels = static_cast<std::uint8_t>(st.levels);
  h.structure = st.name;
  h.config = model.config;
  h.digest = a.digest;
  for (double s : steps) h.steps.push_back(static_cast<float>(s));
  for (const auto& e : payload.planes) h.truncation.push_back(e.prefix);
  r.bytes = h.serialize();
  r.bytes.insert(r.bytes.end(), payload.bytes.begin(), payload.bytes.end());
  r.bpp = 8.0 * static_cast<double>(r.bytes.size()) / (static_cast<double>(a.pyramid.width) * a.pyramid.height);
  return r;
}

EncodeResult encode_image(const Tensor& image, const LearnedStructure& model, const ParamStore& weights,
                          double base_step) {
  return encode_analysis(analyze_for_coding(image, model, weights), model, base_step);
}

DecodeResult decode_image(std::span<const std::uint8_t> bytes, const ParamStore& weights,
                          std::optional<std::size_t> max_bytes) {
  const auto visible = max_bytes ? bytes.first(std::min(bytes.size(), *max_bytes)) : bytes;
  DecodeResult r;
  std::size_t hsize = 0;
  r.header = CodestreamHeader::parse(visible, &hsize);
  const CodestreamHeader& h = r.header;
  if (weights_digest(weights) != h.digest)
    throw DigestMismatch("weight digest " + digest_hex(weights_digest(weights)) +
                             " does not match codestream digest " + digest_hex(h.digest),
                         20 + h.structure.size());
  const LearnedStructure model = structure_for(h);
  SubbandPyramid pyr = make_pyramid(static_cast<int>(h.height), static_cast<int>(h.width), h.levels);
  auto bands = ordered_bands(pyr);
  const std::size_t classes = bands.size();
  std::size_t consumed = 0;
  const auto frames = parse_frames(bytes.subspan(hsize), classes, hsize, &consumed);
  if (!max_bytes && hsize + consumed != bytes.size())
    throw FormatError("trailing bytes after the last subband", hsize + consumed);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& t = h.truncation[c];
    const std::size_t full = t.empty() ? 0 : t.back();
    if (frames[c].size() != full)
      throw FormatError("subband " + std::to_string(c) + " length disagrees with truncation table",
                        static_cast<std::size_t>(frames[c].data() - bytes.data()) - 4);
  }
  // Quality layers: bitplane p (in index units) from the top, subbands
  // coarse-to-fine within a plane.
  std::vector<std::size_t> layers(classes, 0);
  if (max_bytes) {
    std::size_t used = hsize + 6 * classes;
    int top = 0;
    for (const auto& t : h.truncation) top = std::max(top, static_cast<int>(t.size()));
    if (used > *max_bytes)
      throw FormatError("byte budget " + std::to_string(*max_bytes) + " is below the header and framing size " +
                            std::to_string(used),
                        *max_bytes);
    bool done = false;
    for (int p = top - 1; p >= 0 && !done; --p) {
      for (std::size_t c = 0; c < classes; ++c) {
        const auto& t = h.truncation[c];
        const int planes = static_cast<int>(t.size());
        if (p >= planes) continue;
        const std::size_t before = layers[c] ? t[layers[c] - 1] : 0;
        const std::size_t after = t[static_cast<std::size_t>(planes - 1 - p)];
        if (used + (after - before) > *max_bytes) {
          done = true;
          break;
        }
        used += after - before;
        layers[c] = static_cast<std::size_t>(planes - p);
      }
    }
    r.bytes_used = used;
  } else {
    for (std::size_t c = 0; c < classes; ++c) layers[c] = h.truncation[c].size();
    r.bytes_used = bytes.size();
  }
  for (std::size_t c = 0; c < classes; ++c) {
    const auto& t = h.truncation[c];
    const int planes = static_cast<int>(t.size());
    Tensor& band = *bands[c];
    if (layers[c] == 0) continue;
    const int stop = planes - static_cast<int>(layers[c]);
    const std::size_t len = t[layers[c] - 1];
    IndexPlane part;
    try {
      part = decode_plane(frames[c].first(len), band.height(), band.width(), stop);
    } catch (const FormatError& e) {
      throw FormatError("subband " + std::to_string(c) + ": " + e.what(),
                        static_cast<std::size_t>(frames[c].data() - bytes.data()));
    }
    band = dequantize_partial(part, stop, Quantizer{h.steps[c]});
  }
  const ParamStore rounded = deserialize_weights(serialize_weights(weights));
  r.image = synthesize(pyr, model.structure, rounded);
  for (double& v : r.image.values()) v += kLevelShift;
  return r;
}

}  // namespace liftwave
