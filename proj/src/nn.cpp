#include "liftwave/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "liftwave/errors.hpp"

namespace liftwave {

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::accumulate(const std::string& name, const Tensor& value) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    entries_.emplace(name, value);
    return;
  }
  if (!it->second.same_shape(value))
    throw ConfigError("gradient shape mismatch for '" + name + "': " +
                      it->second.shape_string() + " vs " + value.shape_string());
  it->second += value;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

ParamStore ParamStore::like(double v) const {
  ParamStore out;
  for (const auto& [name, t] : entries_) out.entries_.emplace(name, Tensor(t.shape(), v));
  return out;
}

bool ParamStore::all_finite() const {
  for (const auto& [name, t] : entries_)
    if (!t.all_finite()) return false;
  return true;
}

ParamStore ParamStore::with_prefix(const std::string& prefix) const {
  ParamStore out;
  for (const auto& [name, t] : entries_)
    if (name.compare(0, prefix.size(), prefix) == 0) out.entries_.emplace(name, t);
  return out;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& [name, t] : other.entries_) entries_[name] = t;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || !a->second.same_shape(b->second)) return false;
    if (std::memcmp(a->second.data(), b->second.data(), a->second.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

namespace {

void check_kernel(const Tensor& input, const Tensor& kernels) {
  if (input.rank() != 3) throw ConfigError("conv2d: input must be (c, h, w), got " + input.shape_string());
  if (kernels.rank() != 4) throw ConfigError("conv2d: kernels must be 4D, got " + kernels.shape_string());
  if (kernels.dim(1) != input.channels())
    throw ConfigError("conv2d: layer expects " + std::to_string(kernels.dim(1)) +
                      " input channels, got " + std::to_string(input.channels()));
  if (kernels.dim(2) % 2 == 0 || kernels.dim(3) % 2 == 0)
    throw ConfigError("conv2d: kernel extents must be odd, got " + kernels.shape_string());
}

// Mirror-padded copy of every input channel.
struct Padded {
  int ry, rx, ph, pw;
  std::vector<double> data;
  const double* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * ph * pw; }
};

Padded pad_input(const Tensor& input, int ry, int rx) {
  const int h = input.height(), w = input.width();
  Padded p{ry, rx, h + 2 * ry, w + 2 * rx, {}};
  p.data.resize(static_cast<std::size_t>(input.channels()) * p.ph * p.pw);
  std::vector<int> xmap(p.pw);
  for (int xx = 0; xx < p.pw; ++xx) xmap[xx] = mirror_index(xx - rx, w);
  for (int c = 0; c < input.channels(); ++c) {
    double* dst = p.data.data() + static_cast<std::size_t>(c) * p.ph * p.pw;
    for (int yy = 0; yy < p.ph; ++yy) {
      const int sy = mirror_index(yy - ry, h);
      for (int xx = 0; xx < p.pw; ++xx) dst[yy * p.pw + xx] = input.at(c, sy, xmap[xx]);
    }
  }
  return p;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor* bias) {
  check_kernel(input, kernels);
  const int co = kernels.dim(0), ci = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
  const int h = input.height(), w = input.width();
  if (bias && static_cast<int>(bias->size()) != co) throw ConfigError("conv2d: bias size mismatch");
  const Padded p = pad_input(input, kh / 2, kw / 2);
  Tensor out(co, h, w);
  for (int o = 0; o < co; ++o) {
    double* dst = out.plane(o).data();
    if (bias) std::fill(dst, dst + static_cast<std::size_t>(h) * w, (*bias)[o]);
    for (int i = 0; i < ci; ++i) {
      const double* src = p.channel(i);
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double k = kernels[((static_cast<std::size_t>(o) * ci + i) * kh + ky) * kw + kx];
          if (k == 0.0) continue;
          for (int y = 0; y < h; ++y) {
            const double* row = src + (y + ky) * p.pw + kx;
            double* orow = dst + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) orow[x] += k * row[x];
          }
        }
      }
    }
  }
  return out;
}

ConvGrads conv2d_grad(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                      bool has_bias) {
  check_kernel(input, kernels);
  const int co = kernels.dim(0), ci = kernels.dim(1), kh = kernels.dim(2), kw = kernels.dim(3);
  const int h = input.height(), w = input.width();
  if (grad_out.rank() != 3 || grad_out.channels() != co || grad_out.height() != h ||
      grad_out.width() != w)
    throw ConfigError("conv2d backward: grad_out " + grad_out.shape_string() +
                      " does not match output shape");
  const Padded p = pad_input(input, kh / 2, kw / 2);
  ConvGrads g;
  g.kernels = Tensor(kernels.shape());
  if (has_bias) {
    g.bias = Tensor(std::vector<int>{co});
  }
  std::vector<double> gpad(p.data.size(), 0.0);
  for (int o = 0; o < co; ++o) {
    const double* go = grad_out.plane(o).data();
    if (has_bias) {
      double s = 0.0;
      for (std::size_t j = 0; j < static_cast<std::size_t>(h) * w; ++j) s += go[j];
      g.bias[o] = s;
    }
    for (int i = 0; i < ci; ++i) {
      const double* src = p.channel(i);
      double* gsrc = gpad.data() + static_cast<std::size_t>(i) * p.ph * p.pw;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const std::size_t kidx = ((static_cast<std::size_t>(o) * ci + i) * kh + ky) * kw + kx;
          const double k = kernels[kidx];
          double acc = 0.0;
          for (int y = 0; y < h; ++y) {
            const double* row = src + (y + ky) * p.pw + kx;
            double* grow = gsrc + (y + ky) * p.pw + kx;
            const double* gorow = go + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) {
              acc += gorow[x] * row[x];
              grow[x] += k * gorow[x];
            }
          }
          g.kernels[kidx] = acc;
        }
      }
    }
  }
  // Fold the padded-domain gradient back through the mirror map.
  g.input = Tensor(ci, h, w);
  std::vector<int> xmap(p.pw);
  for (int xx = 0; xx < p.pw; ++xx) xmap[xx] = mirror_index(xx - p.rx, w);
  for (int i = 0; i < ci; ++i) {
    const double* gsrc = gpad.data() + static_cast<std::size_t>(i) * p.ph * p.pw;
    for (int yy = 0; yy < p.ph; ++yy) {
      const int sy = mirror_index(yy - p.ry, h);
      for (int xx = 0; xx < p.pw; ++xx) g.input.at(i, sy, xmap[xx]) += gsrc[yy * p.pw + xx];
    }
  }
  return g;
}

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
  if (layer.kernels.rank() == 4 && layer.kernels.dim(2) != layer.kernels.dim(3))
    throw ConfigError("conv layer kernels must be square");
  return conv2d(input, layer.kernels, layer.bias ? &*layer.bias : nullptr);
}

ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out) {
  return conv2d_grad(input, layer.kernels, grad_out, layer.bias.has_value());
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (!input.same_shape(grad_out)) throw ConfigError("relu backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(input[i] > 0.0)) g[i] = 0.0;
  return g;
}

Tensor residual_block_forward(const Tensor& input, const Tensor& conv1, const Tensor& conv2,
                              ResidualCache* cache) {
  if (conv1.dim(0) != input.channels() || conv2.dim(0) != input.channels())
    throw ConfigError("residual block: channel mismatch with input " + input.shape_string());
  Tensor pre = conv2d(input, conv1);
  Tensor act = relu_forward(pre);
  Tensor out = conv2d(act, conv2);
  out += input;
  if (cache) {
    cache->input = input;
    cache->pre_activation = std::move(pre);
    cache->activation = std::move(act);
  }
  return out;
}

ResidualGrads residual_block_backward(const ResidualCache& cache, const Tensor& conv1,
                                      const Tensor& conv2, const Tensor& grad_out) {
  ConvGrads g2 = conv2d_grad(cache.activation, conv2, grad_out);
  Tensor gpre = relu_backward(cache.pre_activation, g2.input);
  ConvGrads g1 = conv2d_grad(cache.input, conv1, gpre);
  ResidualGrads r;
  r.input = grad_out;
  r.input += g1.input;
  r.conv1 = std::move(g1.kernels);
  r.conv2 = std::move(g2.kernels);
  return r;
}

Tensor normalize_forward(const Tensor& input, double offset) {
  const int n = input.channels();
  const std::size_t hw = static_cast<std::size_t>(input.height()) * input.width();
  Tensor out(input.shape());
  for (std::size_t j = 0; j < hw; ++j) {
    double s = 0.0;
    for (int c = 0; c < n; ++c) s += input[c * hw + j] + offset;
    for (int c = 0; c < n; ++c) out[c * hw + j] = (input[c * hw + j] + offset) / s;
  }
  return out;
}

Tensor normalize_backward(const Tensor& input, const Tensor& grad_out, double offset) {
  if (!input.same_shape(grad_out)) throw ConfigError("normalize backward: shape mismatch");
  const int n = input.channels();
  const std::size_t hw = static_cast<std::size_t>(input.height()) * input.width();
  Tensor g(input.shape());
  for (std::size_t j = 0; j < hw; ++j) {
    double s = 0.0;
    for (int c = 0; c < n; ++c) s += input[c * hw + j] + offset;
    double dot = 0.0;
    for (int c = 0; c < n; ++c) dot += grad_out[c * hw + j] * (input[c * hw + j] + offset);
    dot /= s;
    for (int c = 0; c < n; ++c) g[c * hw + j] = (grad_out[c * hw + j] - dot) / s;
  }
  return g;
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state,
               const AdamHyper& hyper, const ParamStore* mask) {
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    if (!grads.contains(name)) continue;
    const Tensor& g = grads.get(name);
    if (!g.same_shape(p)) throw ConfigError("adam: gradient shape mismatch for '" + name + "'");
    if (!state.first_moment.contains(name)) {
      state.first_moment.set(name, Tensor(p.shape()));
      state.second_moment.set(name, Tensor(p.shape()));
    }
    Tensor& m = state.first_moment.get(name);
    Tensor& v = state.second_moment.get(name);
    const Tensor* msk = mask && mask->contains(name) ? &mask->get(name) : nullptr;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (msk && (*msk)[i] == 0.0) continue;
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= hyper.learning_rate * mhat / (std::sqrt(vhat) + hyper.epsilon);
    }
  }
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::size_t offset() const { return pos_; }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("weight file truncated in ") + what, pos_);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_weights(const ParamStore& weights) {
  std::vector<std::uint8_t> out = {'L', 'W', 'N', 'N'};
  put_u16(out, kWeightFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(weights.size()));
  for (const auto& [name, t] : weights) {
    if (name.size() > 0xFFFF) throw ConfigError("parameter name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : t.values()) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  }
  return out;
}

ParamStore deserialize_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "LWNN", 4) != 0) throw FormatError("not a weight container", 0);
  const std::uint16_t version = r.u16("version");
  if (version != kWeightFormatVersion)
    throw FormatError("unsupported weight container version " + std::to_string(version), 4);
  const std::uint32_t count = r.u32("entry count");
  ParamStore out;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t len = r.u16("name length");
    auto nb = r.take(len, "name");
    std::string name(nb.begin(), nb.end());
    const std::size_t at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("implausible tensor rank for '" + name + "'", at);
    std::vector<int> shape;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t ext = r.u32("shape");
      if (ext > (1u << 24)) throw FormatError("implausible extent for '" + name + "'", r.offset() - 4);
      shape.push_back(static_cast<int>(ext));
      n *= ext;
    }
    r.need(n * 4, "tensor data");
    Tensor t(shape);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t bits = r.u32("tensor data");
      float f;
      std::memcpy(&f, &bits, 4);
      t[i] = f;
    }
    if (out.contains(name)) throw FormatError("duplicate parameter '" + name + "'", at);
    out.set(name, std::move(t));
  }
  if (r.offset() != bytes.size()) throw FormatError("trailing bytes after weight container", r.offset());
  return out;
}

void save_weights(const ParamStore& weights, const std::string& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

ParamStore load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

}  // namespace liftwave
