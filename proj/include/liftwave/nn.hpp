#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "liftwave/tensor.hpp"

namespace liftwave {

// Named parameter tensors. Used for weights, their gradients, optimizer
// moments and trainability masks alike; iteration order is the sorted name
// order, which fixes serialization and reduction order.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  void set(const std::string& name, Tensor value) { entries_[name] = std::move(value); }
  // Adds `value` into the entry, creating a zero entry of the same shape first.
  void accumulate(const std::string& name, const Tensor& value);
  void erase(const std::string& name) { entries_.erase(name); }

  std::size_t scalar_count() const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }
  Map::iterator begin() { return entries_.begin(); }
  Map::iterator end() { return entries_.end(); }

  // Same names and shapes, every value set to `v`.
  ParamStore like(double v) const;
  bool all_finite() const;
  // Prefix-filtered copy.
  ParamStore with_prefix(const std::string& prefix) const;
  // Copies every entry of `other` into this store, replacing existing ones.
  void merge(const ParamStore& other);

  bool operator==(const ParamStore& other) const;

 private:
  Map entries_;
};

using WeightStore = ParamStore;
using GradStore = ParamStore;

// Same-size 2D convolution (cross-correlation) with whole-sample symmetric
// boundary extension. Kernels are (out, in, K, K) with K odd.
struct ConvLayer {
  Tensor kernels;
  std::optional<Tensor> bias;  // (out) values, broadcast over space

  int out_channels() const { return kernels.dim(0); }
  int in_channels() const { return kernels.dim(1); }
  int kernel_size() const { return kernels.dim(2); }
};

struct ConvGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;  // empty when the layer has no bias
};

// Raw forms accept rectangular odd kernels (out, in, kh, kw); used by fixed
// 1D lifting filters as well as by ConvLayer.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor* bias = nullptr);
ConvGrads conv2d_grad(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                      bool has_bias = false);

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);
ConvGrads conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out);

Tensor relu_forward(const Tensor& input);
// Passes the gradient where input > 0; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// x + conv2(relu(conv1(x))); both convolutions are (N, N, k, k) without bias.
struct ResidualCache {
  Tensor input;
  Tensor pre_activation;
  Tensor activation;
};

Tensor residual_block_forward(const Tensor& input, const Tensor& conv1, const Tensor& conv2,
                              ResidualCache* cache = nullptr);

struct ResidualGrads {
  Tensor input;
  Tensor conv1;
  Tensor conv2;
};

ResidualGrads residual_block_backward(const ResidualCache& cache, const Tensor& conv1,
                                      const Tensor& conv2, const Tensor& grad_out);

// Opacity normalization: y_i = (x_i + offset) / sum_j (x_j + offset), taken
// across channels at every spatial location.
inline constexpr double kOpacityOffset = 0.01;

Tensor normalize_forward(const Tensor& input, double offset = kOpacityOffset);
Tensor normalize_backward(const Tensor& input, const Tensor& grad_out,
                          double offset = kOpacityOffset);

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  ParamStore first_moment;
  ParamStore second_moment;
};

// One bias-corrected Adam update. Entries of `mask` equal to zero are frozen:
// neither the parameter nor its moments are touched. Parameters without a
// gradient entry are left alone.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state,
               const AdamHyper& hyper, const ParamStore* mask = nullptr);

// Weight container: "LWNN", u16 version, u32 entry count, then per entry a
// u16-length-prefixed UTF-8 name, u32 rank, u32 extents and f32 data, all
// little-endian.
inline constexpr std::uint16_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> serialize_weights(const ParamStore& weights);
ParamStore deserialize_weights(std::span<const std::uint8_t> bytes);
void save_weights(const ParamStore& weights, const std::string& path);
ParamStore load_weights(const std::string& path);

}  // namespace liftwave
