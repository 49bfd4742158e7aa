#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftwave/lifting.hpp"
#include "liftwave/nn.hpp"

namespace liftwave {

struct NetConfig {
  int channels = 5;    // N, proposals and opacity maps
  int kernel = 5;      // K, outer opacity convolutions
  int res_blocks = 2;  // R
  bool compact = false;
  int hidden = 0;           // opacity branch width; 0 selects N + 12
  int proposal_kernel = 0;  // 0 matches the opacity branch reach

  // Applies the compact rule (all kernels 3x3, one residual block fewer) and
  // resolves defaults.
  NetConfig effective() const;
  void validate() const;
  int hidden_width() const;
  int proposal_extent() const;
};

// Proposal bank (linear, no bias) blended per pixel by a normalized opacity
// branch: conv_in -> ReLU -> residual blocks -> conv_out -> ReLU -> normalize.
// Weight names: <prefix>.prop (out*N, in, P, P) with output b owning rows
// b*N .. b*N+N-1, <prefix>.op.conv_in, <prefix>.op.res<i>.conv1/conv2,
// <prefix>.op.conv_out.
class ProposalOpacityNet final : public LiftingOperator {
 public:
  // `base` is an (out, in, P', P') tap set, P' <= P odd, the fixed lifting
  // filter this net replaces; empty for correction nets (H2L/L2H).
  ProposalOpacityNet(std::string prefix, int in_channels, int out_channels, NetConfig config,
                     Tensor base = {});

  int in_channels() const override { return in_; }
  int out_channels() const override { return out_; }
  bool learned() const override { return true; }
  OpForward forward(const Tensor& input, const ParamStore& weights, const Tensor* opacity,
                    bool record) const override;

  const std::string& prefix() const { return prefix_; }
  const NetConfig& config() const { return cfg_; }
  bool replaces_base() const { return !base_.empty(); }
  // Base taps embedded at the center of a P x P proposal kernel, (out, in, P, P).
  Tensor base_proposal() const;
  ParamStore weight_template() const;
  std::string proposal_name() const { return prefix_ + ".prop"; }
  std::vector<std::string> opacity_names() const;

  // Opacity maps (N, h, w) of the branch alone.
  Tensor opacities(const Tensor& input, const ParamStore& weights) const;

 private:
  std::string prefix_;
  int in_, out_;
  NetConfig cfg_;
  Tensor base_;
};

// Blended output of `net` on `input`; `opacity` optionally overrides the
// branch.
Tensor po_forward(const Tensor& input, const ProposalOpacityNet& net, const ParamStore& weights,
                  const Tensor* opacity = nullptr);

struct LearnedStructure {
  LiftingStructure structure;
  ParamStore weights;  // zero-filled template
  std::string base;    // "legall53" or "cdf97"
  NetConfig config;
};

const std::vector<std::string>& structure_names();

// Any registered name; fixed structures return an empty template.
LearnedStructure make_structure(const std::string& name, const NetConfig& config, int levels = 1);

// "hybrid97-9c-compact" style names: <key>[-<N>c][-compact].
LearnedStructure make_structure_from_label(const std::string& label, int levels = 1);

// The fixed wavelet a structure is built around.
LiftingStructure base_structure(const std::string& base, int levels);

enum class InitMode { random, base_equivalent };

// Random: proposals and convolutions uniform in +-1/(k*sqrt(c_in)) for a k x k
// kernel with c_in input channels, and proposal 0 of every base-replacing
// net set to the base taps. Base-equivalent: every proposal of a
// base-replacing net equals the base taps and H2L/L2H proposals are zero;
// opacity convolutions are drawn as in random mode.
ParamStore init_weights(const LiftingStructure& structure, InitMode mode, std::uint64_t seed);

std::size_t count_params(const LiftingStructure& structure);
// ConfigError unless `weights` has exactly the template's names and shapes.
void check_weights(const LearnedStructure& model, const ParamStore& weights);
std::vector<const ProposalOpacityNet*> learned_nets(const LiftingStructure& structure);

}  // namespace liftwave
