#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "liftwave/nn.hpp"
#include "liftwave/tensor.hpp"

namespace liftwave {

// Signal registers of one decomposition level. X is the level input; L/H are
// the vertical (row) phases; the quadrants follow the usual naming where the
// first letter is the horizontal filter: HL holds even rows / odd columns.
enum class Band { X, L, H, LL, HL, LH, HH };
enum class Axis { vertical, horizontal };

const char* band_name(Band b);
bool is_quadrant(Band b);

struct PolyphasePair {
  Tensor even;
  Tensor odd;
  Axis direction = Axis::horizontal;
  int parent_height = 0;
  int parent_width = 0;
};

// Even phase takes indices 0, 2, 4, ... and so the extra sample of an odd
// extent.
PolyphasePair split(const Tensor& signal, Axis direction);
Tensor merge(const PolyphasePair& pair);

// A one-dimensional tap list along the step direction; offset k reads the
// source phase sample k positions after the target position.
struct FixedFilter {
  std::vector<std::pair<int, double>> taps;

  // Equivalent single-channel kernel, (1, 1, 1, 2r+1) or (1, 1, 2r+1, 1).
  Tensor kernel(Axis direction) const;
  int radius() const;
};

// Output of an operator evaluation plus the closure that back-propagates a
// gradient on the output into the input (and accumulates parameter
// gradients when `grads` is non-null).
struct OpForward {
  Tensor output;
  std::function<Tensor(const Tensor& grad_out, ParamStore* grads)> backward;
};

class LiftingOperator {
 public:
  virtual ~LiftingOperator() = default;
  virtual int in_channels() const = 0;
  virtual int out_channels() const = 0;
  // `opacity`, when non-null, replaces the computed opacity maps (oracle
  // pre-training); fixed operators ignore it.
  virtual OpForward forward(const Tensor& input, const ParamStore& weights,
                            const Tensor* opacity, bool record) const = 0;
  virtual bool learned() const { return false; }
};

class FixedFilterOp final : public LiftingOperator {
 public:
  FixedFilterOp(FixedFilter filter, Axis direction);
  int in_channels() const override { return 1; }
  int out_channels() const override { return 1; }
  OpForward forward(const Tensor& input, const ParamStore& weights, const Tensor* opacity,
                    bool record) const override;
  const FixedFilter& filter() const { return filter_; }

 private:
  FixedFilter filter_;
  Tensor kernel_;
};

enum class StepKind { fixed, learned, gain };

struct LiftingStep {
  StepKind kind = StepKind::fixed;
  std::string op;  // key into LiftingStructure::operators; weight prefix for learned ops
  Axis direction = Axis::vertical;
  std::vector<Band> sources;
  std::vector<Band> targets;
  double sign = 1.0;
  double gain = 1.0;  // gain steps only: targets *= gain
  // Horizontal step written against the even-row bands (LL, HL) that is
  // repeated verbatim on the odd-row bands (LH, HH).
  bool both_row_bands = false;
};

struct LiftingStructure {
  std::string name;
  std::vector<LiftingStep> steps;
  std::map<std::string, std::shared_ptr<const LiftingOperator>> operators;
  int levels = 1;

  const LiftingOperator& op(const std::string& id) const;
  // Throws ConfigError on malformed steps or unresolved operators.
  void validate() const;
  std::size_t learned_step_count() const;
};

struct SubbandLevel {
  Tensor hl, lh, hh;
};

struct SubbandPyramid {
  int height = 0;
  int width = 0;
  std::vector<SubbandLevel> details;  // details[0] is level 1, the finest
  Tensor ll;                          // coarsest low band

  int levels() const { return static_cast<int>(details.size()); }
  std::size_t coefficient_count() const;
  const Tensor& band(int level, Band b) const;
  Tensor& band(int level, Band b);
  // Same geometry, every coefficient zero.
  SubbandPyramid zeros_like() const;
};

// Zero pyramid with the band extents analysis produces for an h x w image.
SubbandPyramid make_pyramid(int height, int width, int levels);

// Register identity for gradient bookkeeping: (level, band), level 1-based.
using RegKey = std::pair<int, Band>;

class GradMap {
 public:
  const Tensor* find(const RegKey& k) const;
  Tensor& at_or_zero(const RegKey& k, int channels, int height, int width);
  void add(const RegKey& k, const Tensor& g);
  void set(const RegKey& k, Tensor g) { grads_[k] = std::move(g); }
  Tensor take(const RegKey& k);

 private:
  std::map<RegKey, Tensor> grads_;
};

// Recorded backward closures, replayed in reverse order.
class Tape {
 public:
  using Entry = std::function<void(GradMap&, ParamStore*)>;
  void push(Entry e) { entries_.push_back(std::move(e)); }
  void backward(GradMap& grads, ParamStore* param_grads) const;
  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

// Where an operator is evaluated: level, step index within the structure,
// which copy of a both_row_bands step, the working extent and the pooling
// factors from the full-resolution grid to it.
struct StepContext {
  int level = 1;
  int step_index = 0;
  int copy = 0;
  std::string op;
  int height = 0;
  int width = 0;
  int row_factor = 1;
  int col_factor = 1;
};

using OpacityProvider = std::function<const Tensor*(const StepContext&)>;

struct TransformOptions {
  Tape* tape = nullptr;
  OpacityProvider opacity;
};

// Pair-level step on (even, odd) for single-source steps whose bands are L
// (even) and H (odd).
PolyphasePair apply_step(const PolyphasePair& pair, const LiftingStep& step,
                         const LiftingStructure& structure, const ParamStore& weights);

SubbandPyramid analyze(const Tensor& image, const LiftingStructure& structure,
                       const ParamStore& weights, const TransformOptions& options = {});
Tensor synthesize(const SubbandPyramid& pyramid, const LiftingStructure& structure,
                  const ParamStore& weights, const TransformOptions& options = {});

// Gradient seeding helpers for the tapes recorded above.
void seed_pyramid(GradMap& grads, const SubbandPyramid& grad);
SubbandPyramid pyramid_gradient(GradMap& grads, const SubbandPyramid& like);
inline constexpr RegKey kImageKey{1, Band::X};

// Image-domain bounding box of the synthesis response to a single
// coefficient perturbation, maximized over subbands and coefficient
// parities.
std::pair<int, int> probe_support(const LiftingStructure& structure, const ParamStore& weights,
                                  int levels = 1);

}  // namespace liftwave
