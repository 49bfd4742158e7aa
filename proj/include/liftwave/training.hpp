#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "liftwave/coder.hpp"
#include "liftwave/learned_ops.hpp"
#include "liftwave/lifting.hpp"

namespace liftwave {

// Quantizer base step at which lambda1 is the high-rate optimum of
// D + lambda1 * L: step^2 = 6 lambda1 / ln 2.
double lambda_to_step(double lambda1);

struct RDConfig {
  double lambda1 = 32.0;
  double temperature = 1.0;
  SurrogateMode mode = SurrogateMode::hard;
  std::optional<double> base_step;  // overrides the lambda1 mapping
};

struct Objective {
  double J = 0.0;
  double D = 0.0;
  double L = 0.0;  // bits
  ParamStore grads;
  std::vector<double> log_scale_grads;
  std::vector<double> terms;  // progressive selection: per-prefix errors
};

// J = D + lambda1 * L with D the squared error of the synthesis of the
// surrogate-quantized pyramid and L the Laplacian-model length of the
// indices. In smooth mode the rate is the continuous form
// |v| / (b ln 2) + log2(2 b / step) of the surrogate values v.
// `x` is a level-shifted single plane.
Objective rd_objective(const Tensor& x, const LearnedStructure& model, const ParamStore& weights,
                       const RateModel& rate, const RDConfig& config, const OpacityProvider& opacity = {},
                       bool with_grads = true);

// Sum over the 3d+1 coarse-to-fine subband prefixes of the squared error
// of the synthesis from that prefix alone.
Objective progressive_selection_objective(const Tensor& x, const LearnedStructure& model,
                                          const ParamStore& weights, const OpacityProvider& opacity = {},
                                          bool with_grads = true);

// Oracle opacities of `image` for every learned step evaluation, cached per
// grid.
OpacityProvider make_oracle_provider(const Tensor& image, int channels);

// Laplacian scales (ln of mean |coefficient|) per subband class over the
// given planes.
RateModel fit_rate_model(const std::vector<Tensor>& images, const LearnedStructure& model,
                         const ParamStore& weights);

enum class StageKind { ps, oracle1, oracle2, oracle3, rd };
const char* stage_name(StageKind s);
StageKind parse_stage(const std::string& s);

// 1 = trainable, 0 = frozen. oracle1 freezes the opacity branches and
// proposal 0 of every base-replacing net; oracle2 freezes all proposals.
ParamStore stage_mask(const LearnedStructure& model, StageKind stage);

// Random crops from a corpus, level-shifted. Sampling is with replacement.
class PatchLoader {
 public:
  PatchLoader(const std::string& corpus_dir, int patch, int batch, std::uint64_t seed);
  PatchLoader(std::vector<Tensor> images, int patch, int batch, std::uint64_t seed);

  std::vector<Tensor> next_batch();
  // Deterministic crops independent of the training stream.
  std::vector<Tensor> fixed_batch(int count, std::uint64_t seed) const;
  std::size_t image_count() const { return images_.size(); }
  int patch() const { return patch_; }
  int batch() const { return batch_; }

 private:
  Tensor crop(const Tensor& img, std::mt19937_64& rng) const;
  std::vector<Tensor> images_;
  int patch_;
  int batch_;
  std::mt19937_64 rng_;
};

struct TrainingConfig {
  std::string structure = "hybrid97";
  NetConfig net;
  int levels = 5;
  std::vector<double> lambdas{8.0, 32.0, 128.0, 512.0};
  std::vector<StageKind> stages{StageKind::ps};
  bool stages_given = false;
  std::vector<int> epochs{30};  // one entry, or one per stage
  std::uint64_t seed = 1;
  std::string corpus;
  double lr = 1e-4;
  int batch = 16;
  int patch = 256;
  int steps_per_epoch = 0;  // 0: ceil(corpus images / batch)
  int eval_patches = 8;
  bool keep_best = false;  // return the best evaluated weights of each stage
  AnnealSchedule anneal;

  int epochs_for(std::size_t stage) const;
  void validate() const;
};

// Parses "key = value" lines; '#' starts a comment. Errors name the line
// and key.
TrainingConfig parse_manifest_text(const std::string& text, const std::string& name = "manifest");
TrainingConfig parse_manifest(const std::string& path);

struct TraceRow {
  int epoch = 0;
  std::string stage;
  double J = 0.0;
  double D = 0.0;
  double L = 0.0;
};

struct TrainResult {
  ParamStore weights;
  RateModel rate;
  std::vector<TraceRow> trace;
};

// One stage. Evaluates the objective on a fixed evaluation batch before the
// first epoch (epoch 0) and after every epoch (per-pixel D, bits per pixel
// L, averaged over the lambda grid for rate-distortion stages). Throws
// NumericError on non-finite values or when the evaluated objective stays
// above 10x its initial value for 3 epochs.
TrainResult run_stage(StageKind stage, const LearnedStructure& model, ParamStore weights, RateModel rate,
                      PatchLoader& data, const TrainingConfig& config, int epochs,
                      const ParamStore* mask_override = nullptr);

TrainResult run_training(const TrainingConfig& config, const LearnedStructure& model, ParamStore weights,
                         PatchLoader& data);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace);

}  // namespace liftwave
