#include "liftwave/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <tuple>

#include "liftwave/codestream.hpp"
#include "liftwave/errors.hpp"
#include "liftwave/image_io.hpp"
#include "liftwave/oracle.hpp"

namespace liftwave {

namespace {

const double kLn2 = std::log(2.0);

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

std::vector<double> training_steps(const LearnedStructure& model, const RDConfig& cfg) {
  const double base = cfg.base_step ? *cfg.base_step : lambda_to_step(cfg.lambda1);
  if (!(base > 0) || !std::isfinite(base)) throw ConfigError("quantizer step must be positive");
  return class_steps(base, model.base, model.structure.levels);
}

// Names the first parameter tensor holding a non-finite value.
std::string offending(const ParamStore& grads) {
  for (const auto& [name, t] : grads)
    if (!t.all_finite()) return name;
  return "<none>";
}

}  // namespace

double lambda_to_step(double lambda1) {
  if (!(lambda1 > 0) || !std::isfinite(lambda1)) throw ConfigError("lambda1 must be positive");
  return std::sqrt(6.0 * lambda1 / kLn2);
}

Objective rd_objective(const Tensor& x, const LearnedStructure& model, const ParamStore& weights,
                       const RateModel& rate, const RDConfig& config, const OpacityProvider& opacity,
                       bool with_grads) {
  const LiftingStructure& st = model.structure;
  const std::vector<double> steps = training_steps(model, config);
  if (rate.log_scale.size() != steps.size())
    throw ConfigError("rate model has " + std::to_string(rate.log_scale.size()) + " classes, expected " +
                      std::to_string(steps.size()));

  Tape analysis_tape, synthesis_tape;
  TransformOptions ao{with_grads ? &analysis_tape : nullptr, opacity};
  const SubbandPyramid y = analyze(x, st, weights, ao);
  SubbandPyramid v = y;
  SubbandPyramid dvdy = y.zeros_like();
  SubbandPyramid dLdy = y.zeros_like();

  const auto ybands = ordered_bands(y);
  const auto vbands = ordered_bands(v);
  const auto dv = ordered_bands(dvdy);
  const auto dl = ordered_bands(dLdy);

  Objective out;
  out.log_scale_grads.assign(steps.size(), 0.0);
  for (std::size_t c = 0; c < steps.size(); ++c) {
    const Quantizer q{steps[c]};
    const double b = rate.scale(c);
    SurrogateResult s = surrogate_quantize(*ybands[c], q, config.temperature, config.mode);
    const Tensor& yc = *ybands[c];
    double bits = 0.0, dtheta = 0.0;
    if (config.mode == SurrogateMode::hard) {
      const IndexPlane idx = quantize(yc, q);
      for (std::size_t i = 0; i < yc.size(); ++i) {
        bits += index_bits(idx.values[i], q.step, b);
        dtheta += index_bits_dlogscale(idx.values[i], q.step, b);
        (*dl[c])[i] = sgn(yc[i]) * s.derivative[i] / (b * kLn2);
      }
    } else {
      const double offset = std::log2(2.0 * b / q.step);
      for (std::size_t i = 0; i < yc.size(); ++i) {
        const double a = std::abs(s.value[i]);
        bits += a / (b * kLn2) + offset;
        dtheta += -a / (b * kLn2) + 1.0 / kLn2;
        (*dl[c])[i] = sgn(s.value[i]) * s.derivative[i] / (b * kLn2);
      }
    }
    out.L += bits;
    out.log_scale_grads[c] = config.lambda1 * dtheta;
    *vbands[c] = std::move(s.value);
    *dv[c] = std::move(s.derivative);
  }

  TransformOptions so{with_grads ? &synthesis_tape : nullptr, opacity};
  const Tensor xhat = synthesize(v, st, weights, so);
  Tensor err = xhat;
  err -= x;
  out.D = err.squared_norm();
  out.J = out.D + config.lambda1 * out.L;
  if (!std::isfinite(out.J)) throw NumericError("non-finite rate-distortion objective");
  if (!with_grads) return out;

  GradMap gs;
  err *= 2.0;
  gs.set(kImageKey, std::move(err));
  synthesis_tape.backward(gs, &out.grads);
  SubbandPyramid g = pyramid_gradient(gs, y);
  const auto gb = ordered_bands(g);
  for (std::size_t c = 0; c < gb.size(); ++c) {
    Tensor& t = *gb[c];
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = t[i] * (*dv[c])[i] + config.lambda1 * (*dl[c])[i];
  }
  GradMap ga;
  seed_pyramid(ga, g);
  analysis_tape.backward(ga, &out.grads);
  if (!out.grads.all_finite())
    throw NumericError("non-finite gradient in '" + offending(out.grads) + "'");
  return out;
}

Objective progressive_selection_objective(const Tensor& x, const LearnedStructure& model,
                                          const ParamStore& weights, const OpacityProvider& opacity,
                                          bool with_grads) {
  const LiftingStructure& st = model.structure;
  Tape analysis_tape;
  const SubbandPyramid y = analyze(x, st, weights, {with_grads ? &analysis_tape : nullptr, opacity});
  const auto ybands = ordered_bands(y);
  const std::size_t n = ybands.size();

  Objective out;
  SubbandPyramid total = y.zeros_like();
  const auto tb = ordered_bands(total);
  SubbandPyramid prefix = y.zeros_like();
  const auto pb = ordered_bands(prefix);
  for (std::size_t i = 0; i < n; ++i) {
    *pb[i] = *ybands[i];
    Tape tape;
    Tensor err = synthesize(prefix, st, weights, {with_grads ? &tape : nullptr, opacity});
    err -= x;
    const double term = err.squared_norm();
    out.terms.push_back(term);
    out.J += term;
    if (!with_grads) continue;
    GradMap gs;
    err *= 2.0;
    gs.set(kImageKey, std::move(err));
    tape.backward(gs, &out.grads);
    const SubbandPyramid g = pyramid_gradient(gs, y);
    const auto gb = ordered_bands(g);
    // zeroed bands are constants, not coefficients
    for (std::size_t k = 0; k <= i; ++k) *tb[k] += *gb[k];
  }
  out.D = out.J;
  if (!std::isfinite(out.J)) throw NumericError("non-finite progressive selection objective");
  if (!with_grads) return out;
  GradMap ga;
  seed_pyramid(ga, total);
  analysis_tape.backward(ga, &out.grads);
  if (!out.grads.all_finite())
    throw NumericError("non-finite gradient in '" + offending(out.grads) + "'");
  return out;
}

OpacityProvider make_oracle_provider(const Tensor& image, int channels) {
  using Key = std::tuple<int, int, int, int, int>;
  auto cache = std::make_shared<std::map<Key, Tensor>>();
  auto banks = std::make_shared<std::map<int, OracleBank>>();
  Tensor img = image;
  return [cache, banks, img, channels](const StepContext& ctx) -> const Tensor* {
    const Key k{ctx.level, ctx.height, ctx.width, ctx.row_factor, ctx.col_factor};
    auto it = cache->find(k);
    if (it != cache->end()) return &it->second;
    auto b = banks->find(ctx.level);
    if (b == banks->end()) b = banks->emplace(ctx.level, make_oracle_bank(channels, ctx.level)).first;
    Tensor o = oracle_opacities(img, b->second, ctx.height, ctx.width, ctx.row_factor, ctx.col_factor);
    return &cache->emplace(k, std::move(o)).first->second;
  };
}

RateModel fit_rate_model(const std::vector<Tensor>& images, const LearnedStructure& model,
                         const ParamStore& weights) {
  const std::size_t classes = 3 * static_cast<std::size_t>(model.structure.levels) + 1;
  std::vector<double> sum(classes, 0.0), count(classes, 0.0);
  for (const Tensor& x : images) {
    const SubbandPyramid y = analyze(x, model.structure, weights);
    const auto bands = ordered_bands(y);
    for (std::size_t c = 0; c < classes; ++c) {
      for (double v : bands[c]->values()) sum[c] += std::abs(v);
      count[c] += static_cast<double>(bands[c]->size());
    }
  }
  RateModel r;
  for (std::size_t c = 0; c < classes; ++c)
    r.log_scale.push_back(std::log(std::max(count[c] > 0 ? sum[c] / count[c] : 1.0, 1e-3)));
  return r;
}

const char* stage_name(StageKind s) {
  switch (s) {
    case StageKind::ps: return "ps";
    case StageKind::oracle1: return "oracle1";
    case StageKind::oracle2: return "oracle2";
    case StageKind::oracle3: return "oracle3";
    case StageKind::rd: return "rd";
  }
  return "?";
}

StageKind parse_stage(const std::string& s) {
  for (StageKind k : {StageKind::ps, StageKind::oracle1, StageKind::oracle2, StageKind::oracle3, StageKind::rd})
    if (s == stage_name(k)) return k;
  throw ConfigError("unknown stage '" + s + "' (expected ps, oracle1, oracle2, oracle3 or rd)");
}

ParamStore stage_mask(const LearnedStructure& model, StageKind stage) {
  ParamStore mask = model.weights.like(1.0);
  if (stage != StageKind::oracle1 && stage != StageKind::oracle2) return mask;
  for (const ProposalOpacityNet* net : learned_nets(model.structure)) {
    if (stage == StageKind::oracle1) {
      for (const std::string& name : net->opacity_names()) mask.get(name).fill(0.0);
      if (net->replaces_base()) {
        Tensor& m = mask.get(net->proposal_name());
        const int n = net->config().effective().channels;
        const std::size_t per = m.size() / static_cast<std::size_t>(m.dim(0));
        for (int b = 0; b < net->out_channels(); ++b)
          std::fill_n(m.data() + static_cast<std::size_t>(b * n) * per, per, 0.0);
      }
    } else {
      mask.get(net->proposal_name()).fill(0.0);
    }
  }
  return mask;
}

PatchLoader::PatchLoader(const std::string& corpus_dir, int patch, int batch, std::uint64_t seed)
    : patch_(patch), batch_(batch), rng_(seed) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(corpus_dir)) throw IoError("corpus '" + corpus_dir + "' is not a readable directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(corpus_dir)) {
    const std::string ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Tensor> imgs;
  for (const auto& f : files) imgs.push_back(read_image(f.string()));
  *this = PatchLoader(std::move(imgs), patch, batch, seed);
}

PatchLoader::PatchLoader(std::vector<Tensor> images, int patch, int batch, std::uint64_t seed)
    : patch_(patch), batch_(batch), rng_(seed) {
  if (patch < 2 || batch < 1) throw ConfigError("patch size and batch must be positive");
  for (std::size_t i = 0; i < images.size(); ++i) {
    Tensor& img = images[i];
    if (img.height() < patch || img.width() < patch) {
      std::fprintf(stderr, "warning: corpus image %zu (%dx%d) is smaller than the %d patch; skipped\n", i,
                   img.width(), img.height(), patch);
      continue;
    }
    for (double& v : img.values()) v -= kLevelShift;
    images_.push_back(std::move(img));
  }
  if (images_.empty()) throw InputError("corpus has no image of at least " + std::to_string(patch) + "x" +
                                        std::to_string(patch));
}

Tensor PatchLoader::crop(const Tensor& img, std::mt19937_64& rng) const {
  std::uniform_int_distribution<int> oy(0, img.height() - patch_), ox(0, img.width() - patch_);
  const int y0 = oy(rng), x0 = ox(rng);
  Tensor p(1, patch_, patch_);
  for (int y = 0; y < patch_; ++y)
    for (int x = 0; x < patch_; ++x) p.at(0, y, x) = img.at(0, y0 + y, x0 + x);
  return p;
}

std::vector<Tensor> PatchLoader::next_batch() {
  std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
  std::vector<Tensor> out;
  for (int i = 0; i < batch_; ++i) {
    const std::size_t k = pick(rng_);
    out.push_back(crop(images_[k], rng_));
  }
  return out;
}

std::vector<Tensor> PatchLoader::fixed_batch(int count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> out;
  // cycle through the corpus so every image is represented
  for (int i = 0; i < count; ++i) out.push_back(crop(images_[static_cast<std::size_t>(i) % images_.size()], rng));
  return out;
}

int TrainingConfig::epochs_for(std::size_t stage) const {
  if (epochs.size() == 1) return epochs[0];
  return epochs.at(stage);
}

void TrainingConfig::validate() const {
  if (levels < 1 || levels > 16) throw ConfigError("levels must be in 1..16");
  if (lambdas.empty()) throw ConfigError("lambda1 list is empty");
  for (double l : lambdas)
    if (!(l > 0) || !std::isfinite(l)) throw ConfigError("lambda1 values must be positive");
  if (stages.empty()) throw ConfigError("no stages");
  if (epochs.size() != 1 && epochs.size() != stages.size())
    throw ConfigError("epochs needs one value or one per stage");
  for (int e : epochs)
    if (e < 0) throw ConfigError("epochs must be non-negative");
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("lr must be non-negative");
  if (batch < 1 || patch < 2) throw ConfigError("batch and patch must be positive");
  if (patch < (1 << levels)) throw ConfigError("patch smaller than 2^levels");
  if (steps_per_epoch < 0 || eval_patches < 1) throw ConfigError("steps_per_epoch/eval_patches out of range");
  net.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

TrainingConfig parse_manifest_text(const std::string& text, const std::string& name) {
  TrainingConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto fail = [&](const std::string& why) { return ConfigError(where + ": key '" + key + "': " + why); };
    auto as_int = [&](const std::string& s) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(s, &used);
      } catch (const std::exception&) {
        throw fail("'" + s + "' is not an integer");
      }
      if (used != s.size()) throw fail("'" + s + "' is not an integer");
      return v;
    };
    auto as_double = [&](const std::string& s) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        throw fail("'" + s + "' is not a number");
      }
      if (used != s.size()) throw fail("'" + s + "' is not a number");
      return v;
    };
    auto as_bool = [&](const std::string& s) {
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw fail("'" + s + "' is not a boolean");
    };
    if (value.empty()) throw fail("empty value");
    try {
      if (key == "structure") {
        const auto& names = structure_names();
        if (std::find(names.begin(), names.end(), value) == names.end()) throw fail("unknown structure '" + value + "'");
        cfg.structure = value;
      } else if (key == "channels") {
        cfg.net.channels = as_int(value);
      } else if (key == "kernel") {
        cfg.net.kernel = as_int(value);
      } else if (key == "res_blocks") {
        cfg.net.res_blocks = as_int(value);
      } else if (key == "compact") {
        cfg.net.compact = as_bool(value);
      } else if (key == "levels") {
        cfg.levels = as_int(value);
      } else if (key == "lambda1") {
        cfg.lambdas.clear();
        for (const auto& s : split_list(value)) cfg.lambdas.push_back(as_double(s));
      } else if (key == "stages") {
        cfg.stages.clear();
        cfg.stages_given = true;
        for (const auto& s : split_list(value)) cfg.stages.push_back(parse_stage(s));
      } else if (key == "epochs") {
        cfg.epochs.clear();
        for (const auto& s : split_list(value)) cfg.epochs.push_back(as_int(s));
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
      } else if (key == "corpus") {
        cfg.corpus = value;
      } else if (key == "lr") {
        cfg.lr = as_double(value);
      } else if (key == "batch") {
        cfg.batch = as_int(value);
      } else if (key == "patch") {
        cfg.patch = as_int(value);
      } else if (key == "steps_per_epoch") {
        cfg.steps_per_epoch = as_int(value);
      } else if (key == "eval_patches") {
        cfg.eval_patches = as_int(value);
      } else if (key == "keep_best") {
        cfg.keep_best = as_bool(value);
      } else if (key == "lambda2") {
        if (as_double(value) != 0.0) throw fail("only 0 is supported");
      } else {
        throw fail("unknown key");
      }
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      throw fail(msg);
    } catch (const std::logic_error&) {
      throw fail("malformed value '" + value + "'");
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  }
  return cfg;
}

TrainingConfig parse_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  TrainingConfig cfg = parse_manifest_text(ss.str(), path);
  if (!cfg.corpus.empty() && std::filesystem::path(cfg.corpus).is_relative())
    cfg.corpus = (std::filesystem::path(path).parent_path() / cfg.corpus).string();
  return cfg;
}

namespace {

struct Eval {
  double J = 0, D = 0, L = 0;
};

bool uses_rd(StageKind s) { return s != StageKind::ps; }

Eval evaluate(StageKind stage, const LearnedStructure& model, const ParamStore& w, const RateModel& rate,
              const std::vector<Tensor>& set, const std::vector<OpacityProvider>& oracles,
              const TrainingConfig& cfg) {
  Eval e;
  double pixels = 0;
  for (const Tensor& x : set) pixels += static_cast<double>(x.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const OpacityProvider& op = oracles.empty() ? OpacityProvider{} : oracles[i];
    if (!uses_rd(stage)) {
      const Objective o = progressive_selection_objective(set[i], model, w, op, false);
      e.J += o.J / pixels;
      e.D += o.D / pixels;
      continue;
    }
    for (double lambda : cfg.lambdas) {
      RDConfig rc;
      rc.lambda1 = lambda;
      const Objective o = rd_objective(set[i], model, w, rate, rc, op, false);
      const double k = pixels * static_cast<double>(cfg.lambdas.size());
      e.J += o.J / k;
      e.D += o.D / k;
      e.L += o.L / k;
    }
  }
  return e;
}

}  // namespace

TrainResult run_stage(StageKind stage, const LearnedStructure& model, ParamStore weights, RateModel rate,
                      PatchLoader& data, const TrainingConfig& cfg, int epochs, const ParamStore* mask_override) {
  const ParamStore mask = mask_override ? *mask_override : stage_mask(model, stage);
  const bool oracle = stage == StageKind::oracle1;
  const int channels = model.config.effective().channels;
  const int steps = cfg.steps_per_epoch > 0
                        ? cfg.steps_per_epoch
                        : static_cast<int>((data.image_count() + static_cast<std::size_t>(cfg.batch) - 1) /
                                           static_cast<std::size_t>(cfg.batch));

  const std::vector<Tensor> eval_set = data.fixed_batch(cfg.eval_patches, cfg.seed ^ 0xe7a1u);
  std::vector<OpacityProvider> eval_oracles;
  if (oracle)
    for (const Tensor& x : eval_set) eval_oracles.push_back(make_oracle_provider(x, channels));
  if (uses_rd(stage) && rate.log_scale.empty()) rate = fit_rate_model(eval_set, model, weights);

  TrainResult res;
  res.weights = weights;
  res.rate = rate;
  auto record = [&](int epoch, const Eval& e) {
    res.trace.push_back({epoch, stage_name(stage), e.J, e.D, e.L});
  };
  const Eval initial = evaluate(stage, model, weights, rate, eval_set, eval_oracles, cfg);
  record(0, initial);
  double best = initial.J;

  AdamState adam, rate_adam;
  std::mt19937_64 lambda_rng(cfg.seed * 0x9e3779b97f4a7c15ull + 17);
  std::uniform_int_distribution<std::size_t> pick(0, cfg.lambdas.size() - 1);
  int above = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    AdamHyper hyper;
    hyper.learning_rate = cfg.lr * std::pow(0.5, std::floor(3.0 * epoch / std::max(epochs, 1)));
    const double temperature = cfg.anneal.temperature(epoch);
    for (int s = 0; s < steps; ++s) {
      const std::vector<Tensor> batch = data.next_batch();
      const double lambda = cfg.lambdas[pick(lambda_rng)];
      double pixels = 0;
      for (const Tensor& x : batch) pixels += static_cast<double>(x.size());
      ParamStore grads;
      std::vector<double> rate_grads(rate.log_scale.size(), 0.0);
      for (const Tensor& x : batch) {
        const OpacityProvider op = oracle ? make_oracle_provider(x, channels) : OpacityProvider{};
        Objective o;
        if (uses_rd(stage)) {
          RDConfig rc;
          rc.lambda1 = lambda;
          rc.temperature = temperature;
          o = rd_objective(x, model, weights, rate, rc, op, true);
          for (std::size_t c = 0; c < rate_grads.size(); ++c) rate_grads[c] += o.log_scale_grads[c] / pixels;
        } else {
          o = progressive_selection_objective(x, model, weights, op, true);
        }
        for (const auto& [name, g] : o.grads) {
          Tensor scaled = g;
          scaled *= 1.0 / pixels;
          grads.accumulate(name, scaled);
        }
      }
      if (!grads.all_finite())
        throw NumericError(std::string("stage ") + stage_name(stage) + " epoch " + std::to_string(epoch + 1) +
                           ": non-finite gradient in '" + offending(grads) + "'");
      adam_step(weights, grads, adam, hyper, &mask);
      if (uses_rd(stage)) {
        ParamStore rp, rg;
        rp.set("rate.log_scale", Tensor(std::vector<int>{static_cast<int>(rate.log_scale.size())}));
        rg.set("rate.log_scale", Tensor(std::vector<int>{static_cast<int>(rate.log_scale.size())}));
        std::copy(rate.log_scale.begin(), rate.log_scale.end(), rp.get("rate.log_scale").data());
        std::copy(rate_grads.begin(), rate_grads.end(), rg.get("rate.log_scale").data());
        adam_step(rp, rg, rate_adam, hyper);
        const Tensor& t = rp.get("rate.log_scale");
        std::copy(t.data(), t.data() + t.size(), rate.log_scale.begin());
      }
    }
    const Eval e = evaluate(stage, model, weights, rate, eval_set, eval_oracles, cfg);
    record(epoch + 1, e);
    if (!std::isfinite(e.J))
      throw NumericError(std::string("stage ") + stage_name(stage) + " epoch " + std::to_string(epoch + 1) +
                         ": non-finite objective");
    above = e.J > 10.0 * initial.J ? above + 1 : 0;
    if (above >= 3)
      throw NumericError(std::string("stage ") + stage_name(stage) + " diverged: objective " +
                         std::to_string(e.J) + " above 10x the initial " + std::to_string(initial.J) +
                         " for 3 epochs");
    if (cfg.keep_best && e.J < best) {
      best = e.J;
      res.weights = weights;
      res.rate = rate;
    }
  }
  if (!cfg.keep_best) {
    res.weights = weights;
    res.rate = rate;
  }
  return res;
}

TrainResult run_training(const TrainingConfig& cfg, const LearnedStructure& model, ParamStore weights,
                         PatchLoader& data) {
  TrainResult all;
  all.weights = std::move(weights);
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    TrainResult r = run_stage(cfg.stages[i], model, all.weights, all.rate, data, cfg, cfg.epochs_for(i));
    all.weights = std::move(r.weights);
    all.rate = std::move(r.rate);
    all.trace.insert(all.trace.end(), r.trace.begin(), r.trace.end());
  }
  return all;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace '" + path + "'");
  out << "epoch,stage,J,D,L\n";
  char buf[160];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.10g,%.10g,%.10g\n", r.epoch, r.stage.c_str(), r.J, r.D, r.L);
    out << buf;
  }
  if (!out) throw IoError("failed writing trace '" + path + "'");
}

}  // namespace liftwave
