#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "liftwave/codestream.hpp"
#include "liftwave/errors.hpp"
#include "liftwave/evaluation.hpp"
#include "liftwave/image_io.hpp"
#include "liftwave/learned_ops.hpp"
#include "liftwave/metrics.hpp"
#include "liftwave/training.hpp"

using namespace liftwave;

namespace {

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kFormat = 4, kNumeric = 5 };

// Learned structures need a weight file; fixed ones run without.
ParamStore model_weights(const LearnedStructure& model, const std::string& path) {
  if (path.empty()) {
    if (!model.weights.empty())
      throw ConfigError(model.structure.name + " is learned and needs --weights");
    return {};
  }
  ParamStore w = load_weights(path);
  check_weights(model, w);
  return w;
}

std::vector<std::string> corpus_files(const std::string& path) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) return {path};
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(path)) {
    const std::string ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm" || ext == ".pnm")) files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PGM/PPM images in '" + path + "'");
  return files;
}

void check_threads_env() {
  const char* v = std::getenv("LIFTWAVE_THREADS");
  if (!v) return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1) throw ConfigError(std::string("LIFTWAVE_THREADS='") + v + "' is not a positive integer");
  // every code path is single-threaded, so any value is deterministic
}

int run_training_command(const std::string& manifest, const std::string& init, const std::string& output,
                         const std::string& trace, bool pretraining) {
  TrainingConfig cfg = parse_manifest(manifest);
  if (!cfg.stages_given) cfg.stages = {pretraining ? StageKind::ps : StageKind::rd};
  for (StageKind s : cfg.stages)
    if ((s == StageKind::rd) == pretraining)
      throw ConfigError(manifest + ": key 'stages': stage '" + stage_name(s) + "' belongs to " +
                        (pretraining ? "train" : "pretrain"));
  if (cfg.corpus.empty()) throw ConfigError(manifest + ": key 'corpus': missing");
  NetConfig net = cfg.net;
  const LearnedStructure model = make_structure(cfg.structure, net, cfg.levels);
  if (model.weights.empty()) throw ConfigError(manifest + ": key 'structure': '" + cfg.structure + "' has nothing to train");
  ParamStore w;
  if (init.empty()) {
    w = init_weights(model.structure, InitMode::base_equivalent, cfg.seed);
  } else {
    w = load_weights(init);
    check_weights(model, w);
  }
  PatchLoader data(cfg.corpus, cfg.patch, cfg.batch, cfg.seed);
  const TrainResult r = run_training(cfg, model, std::move(w), data);
  save_weights(r.weights, output);
  if (!trace.empty()) write_trace_csv(trace, r.trace);
  const TraceRow& first = r.trace.front();
  const TraceRow& last = r.trace.back();
  std::printf("%s: J %.6g -> %.6g over %zu stage(s); weights %s\n", pretraining ? "pretrain" : "train", first.J,
              last.J, cfg.stages.size(), digest_hex(weights_digest(r.weights)).c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned lifting wavelet image codec"};
  app.require_subcommand(1);

  std::string input, output, weights, structure = "legall53", manifest, trace, init, anchor, test, metric = "psnr",
                                      mode = "base";
  int levels = 5, probe_levels = 1, points = 10;
  double delta = 8.0, min_bpp = 0.1, max_bpp = 1.0;
  std::uint64_t seed = 1;
  std::optional<std::size_t> max_bytes;

  auto* enc = app.add_subcommand("encode", "Compress a PGM/PPM image");
  enc->add_option("--input", input, "Input image")->required();
  enc->add_option("--weights", weights, "Weight file (learned structures)");
  enc->add_option("--structure", structure, "Structure label, e.g. hybrid97-9c-compact")->capture_default_str();
  enc->add_option("--levels", levels, "Decomposition levels")->capture_default_str()->check(CLI::Range(1, 16));
  enc->add_option("--delta", delta, "Base quantizer step")->capture_default_str()->check(CLI::PositiveNumber);
  enc->add_option("--output", output, "Codestream")->required();

  auto* dec = app.add_subcommand("decode", "Reconstruct an image from a codestream");
  dec->add_option("--input", input, "Codestream")->required();
  dec->add_option("--weights", weights, "Weight file (learned structures)");
  dec->add_option("--output", output, "Output PGM")->required();
  dec->add_option("--max-bytes", max_bytes, "Decode only the quality layers fitting in this many bytes");

  auto* pre = app.add_subcommand("pretrain", "Run the pre-training stages of a manifest");
  auto* tr = app.add_subcommand("train", "Run rate-distortion training from a manifest");
  for (auto* c : {pre, tr}) {
    c->add_option("--manifest", manifest, "Training manifest")->required();
    c->add_option("--init", init, "Starting weights (default: base-equivalent init)");
    c->add_option("--output", output, "Trained weight file")->required();
    c->add_option("--trace", trace, "Loss trace CSV");
  }

  auto* ev = app.add_subcommand("eval", "Sweep the quantizer step to produce an RD CSV");
  ev->add_option("--input", input, "Image or directory of images")->required();
  ev->add_option("--weights", weights, "Weight file (learned structures)");
  ev->add_option("--structure", structure, "Structure label")->capture_default_str();
  ev->add_option("--levels", levels, "Decomposition levels")->capture_default_str()->check(CLI::Range(1, 16));
  ev->add_option("--output", output, "RD CSV")->required();
  ev->add_option("--min-bpp", min_bpp, "Lowest target rate")->capture_default_str();
  ev->add_option("--max-bpp", max_bpp, "Highest target rate")->capture_default_str();
  ev->add_option("--points", points, "Number of targets")->capture_default_str()->check(CLI::Range(2, 100));

  auto* bd = app.add_subcommand("bdrate", "Bjontegaard rate difference of two RD CSVs");
  bd->add_option("--anchor", anchor, "Anchor CSV")->required();
  bd->add_option("--test", test, "Test CSV")->required();
  bd->add_option("--metric", metric, "psnr, ssim or ms-ssim")->capture_default_str();

  auto* ps = app.add_subcommand("probe-support", "Region of support and parameter count");
  ps->add_option("--structure", structure, "Structure label")->capture_default_str();
  ps->add_option("--levels", probe_levels, "Decomposition levels")->capture_default_str()->check(CLI::Range(1, 8));
  ps->add_option("--weights", weights, "Weight file (default: random init)");
  ps->add_option("--seed", seed, "Random init seed")->capture_default_str();

  auto* iw = app.add_subcommand("init-weights", "Write initial weights for a structure");
  iw->add_option("--structure", structure, "Structure label")->capture_default_str();
  iw->add_option("--levels", levels, "Decomposition levels")->capture_default_str()->check(CLI::Range(1, 16));
  iw->add_option("--mode", mode, "base or random")->capture_default_str()->check(CLI::IsMember({"base", "random"}));
  iw->add_option("--seed", seed, "Seed")->capture_default_str();
  iw->add_option("--output", output, "Weight file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    check_threads_env();
    if (*enc) {
      const LearnedStructure model = make_structure_from_label(structure, levels);
      const ParamStore w = model_weights(model, weights);
      const Tensor img = read_image(input);
      if (img.height() < (1 << levels) || img.width() < (1 << levels))
        throw InputError("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                         " is smaller than 2^levels");
      const EncodeResult r = encode_image(img, model, w, delta);
      write_file(output, r.bytes);
      std::printf("%zu bytes, %.4f bpp\n", r.bytes.size(), r.bpp);
    } else if (*dec) {
      const std::vector<std::uint8_t> bytes = read_file(input);
      ParamStore w;
      if (!weights.empty()) w = load_weights(weights);
      const DecodeResult r = decode_image(bytes, w, max_bytes);
      write_pgm(output, round_to_pixels(r.image));
      std::printf("%ux%u, %zu bytes used\n", r.header.width, r.header.height, r.bytes_used);
    } else if (*pre || *tr) {
      return run_training_command(manifest, init, output, trace, pre->parsed());
    } else if (*ev) {
      const LearnedStructure model = make_structure_from_label(structure, levels);
      const ParamStore w = model_weights(model, weights);
      const std::vector<double> targets = bpp_targets(min_bpp, max_bpp, points);
      std::vector<std::vector<SweepPoint>> sweeps;
      for (const std::string& f : corpus_files(input)) sweeps.push_back(rd_sweep(read_image(f), model, w, targets));
      const std::vector<SweepPoint> mean = average_sweeps(sweeps);
      const std::vector<RDCurve> curves = sweep_curves(mean);
      write_rd_csv(output, curves);
      for (const SweepPoint& p : mean)
        std::printf("target %.3f  bpp %.4f  PSNR %.3f  SSIM %.4f  MS-SSIM %.4f\n", p.target, p.bpp, p.psnr, p.ssim,
                    p.ms_ssim);
      for (const RDCurve& c : curves)
        if (const std::string v = c.check(); !v.empty()) std::fprintf(stderr, "warning: %s curve: %s\n", c.metric.c_str(), v.c_str());
    } else if (*bd) {
      const auto a = read_rd_csv(anchor);
      const auto t = read_rd_csv(test);
      auto find = [&](const std::map<std::string, RDCurve>& m, const std::string& file) -> const RDCurve& {
        auto it = m.find(metric);
        if (it == m.end()) throw InputError("'" + file + "' has no " + metric + " curve");
        return it->second;
      };
      std::printf("BD-rate (%s): %+.3f%%\n", metric.c_str(), bd_rate(find(a, anchor), find(t, test)));
    } else if (*ps) {
      const LearnedStructure model = make_structure_from_label(structure, probe_levels);
      const ParamStore w = weights.empty() ? init_weights(model.structure, InitMode::random, seed)
                                           : model_weights(model, weights);
      const auto [h, wd] = probe_support(model.structure, w, probe_levels);
      std::printf("%s: support %d x %d, %zu parameters\n", structure.c_str(), h, wd,
                  count_params(model.structure));
    } else if (*iw) {
      const LearnedStructure model = make_structure_from_label(structure, levels);
      const ParamStore w = init_weights(model.structure, mode == "base" ? InitMode::base_equivalent : InitMode::random, seed);
      save_weights(w, output);
      std::printf("%zu parameters, digest %s\n", w.scalar_count(), digest_hex(weights_digest(w)).c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFormat;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  }
  return kOk;
}
