#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "liftwave/codestream.hpp"
#include "liftwave/errors.hpp"
#include "liftwave/evaluation.hpp"
#include "liftwave/fixed_wavelets.hpp"
#include "liftwave/image_io.hpp"
#include "liftwave/metrics.hpp"
#include "test_util.hpp"

using namespace liftwave;
using namespace lwtest;

namespace {

Tensor camera() { return read_image(std::string(LIFTWAVE_DATA_DIR) + "/camera.pgm"); }

Tensor smooth_image(int h, int w, std::mt19937_64& rng) {
  Tensor t(1, h, w);
  std::normal_distribution<double> g(0, 4);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      t.at(0, y, x) = std::clamp(128 + 60 * std::sin(0.21 * x) * std::cos(0.13 * y) + g(rng), 0.0, 255.0);
  return t;
}

NetConfig small_net() {
  NetConfig c;
  c.channels = 3;
  c.kernel = 3;
  c.res_blocks = 1;
  return c;
}

}  // namespace

TEST(Header, RoundTripsEveryField) {
  CodestreamHeader h;
  h.width = 70;
  h.height = 33;
  h.levels = 2;
  h.structure = "custom4s";
  h.config = small_net();
  h.config.compact = true;
  for (std::size_t i = 0; i < h.digest.size(); ++i) h.digest[i] = static_cast<std::uint8_t>(i * 7);
  h.steps = {1.5f, 2.0f, 2.0f, 3.25f, 4.0f, 4.0f, 8.0f};
  h.truncation = {{3, 9}, {}, {1}, {2, 4, 8}, {5}, {5}, {}};
  const auto bytes = h.serialize();
  std::size_t size = 0;
  const CodestreamHeader p = CodestreamHeader::parse(bytes, &size);
  EXPECT_EQ(size, bytes.size());
  EXPECT_EQ(p.width, h.width);
  EXPECT_EQ(p.height, h.height);
  EXPECT_EQ(p.levels, h.levels);
  EXPECT_EQ(p.structure, h.structure);
  EXPECT_EQ(p.config.channels, 3);
  EXPECT_EQ(p.config.kernel, 3);
  EXPECT_EQ(p.config.res_blocks, 1);
  EXPECT_TRUE(p.config.compact);
  EXPECT_EQ(p.digest, h.digest);
  EXPECT_EQ(p.steps, h.steps);
  EXPECT_EQ(p.truncation, h.truncation);
}

TEST(Header, TruncatedHeaderReportsOffset) {
  const EncodeResult e = encode_image(Tensor(1, 16, 16, 100.0), make_structure_from_label("legall53", 2), {}, 4.0);
  std::size_t hsize = 0;
  CodestreamHeader::parse(e.bytes, &hsize);
  for (std::size_t n = 0; n < hsize; ++n) {
    try {
      CodestreamHeader::parse(std::span(e.bytes).first(n));
      ADD_FAILURE() << "prefix " << n << " parsed";
    } catch (const FormatError& err) {
      EXPECT_LE(err.offset(), n);
    }
  }
}

TEST(Codestream, DecodeMatchesInProcessPipelineBitExactly) {
  std::mt19937_64 rng(1);
  const Tensor x = smooth_image(37, 50, rng);
  for (const std::string label : {"legall53", "cdf97", "hybrid53", "custom5s"}) {
    const LearnedStructure m = make_structure(label, small_net(), 3);
    const ParamStore w = init_weights(m.structure, InitMode::random, 5);
    const EncodeResult e = encode_image(x, m, w, 3.0);
    const DecodeResult d = decode_image(e.bytes, w);

    const ParamStore rw = deserialize_weights(serialize_weights(w));
    Tensor shifted = x;
    for (double& v : shifted.values()) v -= kLevelShift;
    SubbandPyramid p = analyze(shifted, m.structure, rw);
    const std::vector<double> steps = class_steps(3.0, m.base, 3);
    auto bands = ordered_bands(p);
    for (std::size_t c = 0; c < bands.size(); ++c) {
      const Quantizer q{static_cast<float>(steps[c])};
      const IndexPlane idx = quantize(*bands[c], q);
      EXPECT_EQ(idx, e.indices[c]) << label << " class " << c;
      *bands[c] = dequantize(idx, q);
    }
    Tensor ref = synthesize(p, m.structure, rw);
    for (double& v : ref.values()) v += kLevelShift;
    EXPECT_EQ(max_abs_diff(ref, d.image), 0.0) << label;
    EXPECT_EQ(d.bytes_used, e.bytes.size());
  }
}

TEST(Codestream, BppMatchesByteCount) {
  const EncodeResult e = encode_image(camera(), make_structure_from_label("legall53", 5), {}, 8.0);
  const Tensor x = camera();
  EXPECT_DOUBLE_EQ(e.bpp, 8.0 * e.bytes.size() / (static_cast<double>(x.height()) * x.width()));
}

TEST(Codestream, TinyStepIsNearLossless) {
  const Tensor x = camera();
  const EncodeResult e = encode_image(x, make_structure_from_label("cdf97", 5), {}, 0.25);
  const DecodeResult d = decode_image(e.bytes, {});
  EXPECT_GE(psnr(round_to_pixels(d.image), x), 45.0);
}

TEST(Codestream, CameraAtModerateStep) {
  const Tensor x = camera();
  const EncodeResult e = encode_image(x, make_structure_from_label("legall53", 5), {}, 4.0);
  EXPECT_GE(psnr(round_to_pixels(decode_image(e.bytes, {}).image), x), 30.0);
}

TEST(Codestream, BlackImageCostsAlmostNothing) {
  const Tensor x(1, 256, 256, 0.0);
  const EncodeResult e = encode_image(x, make_structure_from_label("legall53", 5), {}, 8.0);
  EXPECT_LT(e.bpp, 0.05);
  EXPECT_EQ(max_abs_diff(round_to_pixels(decode_image(e.bytes, {}).image), x), 0.0);
}

TEST(Codestream, DigestMismatchIsRejected) {
  const LearnedStructure m = make_structure("hybrid97", small_net(), 2);
  const ParamStore w = init_weights(m.structure, InitMode::random, 1);
  std::mt19937_64 rng(2);
  const EncodeResult e = encode_image(smooth_image(16, 16, rng), m, w, 2.0);
  ParamStore other = w;
  other.begin()->second[0] += 0.5;
  EXPECT_THROW(decode_image(e.bytes, other), DigestMismatch);
  EXPECT_THROW(decode_image(e.bytes, {}), DigestMismatch);
  EXPECT_NO_THROW(decode_image(e.bytes, w));
}

TEST(Codestream, DigestIgnoresSubF32Noise) {
  const LearnedStructure m = make_structure("hybrid53", small_net(), 1);
  ParamStore w = init_weights(m.structure, InitMode::random, 1);
  const Digest a = weights_digest(deserialize_weights(serialize_weights(w)));
  for (auto& [n, t] : w) t[0] += 1e-12;
  EXPECT_EQ(a, weights_digest(deserialize_weights(serialize_weights(w))));
}

TEST(Truncation, QualityGrowsWithBudget) {
  const Tensor x = camera();
  const EncodeResult e = encode_image(x, make_structure_from_label("cdf97", 5), {}, 1.0);
  std::size_t hsize = 0;
  CodestreamHeader::parse(e.bytes, &hsize);
  const std::size_t floor = hsize + 6 * 16;  // header plus per-subband framing
  double last = -1;
  std::size_t last_used = 0;
  for (double frac : {0.02, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0}) {
    const auto budget = static_cast<std::size_t>(frac * static_cast<double>(e.bytes.size()));
    const DecodeResult d = decode_image(e.bytes, {}, std::max(budget, floor));
    EXPECT_LE(d.bytes_used, std::max(budget, floor));
    EXPECT_GE(d.bytes_used, last_used);
    const double q = psnr(round_to_pixels(d.image), x);
    EXPECT_GE(q, last - 1e-9) << frac;
    last = q;
    last_used = d.bytes_used;
  }
  const DecodeResult full = decode_image(e.bytes, {});
  EXPECT_EQ(max_abs_diff(decode_image(e.bytes, {}, e.bytes.size()).image, full.image), 0.0);
  EXPECT_THROW(decode_image(e.bytes, {}, hsize - 1), FormatError);
  EXPECT_THROW(decode_image(e.bytes, {}, floor - 1), FormatError);
  EXPECT_EQ(decode_image(e.bytes, {}, floor).bytes_used, floor);
}

TEST(Truncation, PhysicallyTruncatedStreamDecodesWithBudget) {
  const Tensor x = camera();
  const EncodeResult e = encode_image(x, make_structure_from_label("legall53", 5), {}, 2.0);
  const std::size_t cut = e.bytes.size() / 3;
  const std::vector<std::uint8_t> head(e.bytes.begin(), e.bytes.begin() + static_cast<long>(cut));
  EXPECT_THROW(decode_image(head, {}), FormatError);
}

TEST(Truncation, SizeIndependentOfTableContents) {
  const Tensor x = camera();
  const LearnedStructure m = make_structure_from_label("legall53", 5);
  const Analysis a = analyze_for_coding(x, m, {});
  EXPECT_EQ(encode_analysis(a, m, 3.0, true).bytes.size(), encode_analysis(a, m, 3.0, false).bytes.size());
}

// Every mutated stream either decodes or throws FormatError; nothing else
// escapes and nothing crashes.
TEST(Fuzz, MutatedStreamsFailCleanly) {
  std::mt19937_64 rng(9);
  const EncodeResult e = encode_image(smooth_image(24, 40, rng), make_structure_from_label("legall53", 2), {}, 2.0);
  int rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint8_t> b = e.bytes;
    const int kind = trial % 4;
    const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng);
    if (kind == 0) {
      b[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    } else if (kind == 1) {
      b[pos] = static_cast<std::uint8_t>(rng());
    } else if (kind == 2) {
      b.resize(pos);
    } else {
      b.insert(b.begin() + static_cast<long>(pos), static_cast<std::uint8_t>(rng()));
    }
    try {
      const DecodeResult d = decode_image(b, {});
      EXPECT_TRUE(d.image.all_finite());
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  EXPECT_GT(rejected, 500);
}

TEST(ClassSteps, NormalizedByBasisNorms) {
  const std::vector<double>& n = class_norms("legall53", 2);
  ASSERT_EQ(n.size(), 7u);
  const std::vector<double> s = class_steps(6.0, "legall53", 2);
  for (std::size_t c = 0; c < n.size(); ++c) EXPECT_EQ(s[c], static_cast<double>(static_cast<float>(6.0 / n[c])));
  // coarser bands have larger basis functions
  EXPECT_GT(n[0], n[6]);
}

TEST(ImageIo, ParsesPgmAndPpm) {
  const std::string pgm = "P5\n# c\n3 2\n255\n";
  std::vector<std::uint8_t> b(pgm.begin(), pgm.end());
  for (int i = 0; i < 6; ++i) b.push_back(static_cast<std::uint8_t>(i * 40));
  const Tensor t = parse_pnm(b);
  EXPECT_EQ(t.shape(), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(t.at(0, 1, 2), 200.0);

  const std::string ppm = "P6 1 1 255\n";
  std::vector<std::uint8_t> c(ppm.begin(), ppm.end());
  c.insert(c.end(), {255, 0, 0});
  EXPECT_NEAR(parse_pnm(c)[0], 0.299 * 255, 1e-9);
}

TEST(ImageIo, RejectsMalformed) {
  auto bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  EXPECT_THROW(parse_pnm(bytes("P2\n1 1\n255\n0")), FormatError);
  EXPECT_THROW(parse_pnm(bytes("P5\n2 2\n255\nab")), FormatError);
  EXPECT_THROW(parse_pnm(bytes("P5\n2 2\n65535\nabcdefgh")), FormatError);
  EXPECT_THROW(parse_pnm(bytes("P5\n0 2\n255\n")), FormatError);
  EXPECT_THROW(read_image("/nonexistent/file.pgm"), IoError);
}

TEST(ImageIo, PgmRoundTrip) {
  std::mt19937_64 rng(3);
  const Tensor x = round_to_pixels(smooth_image(9, 14, rng));
  const std::string path = (std::filesystem::temp_directory_path() / "liftwave_io_test.pgm").string();
  write_pgm(path, x);
  EXPECT_EQ(max_abs_diff(read_image(path), x), 0.0);
  std::filesystem::remove(path);
}

TEST(Sweep, HitsRateTargetsFromBelow) {
  const Tensor x = camera();
  const std::vector<double> targets = bpp_targets(0.2, 1.0, 3);
  const auto sweep = rd_sweep(x, make_structure_from_label("legall53", 5), {}, targets);
  ASSERT_EQ(sweep.size(), 3u);
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    EXPECT_LE(sweep[i].bpp, targets[i] + 1e-12);
    EXPECT_GT(sweep[i].bpp, 0.97 * targets[i]);
    if (i) {
      EXPECT_GT(sweep[i].psnr, sweep[i - 1].psnr);
    }
    EXPECT_TRUE(std::isfinite(sweep[i].ms_ssim));
  }
  const auto curves = sweep_curves(sweep);
  EXPECT_EQ(curves.size(), 3u);
  EXPECT_EQ(curves[0].check(), "");
}

TEST(Sweep, AverageIsPointwiseMean) {
  std::vector<SweepPoint> a(2), b(2);
  a[0] = {0.1, 1, 0.1, 30, 0.8, 0.9};
  b[0] = {0.1, 3, 0.09, 32, 0.6, 0.7};
  a[1] = {0.2, 1, 0.2, 34, 0.9, 0.95};
  b[1] = {0.2, 3, 0.18, 36, 0.7, 0.85};
  const auto m = average_sweeps({a, b});
  EXPECT_DOUBLE_EQ(m[0].psnr, 31.0);
  EXPECT_DOUBLE_EQ(m[1].bpp, 0.19);
  EXPECT_DOUBLE_EQ(m[1].ssim, 0.8);
}
