#include "liftwave/learned_ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "liftwave/errors.hpp"
#include "liftwave/fixed_wavelets.hpp"

namespace liftwave {

NetConfig NetConfig::effective() const {
  NetConfig c = *this;
  if (c.compact) {
    c.kernel = 3;
    c.res_blocks = std::max(0, c.res_blocks - 1);
    c.compact = false;
  }
  return c;
}

void NetConfig::validate() const {
  if (channels < 1) throw ConfigError("net config: channel count must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("net config: kernel extent must be odd");
  if (res_blocks < 0) throw ConfigError("net config: negative residual block count");
  if (hidden < 0) throw ConfigError("net config: negative hidden width");
  if (proposal_kernel < 0 || (proposal_kernel > 0 && proposal_kernel % 2 == 0))
    throw ConfigError("net config: proposal kernel extent must be odd");
}

int NetConfig::hidden_width() const { return hidden > 0 ? hidden : channels + 12; }

int NetConfig::proposal_extent() const {
  if (proposal_kernel > 0) return proposal_kernel;
  // Same reach as the opacity branch: two outer KxK layers plus two 3x3
  // layers per residual block.
  return 2 * ((kernel - 1) + 2 * res_blocks) + 1;
}

ProposalOpacityNet::ProposalOpacityNet(std::string prefix, int in_channels, int out_channels,
                                       NetConfig config, Tensor base)
    : prefix_(std::move(prefix)), in_(in_channels), out_(out_channels), cfg_(config.effective()),
      base_(std::move(base)) {
  cfg_.validate();
  if (in_ < 1 || out_ < 1) throw ConfigError("net '" + prefix_ + "': channel counts must be >= 1");
  if (!base_.empty()) {
    const int p = cfg_.proposal_extent();
    if (base_.rank() != 4 || base_.dim(0) != out_ || base_.dim(1) != in_ || base_.dim(2) > p ||
        base_.dim(3) > p || base_.dim(2) % 2 == 0 || base_.dim(3) % 2 == 0)
      throw ConfigError("net '" + prefix_ + "': base taps " + base_.shape_string() + " do not fit");
  }
}

Tensor ProposalOpacityNet::base_proposal() const {
  const int p = cfg_.proposal_extent();
  Tensor k(std::vector<int>{out_, in_, p, p});
  if (base_.empty()) return k;
  const int bh = base_.dim(2), bw = base_.dim(3);
  const int oy = (p - bh) / 2, ox = (p - bw) / 2;
  for (int b = 0; b < out_; ++b)
    for (int i = 0; i < in_; ++i)
      for (int y = 0; y < bh; ++y)
        for (int x = 0; x < bw; ++x)
          k[((static_cast<std::size_t>(b) * in_ + i) * p + oy + y) * p + ox + x] =
              base_[((static_cast<std::size_t>(b) * in_ + i) * bh + y) * bw + x];
  return k;
}

std::vector<std::string> ProposalOpacityNet::opacity_names() const {
  std::vector<std::string> n{prefix_ + ".op.conv_in"};
  for (int r = 0; r < cfg_.res_blocks; ++r) {
    n.push_back(prefix_ + ".op.res" + std::to_string(r) + ".conv1");
    n.push_back(prefix_ + ".op.res" + std::to_string(r) + ".conv2");
  }
  n.push_back(prefix_ + ".op.conv_out");
  return n;
}

ParamStore ProposalOpacityNet::weight_template() const {
  const int n = cfg_.channels, k = cfg_.kernel, w = cfg_.hidden_width(), p = cfg_.proposal_extent();
  ParamStore t;
  t.set(proposal_name(), Tensor(std::vector<int>{out_ * n, in_, p, p}));
  t.set(prefix_ + ".op.conv_in", Tensor(std::vector<int>{w, in_, k, k}));
  for (int r = 0; r < cfg_.res_blocks; ++r) {
    t.set(prefix_ + ".op.res" + std::to_string(r) + ".conv1", Tensor(std::vector<int>{w, w, 3, 3}));
    t.set(prefix_ + ".op.res" + std::to_string(r) + ".conv2", Tensor(std::vector<int>{w, w, 3, 3}));
  }
  t.set(prefix_ + ".op.conv_out", Tensor(std::vector<int>{n, w, k, k}));
  return t;
}

namespace {

struct BranchCache {
  Tensor a0, z0;
  std::vector<ResidualCache> res;
  Tensor z, a1, r1;
};

// Output b = sum_n props[b*N + n] * op[n].
Tensor blend(const Tensor& props, const Tensor& op, int out) {
  const int n = op.channels();
  const std::size_t hw = static_cast<std::size_t>(op.height()) * op.width();
  Tensor y(out, op.height(), op.width());
  for (int b = 0; b < out; ++b) {
    double* dst = y.plane(b).data();
    for (int k = 0; k < n; ++k) {
      const double* p = props.plane(b * n + k).data();
      const double* o = op.plane(k).data();
      for (std::size_t j = 0; j < hw; ++j) dst[j] += p[j] * o[j];
    }
  }
  return y;
}

}  // namespace

Tensor ProposalOpacityNet::opacities(const Tensor& input, const ParamStore& w) const {
  Tensor z = relu_forward(conv2d(input, w.get(prefix_ + ".op.conv_in")));
  for (int r = 0; r < cfg_.res_blocks; ++r) {
    const std::string b = prefix_ + ".op.res" + std::to_string(r);
    z = residual_block_forward(z, w.get(b + ".conv1"), w.get(b + ".conv2"));
  }
  return normalize_forward(relu_forward(conv2d(z, w.get(prefix_ + ".op.conv_out"))));
}

OpForward ProposalOpacityNet::forward(const Tensor& input, const ParamStore& w,
                                      const Tensor* opacity, bool record) const {
  if (input.rank() != 3 || input.channels() != in_)
    throw ConfigError("net '" + prefix_ + "' expects " + std::to_string(in_) + " input channels, got " +
                      input.shape_string());
  const int n = cfg_.channels;
  const Tensor& prop = w.get(proposal_name());
  Tensor props = conv2d(input, prop);
  auto cache = std::make_shared<BranchCache>();
  Tensor op;
  if (opacity) {
    if (opacity->rank() != 3 || opacity->channels() != n || opacity->height() != input.height() ||
        opacity->width() != input.width())
      throw ConfigError("net '" + prefix_ + "': opacity override " + opacity->shape_string() +
                        " does not match");
    op = *opacity;
  } else {
    cache->a0 = conv2d(input, w.get(prefix_ + ".op.conv_in"));
    cache->z0 = relu_forward(cache->a0);
    Tensor z = cache->z0;
    cache->res.resize(static_cast<std::size_t>(cfg_.res_blocks));
    for (int r = 0; r < cfg_.res_blocks; ++r) {
      const std::string b = prefix_ + ".op.res" + std::to_string(r);
      z = residual_block_forward(z, w.get(b + ".conv1"), w.get(b + ".conv2"),
                                 record ? &cache->res[static_cast<std::size_t>(r)] : nullptr);
    }
    cache->a1 = conv2d(z, w.get(prefix_ + ".op.conv_out"));
    cache->r1 = relu_forward(cache->a1);
    cache->z = std::move(z);
    op = normalize_forward(cache->r1);
  }
  OpForward f;
  f.output = blend(props, op, out_);
  if (!record) return f;
  const bool frozen_op = opacity != nullptr;
  f.backward = [this, input, props = std::move(props), op = std::move(op), cache, frozen_op, &w](
                   const Tensor& g, ParamStore* grads) {
    const int nn = cfg_.channels;
    const std::size_t hw = static_cast<std::size_t>(g.height()) * g.width();
    Tensor gprops(props.shape());
    Tensor gop(op.shape());
    for (int b = 0; b < out_; ++b) {
      const double* gb = g.plane(b).data();
      for (int k = 0; k < nn; ++k) {
        const double* p = props.plane(b * nn + k).data();
        const double* o = op.plane(k).data();
        double* gp = gprops.plane(b * nn + k).data();
        double* go = gop.plane(k).data();
        for (std::size_t j = 0; j < hw; ++j) {
          gp[j] = gb[j] * o[j];
          go[j] += gb[j] * p[j];
        }
      }
    }
    ConvGrads pg = conv2d_grad(input, w.get(proposal_name()), gprops);
    Tensor gin = std::move(pg.input);
    if (grads) grads->accumulate(proposal_name(), pg.kernels);
    if (frozen_op) return gin;
    Tensor gz = relu_backward(cache->a1, normalize_backward(cache->r1, gop));
    ConvGrads cg = conv2d_grad(cache->z, w.get(prefix_ + ".op.conv_out"), gz);
    if (grads) grads->accumulate(prefix_ + ".op.conv_out", cg.kernels);
    gz = std::move(cg.input);
    for (int r = cfg_.res_blocks - 1; r >= 0; --r) {
      const std::string b = prefix_ + ".op.res" + std::to_string(r);
      ResidualGrads rg = residual_block_backward(cache->res[static_cast<std::size_t>(r)],
                                                 w.get(b + ".conv1"), w.get(b + ".conv2"), gz);
      if (grads) {
        grads->accumulate(b + ".conv1", rg.conv1);
        grads->accumulate(b + ".conv2", rg.conv2);
      }
      gz = std::move(rg.input);
    }
    ConvGrads c0 = conv2d_grad(input, w.get(prefix_ + ".op.conv_in"), relu_backward(cache->a0, gz));
    if (grads) grads->accumulate(prefix_ + ".op.conv_in", c0.kernels);
    gin += c0.input;
    return gin;
  };
  return f;
}

Tensor po_forward(const Tensor& input, const ProposalOpacityNet& net, const ParamStore& weights,
                  const Tensor* opacity) {
  return net.forward(input, weights, opacity, false).output;
}

const std::vector<std::string>& structure_names() {
  static const std::vector<std::string> names{"legall53", "cdf97",    "po-p-u",   "po-u-p",  "hybrid53",
                                              "hybrid97", "custom4s", "custom4ms", "custom5s"};
  return names;
}

LiftingStructure base_structure(const std::string& base, int levels) {
  if (base == "legall53") return legall53_structure(levels);
  if (base == "cdf97") return cdf97_structure(levels);
  throw ConfigError("unknown base wavelet '" + base + "'");
}

namespace {

// (1, 1, kh, kw) tap kernel of a fixed filter.
Tensor taps(const FixedFilter& f, Axis a) { return f.kernel(a); }

void add_learned(LiftingStructure& s, const std::string& id, std::vector<Band> sources,
                 std::vector<Band> targets, Axis axis, double sign, bool both, const NetConfig& cfg,
                 Tensor base) {
  s.operators[id] = std::make_shared<ProposalOpacityNet>(id, static_cast<int>(sources.size()),
                                                         static_cast<int>(targets.size()), cfg,
                                                         std::move(base));
  LiftingStep step;
  step.kind = StepKind::learned;
  step.op = id;
  step.direction = axis;
  step.sources = std::move(sources);
  step.targets = std::move(targets);
  step.sign = sign;
  step.both_row_bands = both;
  s.steps.push_back(std::move(step));
}

void add_h2l(LiftingStructure& s, const NetConfig& cfg, Tensor base = {}) {
  add_learned(s, "H2L", {Band::HL, Band::LH, Band::HH}, {Band::LL}, Axis::horizontal, -1.0, false, cfg,
              std::move(base));
}

void add_l2h(LiftingStructure& s, const NetConfig& cfg) {
  add_learned(s, "L2H", {Band::LL}, {Band::HL, Band::LH, Band::HH}, Axis::horizontal, -1.0, false, cfg, {});
}

}  // namespace

LearnedStructure make_structure(const std::string& name, const NetConfig& config, int levels) {
  config.validate();
  LearnedStructure out;
  out.config = config;
  LiftingStructure& s = out.structure;
  const FixedFilter p = legall53_predict(), u = legall53_update();
  const Tensor pv = taps(p, Axis::vertical), uv = taps(u, Axis::vertical);
  const Tensor ph = taps(p, Axis::horizontal), uh = taps(u, Axis::horizontal);
  out.base = "legall53";

  if (name == "legall53" || name == "cdf97") {
    s = base_structure(name, levels);
    out.base = name;
  } else if (name == "po-p-u" || name == "custom4s") {
    add_learned(s, "PV", {Band::L}, {Band::H}, Axis::vertical, 1.0, false, config, pv);
    add_learned(s, "UV", {Band::H}, {Band::L}, Axis::vertical, 1.0, false, config, uv);
    add_learned(s, "PH", {Band::LL}, {Band::HL}, Axis::horizontal, 1.0, true, config, ph);
    add_learned(s, "UH", {Band::HL}, {Band::LL}, Axis::horizontal, 1.0, true, config, uh);
  } else if (name == "po-u-p") {
    const FixedFilter half{{{0, 0.5}}};
    add_gain(s, {Band::L}, 0.5);
    add_fixed_step(s, "avg.V", half, Axis::vertical, false);
    add_learned(s, "PV", {Band::L}, {Band::H}, Axis::vertical, 1.0, false, config, pv);
    LiftingStep g;
    g.kind = StepKind::gain;
    g.targets = {Band::LL};
    g.gain = 0.5;
    g.both_row_bands = true;
    s.steps.push_back(g);
    add_fixed_step(s, "avg.H", half, Axis::horizontal, false);
    add_learned(s, "PH", {Band::LL}, {Band::HL}, Axis::horizontal, 1.0, true, config, ph);
  } else if (name == "hybrid53" || name == "hybrid97") {
    out.base = name == "hybrid53" ? "legall53" : "cdf97";
    s = base_structure(out.base, levels);
    add_h2l(s, config);
    add_l2h(s, config);
  } else if (name == "custom4ms" || name == "custom5s") {
    add_learned(s, "PV", {Band::L}, {Band::H}, Axis::vertical, 1.0, false, config, pv);
    add_learned(s, "UV", {Band::H}, {Band::L}, Axis::vertical, 1.0, false, config, uv);
    add_learned(s, "PH", {Band::LL}, {Band::HL}, Axis::horizontal, 1.0, true, config, ph);
    // The odd-row half of the horizontal update stays fixed; the even-row
    // half is taken over by H2L, whose base taps are -U on the HL channel.
    s.operators["legall53.UH"] = std::make_shared<FixedFilterOp>(u, Axis::horizontal);
    LiftingStep upd;
    upd.kind = StepKind::fixed;
    upd.op = "legall53.UH";
    upd.direction = Axis::horizontal;
    upd.sources = {Band::HH};
    upd.targets = {Band::LH};
    s.steps.push_back(upd);
    Tensor hb(std::vector<int>{1, 3, 1, 3});
    for (int x = 0; x < 3; ++x) hb[static_cast<std::size_t>(x)] = -uh[static_cast<std::size_t>(x)];
    add_h2l(s, config, std::move(hb));
    if (name == "custom5s") add_l2h(s, config);
  } else {
    throw ConfigError("unknown structure '" + name + "'");
  }
  s.name = name;
  s.levels = levels;
  s.validate();
  for (const ProposalOpacityNet* net : learned_nets(s)) out.weights.merge(net->weight_template());
  return out;
}

LearnedStructure make_structure_from_label(const std::string& label, int levels) {
  std::string key = label;
  NetConfig cfg;
  const std::string compact = "-compact";
  if (key.size() > compact.size() && key.compare(key.size() - compact.size(), compact.size(), compact) == 0) {
    cfg.compact = true;
    key.resize(key.size() - compact.size());
  }
  const auto dash = key.rfind('-');
  if (dash != std::string::npos && key.size() - dash >= 3 && key.back() == 'c') {
    const std::string digits = key.substr(dash + 1, key.size() - dash - 2);
    if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      cfg.channels = std::stoi(digits);
      key.resize(dash);
    }
  }
  return make_structure(key, cfg, levels);
}

std::vector<const ProposalOpacityNet*> learned_nets(const LiftingStructure& structure) {
  std::vector<const ProposalOpacityNet*> nets;
  for (const auto& [id, op] : structure.operators)
    if (auto* n = dynamic_cast<const ProposalOpacityNet*>(op.get())) nets.push_back(n);
  return nets;
}

ParamStore init_weights(const LiftingStructure& structure, InitMode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamStore w;
  for (const ProposalOpacityNet* net : learned_nets(structure)) {
    ParamStore t = net->weight_template();
    for (auto& [name, k] : t) {
      const double fan = std::sqrt(static_cast<double>(k.dim(1)));
      const double a = 1.0 / (k.dim(2) * fan);
      std::uniform_real_distribution<double> u(-a, a);
      for (double& v : k.values()) v = u(rng);
    }
    Tensor& prop = t.get(net->proposal_name());
    const int n = net->config().channels;
    const Tensor base = net->base_proposal();
    const std::size_t per = base.size() / static_cast<std::size_t>(net->out_channels());
    for (int b = 0; b < net->out_channels(); ++b) {
      for (int k = 0; k < n; ++k) {
        const bool set_base = mode == InitMode::base_equivalent ? true : (k == 0 && net->replaces_base());
        if (!set_base) continue;
        std::copy_n(base.data() + b * per, per, prop.data() + (static_cast<std::size_t>(b) * n + k) * per);
      }
    }
    w.merge(t);
  }
  return w;
}

std::size_t count_params(const LiftingStructure& structure) {
  std::size_t n = 0;
  for (const ProposalOpacityNet* net : learned_nets(structure)) n += net->weight_template().scalar_count();
  return n;
}

void check_weights(const LearnedStructure& model, const ParamStore& weights) {
  for (const auto& [name, t] : model.weights) {
    if (!weights.contains(name))
      throw ConfigError("weights lack '" + name + "' required by " + model.structure.name);
    if (!weights.get(name).same_shape(t))
      throw ConfigError("weight '" + name + "' has shape " + weights.get(name).shape_string() + ", expected " +
                        t.shape_string());
  }
  for (const auto& [name, t] : weights)
    if (!model.weights.contains(name))
      throw ConfigError("weight '" + name + "' is not used by " + model.structure.name);
}

}  // namespace liftwave
