#include "liftwave/lifting.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "liftwave/errors.hpp"

namespace liftwave {

const char* band_name(Band b) {
  switch (b) {
    case Band::X: return "X";
    case Band::L: return "L";
    case Band::H: return "H";
    case Band::LL: return "LL";
    case Band::HL: return "HL";
    case Band::LH: return "LH";
    case Band::HH: return "HH";
  }
  return "?";
}

bool is_quadrant(Band b) {
  return b == Band::LL || b == Band::HL || b == Band::LH || b == Band::HH;
}

PolyphasePair split(const Tensor& signal, Axis direction) {
  if (signal.rank() != 3) throw InputError("split: expected (c, h, w), got " + signal.shape_string());
  const int c = signal.channels(), h = signal.height(), w = signal.width();
  PolyphasePair p;
  p.direction = direction;
  p.parent_height = h;
  p.parent_width = w;
  if (direction == Axis::vertical) {
    p.even = Tensor(c, (h + 1) / 2, w);
    p.odd = Tensor(c, h / 2, w);
    for (int k = 0; k < c; ++k)
      for (int y = 0; y < h; ++y) {
        Tensor& dst = (y % 2 == 0) ? p.even : p.odd;
        std::copy_n(signal.data() + (static_cast<std::size_t>(k) * h + y) * w, w, &dst.at(k, y / 2, 0));
      }
  } else {
    p.even = Tensor(c, h, (w + 1) / 2);
    p.odd = Tensor(c, h, w / 2);
    for (int k = 0; k < c; ++k)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          ((x % 2 == 0) ? p.even.at(k, y, x / 2) : p.odd.at(k, y, x / 2)) = signal.at(k, y, x);
  }
  return p;
}

Tensor merge(const PolyphasePair& pair) {
  const Tensor& e = pair.even;
  const Tensor& o = pair.odd;
  const int c = e.channels();
  if (pair.direction == Axis::vertical) {
    const int h = e.height() + o.height(), w = e.width();
    if (o.width() != w || e.height() - o.height() > 1 || e.height() < o.height())
      throw InputError("merge: inconsistent vertical phases");
    Tensor out(c, h, w);
    for (int k = 0; k < c; ++k)
      for (int y = 0; y < h; ++y) {
        const Tensor& src = (y % 2 == 0) ? e : o;
        std::copy_n(src.data() + (static_cast<std::size_t>(k) * src.height() + y / 2) * w, w, &out.at(k, y, 0));
      }
    return out;
  }
  const int h = e.height(), w = e.width() + o.width();
  if (o.height() != h || e.width() - o.width() > 1 || e.width() < o.width())
    throw InputError("merge: inconsistent horizontal phases");
  Tensor out(c, h, w);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(k, y, x) = (x % 2 == 0) ? e.at(k, y, x / 2) : o.at(k, y, x / 2);
  return out;
}

int FixedFilter::radius() const {
  int r = 0;
  for (const auto& [off, c] : taps) r = std::max(r, std::abs(off));
  return r;
}

Tensor FixedFilter::kernel(Axis direction) const {
  if (taps.empty()) throw ConfigError("fixed filter without taps");
  const int r = radius();
  const int n = 2 * r + 1;
  Tensor k(direction == Axis::vertical ? std::vector<int>{1, 1, n, 1}
                                       : std::vector<int>{1, 1, 1, n});
  for (const auto& [off, c] : taps) k[static_cast<std::size_t>(r + off)] += c;
  return k;
}

FixedFilterOp::FixedFilterOp(FixedFilter filter, Axis direction)
    : filter_(std::move(filter)), kernel_(filter_.kernel(direction)) {}

OpForward FixedFilterOp::forward(const Tensor& input, const ParamStore&, const Tensor*,
                                 bool record) const {
  OpForward f;
  f.output = conv2d(input, kernel_);
  if (record) {
    f.backward = [input, k = kernel_](const Tensor& g, ParamStore*) {
      return conv2d_grad(input, k, g).input;
    };
  }
  return f;
}

const LiftingOperator& LiftingStructure::op(const std::string& id) const {
  auto it = operators.find(id);
  if (it == operators.end()) throw ConfigError("structure '" + name + "': unknown operator '" + id + "'");
  return *it->second;
}

void LiftingStructure::validate() const {
  if (levels < 1) throw ConfigError("structure '" + name + "': levels must be >= 1");
  bool quadrant_seen = false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const LiftingStep& s = steps[i];
    const std::string where = "structure '" + name + "' step " + std::to_string(i);
    if (s.targets.empty()) throw ConfigError(where + ": no target");
    bool quad = false, row = false;
    for (Band b : s.targets) (is_quadrant(b) ? quad : row) = true;
    for (Band b : s.sources) (is_quadrant(b) ? quad : row) = true;
    for (Band b : s.targets)
      if (b == Band::X) throw ConfigError(where + ": X is not a step band");
    for (Band b : s.sources) {
      if (b == Band::X) throw ConfigError(where + ": X is not a step band");
      if (std::find(s.targets.begin(), s.targets.end(), b) != s.targets.end())
        throw ConfigError(where + ": a step may not update its own source");
    }
    if (quad && row) throw ConfigError(where + ": mixes row and quadrant bands");
    if (row && quadrant_seen) throw ConfigError(where + ": row-band step after quadrant steps");
    quadrant_seen = quadrant_seen || quad;
    if (s.both_row_bands) {
      for (Band b : s.targets)
        if (b != Band::LL && b != Band::HL) throw ConfigError(where + ": repeated step must use LL/HL");
      for (Band b : s.sources)
        if (b != Band::LL && b != Band::HL) throw ConfigError(where + ": repeated step must use LL/HL");
    }
    if (s.kind == StepKind::gain) {
      if (!(s.gain != 0.0 && std::isfinite(s.gain))) throw ConfigError(where + ": invalid gain");
      continue;
    }
    if (s.sources.empty()) throw ConfigError(where + ": no source");
    if (s.sign != 1.0 && s.sign != -1.0) throw ConfigError(where + ": sign must be +1 or -1");
    const LiftingOperator& o = op(s.op);
    if (o.in_channels() != static_cast<int>(s.sources.size()) ||
        o.out_channels() != static_cast<int>(s.targets.size()))
      throw ConfigError(where + ": operator '" + s.op + "' channel counts do not match bands");
    if ((s.kind == StepKind::learned) != o.learned())
      throw ConfigError(where + ": step kind does not match operator '" + s.op + "'");
  }
}

std::size_t LiftingStructure::learned_step_count() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.kind == StepKind::learned;
  return n;
}

std::size_t SubbandPyramid::coefficient_count() const {
  std::size_t n = ll.size();
  for (const auto& d : details) n += d.hl.size() + d.lh.size() + d.hh.size();
  return n;
}

const Tensor& SubbandPyramid::band(int level, Band b) const {
  if (level < 1 || level > levels()) throw InputError("pyramid level out of range");
  const SubbandLevel& d = details[static_cast<std::size_t>(level - 1)];
  switch (b) {
    case Band::HL: return d.hl;
    case Band::LH: return d.lh;
    case Band::HH: return d.hh;
    case Band::LL:
      if (level == levels()) return ll;
      break;
    default: break;
  }
  throw InputError(std::string("pyramid has no band ") + band_name(b) + " at level " + std::to_string(level));
}

Tensor& SubbandPyramid::band(int level, Band b) {
  return const_cast<Tensor&>(static_cast<const SubbandPyramid&>(*this).band(level, b));
}

SubbandPyramid SubbandPyramid::zeros_like() const {
  SubbandPyramid z = *this;
  z.ll.fill(0.0);
  for (auto& d : z.details) {
    d.hl.fill(0.0);
    d.lh.fill(0.0);
    d.hh.fill(0.0);
  }
  return z;
}

SubbandPyramid make_pyramid(int height, int width, int levels) {
  SubbandPyramid p;
  p.height = height;
  p.width = width;
  int h = height, w = width;
  for (int d = 1; d <= levels; ++d) {
    const int he = (h + 1) / 2, ho = h / 2, we = (w + 1) / 2, wo = w / 2;
    p.details.push_back({Tensor(1, he, wo), Tensor(1, ho, we), Tensor(1, ho, wo)});
    h = he;
    w = we;
  }
  p.ll = Tensor(1, h, w);
  return p;
}

const Tensor* GradMap::find(const RegKey& k) const {
  auto it = grads_.find(k);
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor& GradMap::at_or_zero(const RegKey& k, int channels, int height, int width) {
  auto it = grads_.find(k);
  if (it == grads_.end()) it = grads_.emplace(k, Tensor(channels, height, width)).first;
  return it->second;
}

void GradMap::add(const RegKey& k, const Tensor& g) {
  auto it = grads_.find(k);
  if (it == grads_.end())
    grads_.emplace(k, g);
  else
    it->second += g;
}

Tensor GradMap::take(const RegKey& k) {
  auto it = grads_.find(k);
  if (it == grads_.end()) return {};
  Tensor t = std::move(it->second);
  grads_.erase(it);
  return t;
}

void Tape::backward(GradMap& grads, ParamStore* param_grads) const {
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)(grads, param_grads);
}

namespace {

Band row_copy(Band b) {
  if (b == Band::LL) return Band::LH;
  if (b == Band::HL) return Band::HH;
  return b;
}

bool touches_quadrant(const LiftingStep& s) {
  for (Band b : s.targets)
    if (is_quadrant(b)) return true;
  for (Band b : s.sources)
    if (is_quadrant(b)) return true;
  return false;
}

// The concrete band assignments a step expands into.
std::vector<LiftingStep> expand(const LiftingStep& s) {
  std::vector<LiftingStep> out{s};
  if (s.both_row_bands) {
    LiftingStep c = s;
    for (Band& b : c.sources) b = row_copy(b);
    for (Band& b : c.targets) b = row_copy(b);
    out.push_back(std::move(c));
  }
  return out;
}

using Regs = std::map<Band, Tensor>;

Tensor& reg(Regs& r, Band b) {
  auto it = r.find(b);
  if (it == r.end()) throw ConfigError(std::string("band ") + band_name(b) + " not available here");
  return it->second;
}

struct Shape2 {
  int h, w;
};

Shape2 shape_of(const Tensor& t) { return {t.height(), t.width()}; }

// Gradient of a register, zeros when nothing flowed into it.
Tensor grad_or_zero(const GradMap& g, const RegKey& k, Shape2 s) {
  const Tensor* t = g.find(k);
  return t ? *t : Tensor(1, s.h, s.w);
}

// Splits `from` into (even_band, odd_band) along `axis`, recording the
// adjoint (a merge of the gradients).
void split_regs(Regs& r, int level, Band from, Band even_band, Band odd_band, Axis axis, Tape* tape) {
  PolyphasePair p = split(reg(r, from), axis);
  if (tape) {
    const Shape2 se = shape_of(p.even), so = shape_of(p.odd);
    tape->push([=](GradMap& g, ParamStore*) {
      PolyphasePair gp;
      gp.direction = axis;
      gp.even = grad_or_zero(g, {level, even_band}, se);
      gp.odd = grad_or_zero(g, {level, odd_band}, so);
      g.take({level, even_band});
      g.take({level, odd_band});
      g.add({level, from}, merge(gp));
    });
  }
  r.erase(from);
  r[even_band] = std::move(p.even);
  r[odd_band] = std::move(p.odd);
}

void merge_regs(Regs& r, int level, Band even_band, Band odd_band, Band into, Axis axis, Tape* tape) {
  PolyphasePair p;
  p.direction = axis;
  p.even = std::move(reg(r, even_band));
  p.odd = std::move(reg(r, odd_band));
  r.erase(even_band);
  r.erase(odd_band);
  Tensor merged = merge(p);
  if (tape) {
    const Shape2 sm = shape_of(merged);
    tape->push([=](GradMap& g, ParamStore*) {
      Tensor gm = grad_or_zero(g, {level, into}, sm);
      g.take({level, into});
      PolyphasePair gp = split(gm, axis);
      g.add({level, even_band}, gp.even);
      g.add({level, odd_band}, gp.odd);
    });
  }
  r[into] = std::move(merged);
}

// target += direction * sign * Op(sources) on the register file.
void run_step(Regs& r, int level, const LiftingStep& s, int step_index, int copy, bool hsplit,
              double direction, const LiftingStructure& st, const ParamStore& weights,
              const TransformOptions& opt) {
  Tape* tape = opt.tape;
  if (s.kind == StepKind::gain) {
    const double f = direction > 0 ? s.gain : 1.0 / s.gain;
    for (Band b : s.targets) {
      reg(r, b) *= f;
      if (tape) {
        tape->push([=](GradMap& g, ParamStore*) {
          const Tensor* t = g.find({level, b});
          if (t) {
            Tensor scaled = *t;
            scaled *= f;
            g.set({level, b}, std::move(scaled));
          }
        });
      }
    }
    return;
  }
  int wh = 0, ww = 0;
  std::vector<Shape2> src_shapes, tgt_shapes;
  for (Band b : s.sources) {
    src_shapes.push_back(shape_of(reg(r, b)));
    wh = std::max(wh, src_shapes.back().h);
    ww = std::max(ww, src_shapes.back().w);
  }
  for (Band b : s.targets) {
    tgt_shapes.push_back(shape_of(reg(r, b)));
    wh = std::max(wh, tgt_shapes.back().h);
    ww = std::max(ww, tgt_shapes.back().w);
  }
  std::vector<Tensor> parts;
  parts.reserve(s.sources.size());
  for (Band b : s.sources) parts.push_back(fit_extent(reg(r, b), wh, ww));
  const Tensor input = parts.size() == 1 ? std::move(parts[0]) : stack_channels(parts);

  const Tensor* opacity = nullptr;
  if (opt.opacity && s.kind == StepKind::learned) {
    StepContext ctx;
    ctx.level = level;
    ctx.step_index = step_index;
    ctx.copy = copy;
    ctx.op = s.op;
    ctx.height = wh;
    ctx.width = ww;
    ctx.row_factor = 1 << level;
    ctx.col_factor = hsplit ? (1 << level) : (1 << (level - 1));
    opacity = opt.opacity(ctx);
  }
  OpForward f = st.op(s.op).forward(input, weights, opacity, tape != nullptr);
  if (f.output.channels() != static_cast<int>(s.targets.size()) || f.output.height() != wh ||
      f.output.width() != ww)
    throw ConfigError("operator '" + s.op + "' produced " + f.output.shape_string());
  const double scale = direction * s.sign;
  for (std::size_t k = 0; k < s.targets.size(); ++k) {
    Tensor& t = reg(r, s.targets[k]);
    const int th = tgt_shapes[k].h, tw = tgt_shapes[k].w;
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x)
        t.at(0, y, x) += scale * f.output.at(static_cast<int>(k), y, x);
  }
  if (tape) {
    tape->push([=, back = std::move(f.backward)](GradMap& g, ParamStore* pg) {
      Tensor gout(static_cast<int>(s.targets.size()), wh, ww);
      bool any = false;
      for (std::size_t k = 0; k < s.targets.size(); ++k) {
        const Tensor* gt = g.find({level, s.targets[k]});
        if (!gt) continue;
        any = true;
        for (int y = 0; y < tgt_shapes[k].h; ++y)
          for (int x = 0; x < tgt_shapes[k].w; ++x)
            gout.at(static_cast<int>(k), y, x) = scale * gt->at(0, y, x);
      }
      if (!any) return;
      Tensor gin = back(gout, pg);
      for (std::size_t k = 0; k < s.sources.size(); ++k) {
        Tensor gk = s.sources.size() == 1 ? gin : take_channel(gin, static_cast<int>(k));
        g.add({level, s.sources[k]}, fit_extent_adjoint(gk, src_shapes[k].h, src_shapes[k].w));
      }
    });
  }
}

void check_image(const Tensor& image, int levels) {
  if (image.rank() != 3 || image.channels() != 1)
    throw InputError("transform input must be a single-channel plane, got " + image.shape_string());
  const int need = 1 << levels;
  if (image.height() < need || image.width() < need)
    throw InputError("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                     " too small for " + std::to_string(levels) + " levels (need >= " +
                     std::to_string(need) + " per axis)");
}

}  // namespace

PolyphasePair apply_step(const PolyphasePair& pair, const LiftingStep& step,
                         const LiftingStructure& structure, const ParamStore& weights) {
  Regs r;
  r[Band::L] = pair.even;
  r[Band::H] = pair.odd;
  for (Band b : step.sources)
    if (b != Band::L && b != Band::H) throw ConfigError("apply_step: pair steps use L/H bands");
  for (Band b : step.targets)
    if (b != Band::L && b != Band::H) throw ConfigError("apply_step: pair steps use L/H bands");
  if (step.kind != StepKind::gain) structure.op(step.op);
  run_step(r, 1, step, 0, 0, false, 1.0, structure, weights, {});
  PolyphasePair out = pair;
  out.even = std::move(r[Band::L]);
  out.odd = std::move(r[Band::H]);
  return out;
}

SubbandPyramid analyze(const Tensor& image, const LiftingStructure& st, const ParamStore& weights,
                       const TransformOptions& opt) {
  check_image(image, st.levels);
  Tape* tape = opt.tape;
  SubbandPyramid pyr;
  pyr.height = image.height();
  pyr.width = image.width();
  Tensor x = image;
  for (int level = 1; level <= st.levels; ++level) {
    if (level > 1 && tape) {
      tape->push([level](GradMap& g, ParamStore*) {
        Tensor t = g.take({level, Band::X});
        if (!t.empty()) g.add({level - 1, Band::LL}, t);
      });
    }
    Regs r;
    r[Band::X] = std::move(x);
    split_regs(r, level, Band::X, Band::L, Band::H, Axis::vertical, tape);
    bool hs = false;
    for (std::size_t i = 0; i < st.steps.size(); ++i) {
      const auto copies = expand(st.steps[i]);
      for (std::size_t c = 0; c < copies.size(); ++c) {
        if (!hs && touches_quadrant(copies[c])) {
          split_regs(r, level, Band::L, Band::LL, Band::HL, Axis::horizontal, tape);
          split_regs(r, level, Band::H, Band::LH, Band::HH, Axis::horizontal, tape);
          hs = true;
        }
        run_step(r, level, copies[c], static_cast<int>(i), static_cast<int>(c), hs, 1.0, st, weights, opt);
      }
    }
    if (!hs) {
      split_regs(r, level, Band::L, Band::LL, Band::HL, Axis::horizontal, tape);
      split_regs(r, level, Band::H, Band::LH, Band::HH, Axis::horizontal, tape);
    }
    pyr.details.push_back({std::move(r[Band::HL]), std::move(r[Band::LH]), std::move(r[Band::HH])});
    x = std::move(r[Band::LL]);
  }
  pyr.ll = std::move(x);
  return pyr;
}

Tensor synthesize(const SubbandPyramid& pyr, const LiftingStructure& st, const ParamStore& weights,
                  const TransformOptions& opt) {
  if (pyr.levels() != st.levels)
    throw InputError("pyramid has " + std::to_string(pyr.levels()) + " levels, structure expects " +
                     std::to_string(st.levels));
  // Geometry check against the extents analysis would produce.
  {
    int h = pyr.height, w = pyr.width;
    for (int d = 1; d <= pyr.levels(); ++d) {
      const int he = (h + 1) / 2, ho = h / 2, we = (w + 1) / 2, wo = w / 2;
      const SubbandLevel& s = pyr.details[static_cast<std::size_t>(d - 1)];
      auto ok = [](const Tensor& t, int eh, int ew) {
        return t.rank() == 3 && t.channels() == 1 && t.height() == eh && t.width() == ew;
      };
      if (!ok(s.hl, he, wo) || !ok(s.lh, ho, we) || !ok(s.hh, ho, wo))
        throw InputError("pyramid detail bands at level " + std::to_string(d) + " have inconsistent extents");
      h = he;
      w = we;
    }
    if (pyr.ll.rank() != 3 || pyr.ll.height() != h || pyr.ll.width() != w)
      throw InputError("pyramid LL band has inconsistent extents");
  }
  Tape* tape = opt.tape;
  Tensor x = pyr.ll;
  for (int level = st.levels; level >= 1; --level) {
    if (level < st.levels && tape) {
      tape->push([level](GradMap& g, ParamStore*) {
        Tensor t = g.take({level, Band::LL});
        if (!t.empty()) g.add({level + 1, Band::X}, t);
      });
    }
    const SubbandLevel& d = pyr.details[static_cast<std::size_t>(level - 1)];
    Regs r;
    r[Band::LL] = std::move(x);
    r[Band::HL] = d.hl;
    r[Band::LH] = d.lh;
    r[Band::HH] = d.hh;
    bool hs = true;
    for (std::size_t i = st.steps.size(); i-- > 0;) {
      const auto copies = expand(st.steps[i]);
      for (std::size_t c = copies.size(); c-- > 0;) {
        if (hs && !touches_quadrant(copies[c])) {
          merge_regs(r, level, Band::LL, Band::HL, Band::L, Axis::horizontal, tape);
          merge_regs(r, level, Band::LH, Band::HH, Band::H, Axis::horizontal, tape);
          hs = false;
        }
        run_step(r, level, copies[c], static_cast<int>(i), static_cast<int>(c), hs, -1.0, st, weights, opt);
      }
    }
    if (hs) {
      merge_regs(r, level, Band::LL, Band::HL, Band::L, Axis::horizontal, tape);
      merge_regs(r, level, Band::LH, Band::HH, Band::H, Axis::horizontal, tape);
    }
    merge_regs(r, level, Band::L, Band::H, Band::X, Axis::vertical, tape);
    x = std::move(r[Band::X]);
  }
  return x;
}

void seed_pyramid(GradMap& grads, const SubbandPyramid& g) {
  for (int d = 1; d <= g.levels(); ++d) {
    const SubbandLevel& s = g.details[static_cast<std::size_t>(d - 1)];
    grads.add({d, Band::HL}, s.hl);
    grads.add({d, Band::LH}, s.lh);
    grads.add({d, Band::HH}, s.hh);
  }
  grads.add({g.levels(), Band::LL}, g.ll);
}

SubbandPyramid pyramid_gradient(GradMap& grads, const SubbandPyramid& like) {
  SubbandPyramid out = like.zeros_like();
  auto pull = [&](int d, Band b, Tensor& dst) {
    Tensor t = grads.take({d, b});
    if (!t.empty()) dst = std::move(t);
  };
  for (int d = 1; d <= like.levels(); ++d) {
    SubbandLevel& s = out.details[static_cast<std::size_t>(d - 1)];
    pull(d, Band::HL, s.hl);
    pull(d, Band::LH, s.lh);
    pull(d, Band::HH, s.hh);
  }
  pull(like.levels(), Band::LL, out.ll);
  return out;
}

std::pair<int, int> probe_support(const LiftingStructure& structure, const ParamStore& weights,
                                  int levels) {
  LiftingStructure st = structure;
  st.levels = levels;
  for (int canvas = 64;; canvas *= 2) {
    if (canvas > 4096) throw InputError("probe_support: response does not fit a 4096 canvas");
    if (canvas < (4 << levels)) continue;
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor bg(1, canvas, canvas);
    for (double& v : bg.values()) v = u(rng);
    const SubbandPyramid base_pyr = analyze(bg, st, weights);
    const Tensor base = synthesize(base_pyr, st, weights);
    int best_h = 0, best_w = 0;
    bool clipped = false;
    for (int d = 1; d <= levels && !clipped; ++d) {
      std::vector<Band> bands{Band::HL, Band::LH, Band::HH};
      if (d == levels) bands.push_back(Band::LL);
      for (Band b : bands) {
        for (int parity = 0; parity < 4 && !clipped; ++parity) {
          SubbandPyramid p = base_pyr;
          Tensor& t = p.band(d, b);
          const int cy = (t.height() / 2) & ~1, cx = (t.width() / 2) & ~1;
          t.at(0, cy + (parity >> 1), cx + (parity & 1)) += 1.0;
          const Tensor resp = synthesize(p, st, weights);
          int y0 = canvas, y1 = -1, x0 = canvas, x1 = -1;
          for (int y = 0; y < canvas; ++y)
            for (int x = 0; x < canvas; ++x)
              if (std::abs(resp.at(0, y, x) - base.at(0, y, x)) > 1e-10) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
              }
          if (y1 < 0) continue;
          if (y0 == 0 || x0 == 0 || y1 == canvas - 1 || x1 == canvas - 1) {
            clipped = true;
            break;
          }
          best_h = std::max(best_h, y1 - y0 + 1);
          best_w = std::max(best_w, x1 - x0 + 1);
        }
      }
    }
    if (!clipped) return {best_h, best_w};
  }
}

}  // namespace liftwave
