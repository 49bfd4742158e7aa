#include "liftwave/fixed_wavelets.hpp"

#include <memory>

namespace liftwave {

FixedFilter legall53_predict() { return {{{0, -0.5}, {1, -0.5}}}; }
FixedFilter legall53_update() { return {{{-1, 0.25}, {0, 0.25}}}; }

void add_fixed_step(LiftingStructure& s, const std::string& id, const FixedFilter& f, Axis axis,
                    bool predict) {
  s.operators[id] = std::make_shared<FixedFilterOp>(f, axis);
  LiftingStep step;
  step.kind = StepKind::fixed;
  step.op = id;
  step.direction = axis;
  if (axis == Axis::vertical) {
    step.sources = {predict ? Band::L : Band::H};
    step.targets = {predict ? Band::H : Band::L};
  } else {
    step.sources = {predict ? Band::LL : Band::HL};
    step.targets = {predict ? Band::HL : Band::LL};
    step.both_row_bands = true;
  }
  s.steps.push_back(std::move(step));
}

void add_gain(LiftingStructure& s, std::vector<Band> targets, double gain) {
  LiftingStep step;
  step.kind = StepKind::gain;
  step.targets = std::move(targets);
  step.gain = gain;
  s.steps.push_back(std::move(step));
}

LiftingStructure legall53_structure(int levels) {
  LiftingStructure s;
  s.name = "legall53";
  s.levels = levels;
  add_fixed_step(s, "legall53.PV", legall53_predict(), Axis::vertical, true);
  add_fixed_step(s, "legall53.UV", legall53_update(), Axis::vertical, false);
  add_fixed_step(s, "legall53.PH", legall53_predict(), Axis::horizontal, true);
  add_fixed_step(s, "legall53.UH", legall53_update(), Axis::horizontal, false);
  s.validate();
  return s;
}

LiftingStructure cdf97_structure(int levels) {
  using namespace cdf97;
  LiftingStructure s;
  s.name = "cdf97";
  s.levels = levels;
  const FixedFilter p1{{{0, kAlpha}, {1, kAlpha}}};
  const FixedFilter u1{{{-1, kBeta}, {0, kBeta}}};
  const FixedFilter p2{{{0, kGamma}, {1, kGamma}}};
  const FixedFilter u2{{{-1, kDelta}, {0, kDelta}}};
  for (Axis a : {Axis::vertical, Axis::horizontal}) {
    const std::string d = a == Axis::vertical ? "V" : "H";
    add_fixed_step(s, "cdf97.P1" + d, p1, a, true);
    add_fixed_step(s, "cdf97.U1" + d, u1, a, false);
    add_fixed_step(s, "cdf97.P2" + d, p2, a, true);
    add_fixed_step(s, "cdf97.U2" + d, u2, a, false);
  }
  // Low bands leave each direction with DC gain K and highs with 1; the
  // normalization 1/K (low), K (high) per direction is applied once at the end.
  add_gain(s, {Band::LL}, 1.0 / (kK * kK));
  add_gain(s, {Band::HH}, kK * kK);
  s.validate();
  return s;
}

}  // namespace liftwave
