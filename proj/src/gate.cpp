#include "phasegate/gate.hpp"

#include <cmath>
#include <string>

namespace phasegate {

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const cplx kI{0.0, 1.0};
}  // namespace

PureQubit PureQubit::normalized(cplx alpha, cplx beta) {
  const double n = std::sqrt(std::norm(alpha) + std::norm(beta));
  if (n == 0.0) throw std::invalid_argument("PureQubit: zero vector cannot be normalized");
  return {alpha / n, beta / n};
}

double overlap_squared(const PureQubit& a, const PureQubit& b) {
  return std::norm(std::conj(a.alpha) * b.alpha + std::conj(a.beta) * b.beta);
}

ProgramPhase::ProgramPhase(double radians) {
  if (!std::isfinite(radians)) throw std::invalid_argument("ProgramPhase: non-finite angle");
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  phi_ = r;
}

std::string_view label(InputState s) {
  switch (s) {
    case InputState::Zero: return "0";
    case InputState::One: return "1";
    case InputState::Plus: return "+";
    case InputState::Minus: return "-";
    case InputState::PlusI: return "+i";
    case InputState::MinusI: return "-i";
  }
  return "?";
}

InputState parse_input_state(std::string_view text) {
  for (auto s : kAllInputStates)
    if (label(s) == text) return s;
  throw std::invalid_argument("unknown input state label '" + std::string(text) + "'");
}

PureQubit state_vector(InputState s) {
  switch (s) {
    case InputState::Zero: return {1.0, 0.0};
    case InputState::One: return {0.0, 1.0};
    case InputState::Plus: return {kInvSqrt2, kInvSqrt2};
    case InputState::Minus: return {kInvSqrt2, -kInvSqrt2};
    case InputState::PlusI: return {kInvSqrt2, kI * kInvSqrt2};
    case InputState::MinusI: return {kInvSqrt2, -kI * kInvSqrt2};
  }
  return {1.0, 0.0};
}

PureQubit prepare_program(ProgramPhase phi) {
  return {kInvSqrt2, std::polar(kInvSqrt2, phi.radians())};
}

CMatrix gate_unitary(ProgramPhase phi) {
  return CMatrix::diag({1.0, std::polar(1.0, phi.radians())});
}

PureQubit ideal_output(const PureQubit& psi_in, ProgramPhase phi) {
  return {psi_in.alpha, std::polar(1.0, phi.radians()) * psi_in.beta};
}

ConditionalState conditional_joint_state(const PureQubit& psi_in, ProgramPhase phi) {
  // Unnormalized: (alpha|00> + beta e^{i phi}|11>)/sqrt(2) carries weight 1/2.
  JointState joint;
  joint.amplitudes = {psi_in.alpha, 0.0, 0.0, std::polar(1.0, phi.radians()) * psi_in.beta};
  const double n = std::sqrt(std::norm(joint.amplitudes[0]) + std::norm(joint.amplitudes[3]));
  for (auto& a : joint.amplitudes) a /= n;
  return {joint, kPostselectionProbability};
}

CollapsedData measure_program(const JointState& joint, ProgramOutcome outcome) {
  const double sign = outcome == ProgramOutcome::Plus ? 1.0 : -1.0;
  const auto& a = joint.amplitudes;
  // <s|_P applied to the program factor, with |s> = (|0> + sign |1>)/sqrt(2).
  const cplx d0 = kInvSqrt2 * (a[0] + sign * a[1]);
  const cplx d1 = kInvSqrt2 * (a[2] + sign * a[3]);
  const double p = std::norm(d0) + std::norm(d1);
  if (p < 1e-15) throw std::domain_error("measure_program: outcome has zero probability");
  const double n = std::sqrt(p);
  return {{d0 / n, d1 / n}, p};
}

PureQubit feed_forward_correct(const PureQubit& state, ProgramOutcome outcome) {
  if (outcome == ProgramOutcome::Plus) return state;
  return {state.alpha, -state.beta};
}

}  // namespace phasegate
