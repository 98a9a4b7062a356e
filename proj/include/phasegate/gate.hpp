#pragma once

// Noiseless physics of the programmable phase gate: the program qubit carries
// the phase, the data qubit is rotated about z, and a measurement of the
// program qubit in the |+>/|-> basis selects whether a corrective pi shift is
// needed on the data qubit.

#include <array>
#include <numbers>
#include <stdexcept>
#include <string_view>

#include "phasegate/linalg.hpp"

namespace phasegate {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Single-qubit pure state alpha|0> + beta|1>.
struct PureQubit {
  cplx alpha;
  cplx beta;

  /// Returns the normalized state; throws std::invalid_argument on a zero vector.
  static PureQubit normalized(cplx alpha, cplx beta);

  double norm_squared() const { return std::norm(alpha) + std::norm(beta); }
  std::vector<cplx> ket() const { return {alpha, beta}; }
  CMatrix density() const { return CMatrix::projector(ket()); }
};

/// |<a|b>|^2; global phase does not enter.
double overlap_squared(const PureQubit& a, const PureQubit& b);

/// Phase angle in radians, held in [0, 2*pi).
class ProgramPhase {
public:
  ProgramPhase() = default;
  explicit ProgramPhase(double radians);
  double radians() const { return phi_; }

private:
  double phi_ = 0.0;
};

/// Two-qubit state over |data, program>: |00>, |01>, |10>, |11>.
struct JointState {
  std::array<cplx, 4> amplitudes{};
};

/// Program-qubit measurement result. Plus clicks D_p0, Minus clicks D_p1.
enum class ProgramOutcome { Plus, Minus };

/// The six preparation states used for tomography, in their fixed order.
enum class InputState { Zero, One, Plus, Minus, PlusI, MinusI };

inline constexpr std::array<InputState, 6> kAllInputStates = {
    InputState::Zero, InputState::One,  InputState::Plus,
    InputState::Minus, InputState::PlusI, InputState::MinusI};

std::string_view label(InputState s);
InputState parse_input_state(std::string_view text);
PureQubit state_vector(InputState s);

PureQubit prepare_program(ProgramPhase phi);
CMatrix gate_unitary(ProgramPhase phi);
PureQubit ideal_output(const PureQubit& psi_in, ProgramPhase phi);

struct ConditionalState {
  JointState state;
  /// Weight of the one-photon-per-port events before renormalization.
  double postselection_probability;
};

inline constexpr double kPostselectionProbability = 0.5;

ConditionalState conditional_joint_state(const PureQubit& psi_in, ProgramPhase phi);

struct CollapsedData {
  PureQubit data;
  double probability;
};

/// Projects the program qubit onto |+> or |->.
/// Throws std::domain_error if the branch has probability below 1e-15.
CollapsedData measure_program(const JointState& joint, ProgramOutcome outcome);

PureQubit feed_forward_correct(const PureQubit& state, ProgramOutcome outcome);

}  // namespace phasegate
