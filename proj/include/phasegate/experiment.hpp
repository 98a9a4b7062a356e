#pragma once

// Synthetic coincidence-count generation for the phase-gate tomography
// protocol: six input states, three data measurement bases, four detector
// pairs, repeated over fixed-length intervals.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "phasegate/gate.hpp"

namespace phasegate {

enum class Basis { Z, X, Y };
inline constexpr std::array<Basis, 3> kAllBases = {Basis::Z, Basis::X, Basis::Y};

std::string_view label(Basis b);
Basis parse_basis(std::string_view text);

enum class ProgramDetector { P0, P1 };
enum class DataDetector { D0, D1 };

inline constexpr std::array<ProgramDetector, 2> kProgramDetectors = {ProgramDetector::P0,
                                                                     ProgramDetector::P1};
inline constexpr std::array<DataDetector, 2> kDataDetectors = {DataDetector::D0, DataDetector::D1};

std::string_view label(ProgramDetector d);
std::string_view label(DataDetector d);
ProgramDetector parse_program_detector(std::string_view text);
DataDetector parse_data_detector(std::string_view text);

/// Basis state registered by a data detector: D_d0 sees |0>, |+> or |+i>.
InputState basis_state(Basis b, DataDetector d);

/// Index into the four detector pairs: (D_p0,D_d0), (D_p0,D_d1), (D_p1,D_d0), (D_p1,D_d1).
constexpr std::size_t pair_index(ProgramDetector p, DataDetector d) {
  return 2 * static_cast<std::size_t>(p) + static_cast<std::size_t>(d);
}

/// Detector and source parameters. Defaults are the calibration preset.
struct NoiseConfig {
  double eta_p0 = 0.55;
  double eta_d0 = 0.55;
  double eta_d1 = 0.55;
  double eta_p1 = 0.50;
  double dark_quad = 400.0;    // counts/s on D_p0, D_d0, D_d1
  double dark_single = 180.0;  // counts/s on D_p1
  double visibility = 0.955;
  double phase_sigma = std::numbers::pi / 200.0;
  double pair_rate = 1000.0;  // generated pairs/s, before post-selection
  double interval_s = 3.0;
  std::size_t n_intervals = 12;
  double coincidence_window = 10e-9;  // s

  /// Unit efficiencies, no dark counts, full visibility, no jitter.
  static NoiseConfig ideal();

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  double efficiency(ProgramDetector d) const { return d == ProgramDetector::P0 ? eta_p0 : eta_p1; }
  double efficiency(DataDetector d) const { return d == DataDetector::D0 ? eta_d0 : eta_d1; }
  double dark_rate(ProgramDetector d) const {
    return d == ProgramDetector::P0 ? dark_quad : dark_single;
  }
  double dark_rate(DataDetector) const { return dark_quad; }
};

struct ExperimentPlan {
  std::vector<ProgramPhase> phases;
  std::vector<InputState> input_states;
  std::vector<Basis> bases;

  /// Seven phases 0..pi in steps of pi/6, all six inputs, all three bases.
  static ExperimentPlan standard();

  void validate() const;
};

/// Ideal Born probabilities over the four detector pairs, with the
/// feed-forward flip applied on the D_p1 branch before the data measurement
/// and data coherences scaled by `visibility`.
std::array<double, 4> branch_probabilities(const PureQubit& psi_in, ProgramPhase phi, Basis basis,
                                           double visibility = 1.0);

struct OutcomeProbabilities {
  std::array<double, 4> p{};  // indexed by pair_index; sums to 1 unless total_rate is 0
  double total_rate = 0.0;    // expected coincidences per second across the four pairs
  double dark_rate = 0.0;     // accidental part of total_rate
};

/// Per-pair probabilities including efficiencies and accidental dark
/// coincidences, renormalized over the four pairs.
OutcomeProbabilities outcome_probabilities(const PureQubit& psi_in, ProgramPhase phi, Basis basis,
                                           const NoiseConfig& noise);

/// Coincidence counts on the full (phase, input, basis, program detector,
/// data detector, interval) grid. Every cell is stored; counts may be
/// non-integer after efficiency rescaling.
class CountTable {
public:
  CountTable() = default;
  /// Phases are rounded to the 12 significant digits used by the CSV format.
  /// Axes are stored sorted: phases ascending, states and bases in enum order.
  CountTable(std::vector<double> phases, std::vector<InputState> states, std::vector<Basis> bases,
             std::size_t n_intervals);

  const std::vector<double>& phases() const { return phases_; }
  const std::vector<InputState>& states() const { return states_; }
  const std::vector<Basis>& bases() const { return bases_; }
  std::size_t n_intervals() const { return n_intervals_; }
  std::size_t size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

  double& at(std::size_t phase, std::size_t state, std::size_t basis, ProgramDetector p,
             DataDetector d, std::size_t interval);
  double at(std::size_t phase, std::size_t state, std::size_t basis, ProgramDetector p,
            DataDetector d, std::size_t interval) const;

  /// Sum over intervals and both program detectors.
  double setting_count(std::size_t phase, std::size_t state, std::size_t basis, DataDetector d) const;
  double total() const;
  double total(ProgramDetector p) const;

  bool feed_forward_active() const { return feed_forward_active_; }
  void set_feed_forward_active(bool v) { feed_forward_active_ = v; }
  /// 1/2 with feed forward, 1/4 when only D_p0 events are kept.
  double success_probability() const {
    return feed_forward_active_ ? kPostselectionProbability : kPostselectionProbability / 2.0;
  }

  std::size_t phase_index(double phi) const;
  std::size_t state_index(InputState s) const;
  std::size_t basis_index(Basis b) const;

  friend bool operator==(const CountTable&, const CountTable&) = default;

private:
  std::size_t offset(std::size_t phase, std::size_t state, std::size_t basis, ProgramDetector p,
                     DataDetector d, std::size_t interval) const;

  std::vector<double> phases_;
  std::vector<InputState> states_;
  std::vector<Basis> bases_;
  std::size_t n_intervals_ = 0;
  std::vector<double> counts_;
  bool feed_forward_active_ = true;
};

/// Rounds a phase to the 12 significant digits written to CSV.
double canonical_phase_key(double phi);

/// Deterministic sub-seed: splitmix64 over (seed, FNV-1a(stage), index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index);

/// Poisson pair generation, multinomial split over the detector pairs (plus
/// loss), independent Poisson accidentals, and a fresh Gaussian phase error
/// each interval. Deterministic in (plan, noise, seed) regardless of threading.
CountTable simulate_counts(const ExperimentPlan& plan, const NoiseConfig& noise, std::uint64_t seed);

/// Divides every cell by the product of its two detector efficiencies.
CountTable rescale_efficiencies(const CountTable& counts, const NoiseConfig& noise);

/// Keeps only D_p0 events, as if no corrective shift were available.
CountTable select_without_feedforward(const CountTable& counts);

void write_counts_csv(std::ostream& out, const CountTable& table);
/// Throws DataFormatError with the offending line or the list of missing cells.
CountTable read_counts_csv(std::istream& in);

}  // namespace phasegate
