#pragma once

// Choi-matrix process representation and maximum-likelihood reconstruction
// of processes and single-qubit states from (possibly rescaled) counts.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "phasegate/experiment.hpp"
#include "phasegate/linalg.hpp"

namespace phasegate {

/// 4x4 positive-semidefinite operator on H_in (x) H_out (input factor first).
class ChoiMatrix {
public:
  /// Throws std::invalid_argument unless m is 4x4, Hermitian within 1e-10,
  /// has eigenvalues >= -1e-10 and positive trace.
  explicit ChoiMatrix(CMatrix m);

  const CMatrix& matrix() const { return m_; }
  double trace() const { return m_.trace().real(); }

private:
  CMatrix m_;
};

/// One effective measurement: a prepared input, an output projector, and the
/// number of events recorded for that pair.
struct TomographySetting {
  CMatrix rho_in;
  CMatrix pi_out;
  double count = 0.0;

  /// rho_in^T (x) pi_out, with the transpose taken in the computational basis.
  CMatrix effective_operator() const;
};

struct MapOutput {
  CMatrix rho;    // trace 1
  double weight;  // trace before normalization
};

/// rho_out = Tr_in[chi (rho_in^T (x) I)], normalized.
/// Throws std::domain_error if the map annihilates rho_in.
MapOutput apply_map(const ChoiMatrix& chi, const CMatrix& rho_in);

/// Tr[chi (rho_in^T (x) pi_out)]. Summed over a complete output basis this is
/// the acceptance weight of the input, 1 for a trace-preserving chi.
double setting_probability(const ChoiMatrix& chi, const TomographySetting& s);

struct MlOptions {
  double tolerance = 1e-10;  // max-norm of the per-iteration update
  std::size_t max_iterations = 100000;
  bool record_trace = false;  // keep the log-likelihood after every iteration
};

struct ProcessEstimate {
  ChoiMatrix chi;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;
  /// max |Tr_out[chi] - I|, zero for a trace-preserving estimate.
  double trace_preservation_deviation = 0.0;
};

/// Maximizes sum n log p(chi) over PSD chi with Tr[chi] = 2, starting from I/2.
/// Throws DataFormatError for a rank-deficient design or zero total counts.
ProcessEstimate ml_reconstruct_process(std::span<const TomographySetting> settings,
                                       const MlOptions& options = {});

/// Counts in bases Z, X, Y; element [b][0] belongs to D_d0, [b][1] to D_d1.
using StateCounts = std::array<std::array<double, 2>, 3>;

struct StateEstimate {
  CMatrix rho;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;
};

/// Same fixed-point scheme for a single-qubit density matrix (trace 1).
/// Throws DataFormatError if all counts are zero.
StateEstimate ml_reconstruct_state(const StateCounts& counts, const MlOptions& options = {});

/// Settings for one phase of a table: every (input, basis, data detector),
/// counts summed over intervals and program detectors.
std::vector<TomographySetting> process_settings(const CountTable& table, std::size_t phase_index);

/// Counts seen for one input state at one phase. Requires Z, X and Y in the table.
StateCounts state_counts(const CountTable& table, std::size_t phase_index, InputState input);

/// Number of linearly independent effective operators (16 for a complete design).
std::size_t design_rank(std::span<const TomographySetting> settings);

// ---------------------------------------------------------------------------
// Text files

struct ChoiRecord {
  double phase = 0.0;
  bool feed_forward = true;
  double success_probability = 0.5;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
  double trace_preservation_deviation = 0.0;
  CMatrix chi;
};

struct StateRecord {
  double phase = 0.0;
  InputState input_state = InputState::Zero;
  bool feed_forward = true;
  double success_probability = 0.5;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
  CMatrix rho;
};

void write_choi(std::ostream& out, const ChoiRecord& rec);
ChoiRecord read_choi(std::istream& in);
void write_state(std::ostream& out, const StateRecord& rec);
StateRecord read_state(std::istream& in);

}  // namespace phasegate
