#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "phasegate/gate.hpp"
#include "phasegate/tomography.hpp"

namespace phasegate {

/// sum_ij |i><j| (x) U|i><j|U^dagger with U = diag(1, e^{i phi}); rank 1, trace 2.
ChoiMatrix ideal_choi(ProgramPhase phi);

/// Tr[chi chi_id] / (Tr[chi] Tr[chi_id]).
/// Throws std::invalid_argument unless chi_id is rank 1 (second eigenvalue
/// below 1e-8 of the trace).
double process_fidelity(const ChoiMatrix& chi, const ChoiMatrix& chi_id);

/// <psi|rho|psi>
double state_fidelity(const CMatrix& rho, const PureQubit& target);

/// Tr[rho^2]
double purity(const CMatrix& rho);

struct MeritReport {
  double phi = 0.0;
  double F_chi = 0.0;
  double F_av = 0.0;
  double F_min = 0.0;
  double P_av = 0.0;
  double P_min = 0.0;
  bool feed_forward_active = true;
  double success_probability = 0.5;
};

/// Scores one phase. `output_states` holds the reconstructed outputs for the
/// inputs |0>, |1>, |+>, |->, |+i>, |-i> in that order; each is compared with
/// U(phi)|psi_in> for the commanded phi.
MeritReport merit_report(const ChoiMatrix& chi, std::span<const CMatrix> output_states, ProgramPhase phi,
                         bool feed_forward, double success_probability);

void write_report_csv_header(std::ostream& out);
void write_report_csv_row(std::ostream& out, const MeritReport& r);

}  // namespace phasegate
