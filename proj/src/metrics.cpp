#include "phasegate/metrics.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/format.h>

namespace phasegate {

ChoiMatrix ideal_choi(ProgramPhase phi) {
  const CMatrix u = gate_unitary(phi);
  CMatrix chi(4, 4);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      CMatrix eij(2, 2);
      eij(i, j) = 1.0;
      chi += tensor(eij, u * eij * u.adjoint());
    }
  return ChoiMatrix(std::move(chi));
}

double process_fidelity(const ChoiMatrix& chi, const ChoiMatrix& chi_id) {
  const auto eig = eig_hermitian(chi_id.matrix());
  if (eig.values[eig.values.size() - 2] >= 1e-8 * chi_id.trace())
    throw std::invalid_argument("process_fidelity: reference process is not rank 1");
  return trace_of_product(chi.matrix(), chi_id.matrix()).real() / (chi.trace() * chi_id.trace());
}

double state_fidelity(const CMatrix& rho, const PureQubit& target) {
  const auto ket = target.ket();
  const auto v = rho * ket;
  return std::real(std::conj(ket[0]) * v[0] + std::conj(ket[1]) * v[1]);
}

double purity(const CMatrix& rho) { return trace_of_product(rho, rho).real(); }

MeritReport merit_report(const ChoiMatrix& chi, std::span<const CMatrix> output_states, ProgramPhase phi,
                         bool feed_forward, double success_probability) {
  if (output_states.size() != kAllInputStates.size())
    throw std::invalid_argument(
        fmt::format("merit_report: expected 6 output states, got {}", output_states.size()));
  MeritReport r;
  r.phi = phi.radians();
  r.F_chi = process_fidelity(chi, ideal_choi(phi));
  r.feed_forward_active = feed_forward;
  r.success_probability = success_probability;
  r.F_min = r.P_min = 1.0;
  for (std::size_t k = 0; k < output_states.size(); ++k) {
    const double f = state_fidelity(output_states[k], ideal_output(state_vector(kAllInputStates[k]), phi));
    const double p = purity(output_states[k]);
    r.F_av += f;
    r.P_av += p;
    r.F_min = std::min(r.F_min, f);
    r.P_min = std::min(r.P_min, p);
  }
  r.F_av /= static_cast<double>(output_states.size());
  r.P_av /= static_cast<double>(output_states.size());
  return r;
}

void write_report_csv_header(std::ostream& out) {
  out << "phi,F_chi,F_av,F_min,P_av,P_min,feed_forward_active,success_probability\n";
}

void write_report_csv_row(std::ostream& out, const MeritReport& r) {
  out << fmt::format("{:.12g},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{:.4f}\n", r.phi, r.F_chi, r.F_av, r.F_min,
                     r.P_av, r.P_min, r.feed_forward_active ? 1 : 0, r.success_probability);
}

}  // namespace phasegate
