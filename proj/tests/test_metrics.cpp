#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "phasegate/metrics.hpp"

using namespace phasegate;
using std::numbers::pi;

namespace {

CMatrix random_density(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix a(2, 2);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) a(r, c) = cplx(g(rng), g(rng));
  CMatrix rho = a * a.adjoint();
  return rho * cplx(1.0 / rho.trace().real());
}

std::vector<CMatrix> ideal_outputs(ProgramPhase phi) {
  std::vector<CMatrix> out;
  for (auto s : kAllInputStates) out.push_back(ideal_output(state_vector(s), phi).density());
  return out;
}

}  // namespace

TEST_CASE("ideal_choi") {
  const double s = 1.0 / std::sqrt(2.0);
  const CMatrix phi_plus = CMatrix::projector({s, 0.0, 0.0, s}) * cplx(2.0);
  CHECK(max_abs_diff(ideal_choi(ProgramPhase(0.0)).matrix(), phi_plus) < 1e-15);

  const CMatrix phi_minus = CMatrix::projector({s, 0.0, 0.0, -s}) * cplx(2.0);
  CHECK(max_abs_diff(ideal_choi(ProgramPhase(pi)).matrix(), phi_minus) < 1e-15);

  for (double phi = 0.0; phi < 2 * pi; phi += 0.37) {
    const auto e = eig_hermitian(ideal_choi(ProgramPhase(phi)).matrix());
    CHECK(e.values[3] == doctest::Approx(2.0).epsilon(1e-13));
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(e.values[k]) < 1e-13);
  }
}

TEST_CASE("process_fidelity examples") {
  const auto c0 = ideal_choi(ProgramPhase(0.0));
  CHECK(process_fidelity(c0, c0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(process_fidelity(c0, ideal_choi(ProgramPhase(pi)))) < 1e-15);
  CHECK(process_fidelity(c0, ideal_choi(ProgramPhase(pi / 2))) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(process_fidelity(c0, ChoiMatrix(CMatrix::identity(4))), std::invalid_argument);
}

TEST_CASE("process_fidelity matches |Tr(U^dagger V)|^2 / 4 on a grid") {
  for (int i = 0; i < 100; ++i) {
    const ProgramPhase a(i * 2 * pi / 100);
    for (int j = 0; j < 7; ++j) {
      const ProgramPhase b(j * pi / 6);
      const double closed = std::pow(std::cos((a.radians() - b.radians()) / 2), 2);
      const double trace_form =
          std::norm(trace_of_product(gate_unitary(a).adjoint(), gate_unitary(b))) / 4.0;
      const double f = process_fidelity(ideal_choi(a), ideal_choi(b));
      CHECK(std::abs(f - closed) < 1e-12);
      CHECK(std::abs(f - trace_form) < 1e-12);
      // Symmetric for rank-1 arguments.
      CHECK(std::abs(f - process_fidelity(ideal_choi(b), ideal_choi(a))) < 1e-12);
    }
  }
}

TEST_CASE("process_fidelity is scale invariant") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int k = 0; k < 50; ++k) {
    CMatrix a(4, 4);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) a(r, c) = cplx(g(rng), g(rng));
    const ChoiMatrix chi(a * a.adjoint());
    const auto ref = ideal_choi(ProgramPhase(k * 0.1));
    const double f = process_fidelity(chi, ref);
    CHECK(f >= -1e-10);
    CHECK(f <= 1 + 1e-10);
    CHECK(std::abs(process_fidelity(ChoiMatrix(chi.matrix() * cplx(3.7)), ref) - f) < 1e-12);
    CHECK(std::abs(process_fidelity(chi, ChoiMatrix(ref.matrix() * cplx(0.2))) - f) < 1e-12);
  }
}

TEST_CASE("state_fidelity and purity") {
  CHECK(state_fidelity(state_vector(InputState::Zero).density(), state_vector(InputState::Zero)) == doctest::Approx(1.0));
  const CMatrix mixed = CMatrix::identity(2) * cplx(0.5);
  for (auto s : kAllInputStates) CHECK(state_fidelity(mixed, state_vector(s)) == doctest::Approx(0.5));
  CHECK(state_fidelity(state_vector(InputState::Plus).density(), state_vector(InputState::PlusI)) == doctest::Approx(0.5));

  for (auto s : kAllInputStates) CHECK(purity(state_vector(s).density()) == doctest::Approx(1.0));
  CHECK(purity(mixed) == doctest::Approx(0.5));
  CHECK(purity(CMatrix::diag({0.9, 0.1})) == doctest::Approx(0.82));
}

TEST_CASE("purity is one exactly when some pure state has fidelity one") {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 100; ++k) {
    CMatrix rho = random_density(rng);
    if (k % 2 == 0) {
      const auto e = eig_hermitian(rho);
      rho = CMatrix::projector({e.vectors(0, 1), e.vectors(1, 1)});
    }
    const auto e = eig_hermitian(rho);
    const PureQubit top{e.vectors(0, 1), e.vectors(1, 1)};
    const bool pure = std::abs(purity(rho) - 1.0) < 1e-12;
    const bool perfect = std::abs(state_fidelity(rho, top) - 1.0) < 1e-12;
    CHECK(pure == perfect);
  }
}

TEST_CASE("merit_report") {
  const ProgramPhase phi(pi / 3);
  SUBCASE("ideal outputs") {
    const auto outs = ideal_outputs(phi);
    const auto r = merit_report(ideal_choi(phi), outs, phi, true, 0.5);
    CHECK(r.F_chi == doctest::Approx(1.0));
    CHECK(r.F_av == doctest::Approx(1.0));
    CHECK(r.F_min == doctest::Approx(1.0));
    CHECK(r.P_av == doctest::Approx(1.0));
    CHECK(r.P_min == doctest::Approx(1.0));
    CHECK(r.success_probability == 0.5);
  }
  SUBCASE("one maximally mixed output") {
    auto outs = ideal_outputs(phi);
    outs[4] = CMatrix::identity(2) * cplx(0.5);
    const auto r = merit_report(ideal_choi(phi), outs, phi, false, 0.25);
    CHECK(r.F_av == doctest::Approx(5.5 / 6));
    CHECK(r.F_min == doctest::Approx(0.5));
    CHECK(r.P_min == doctest::Approx(0.5));
    CHECK(r.P_av == doctest::Approx(5.5 / 6));
    CHECK_FALSE(r.feed_forward_active);
  }
  SUBCASE("aggregates are permutation invariant") {
    std::mt19937_64 rng(9);
    std::vector<CMatrix> outs;
    for (int k = 0; k < 6; ++k) outs.push_back(random_density(rng));
    const auto base = merit_report(ideal_choi(phi), outs, phi, true, 0.5);
    CHECK(base.F_min <= base.F_av);
    CHECK(base.P_min <= base.P_av);
    // Permuting the outputs together with the targets is the same as
    // permuting (state, target) pairs; check via purity, which has no target.
    std::vector<CMatrix> perm = outs;
    std::rotate(perm.begin(), perm.begin() + 2, perm.end());
    const auto p = merit_report(ideal_choi(phi), perm, phi, true, 0.5);
    CHECK(p.P_av == doctest::Approx(base.P_av).epsilon(1e-14));
    CHECK(p.P_min == doctest::Approx(base.P_min).epsilon(1e-14));
  }
  SUBCASE("wrong number of states") {
    auto outs = ideal_outputs(phi);
    outs.pop_back();
    CHECK_THROWS_AS(merit_report(ideal_choi(phi), outs, phi, true, 0.5), std::invalid_argument);
  }
}

TEST_CASE("report CSV columns") {
  std::ostringstream out;
  write_report_csv_header(out);
  write_report_csv_row(out, MeritReport{pi, 0.98, 0.987, 0.975, 0.977, 0.961, true, 0.5});
  CHECK(out.str() ==
        "phi,F_chi,F_av,F_min,P_av,P_min,feed_forward_active,success_probability\n"
        "3.14159265359,0.980000,0.987000,0.975000,0.977000,0.961000,1,0.5000\n");
}
