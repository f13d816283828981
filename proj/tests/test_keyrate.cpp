#include <cmath>
#include <random>

#include "doctest.h"
#include "repsim/elementary.hpp"
#include "repsim/errors.hpp"
#include "repsim/keyrate.hpp"
#include "test_util.hpp"

using namespace repsim;
using testutil::max_abs;

namespace {

LogicalEncoding single_mode_pair() { return {{{"A", {"A"}, {0}, {1}}, {"B", {"B"}, {1}, {0}}}}; }

DensityState bell(const std::string& a = "A", const std::string& b = "B") {
  const ModeSpace sp = memory_space(1, {a, b});
  return DensityState::from_pure(sp, bell_target(sp));
}

DensityState perfect_ghz() {
  const ModeSpace sp = memory_space(1, {"A", "C", "B"});
  return DensityState::from_pure(sp, ghz_target(sp));
}

CMatrix projector(const CVector& v) { return v * v.adjoint(); }

CMatrix random_logical(std::mt19937_64& rng, int N) {
  const CMatrix g = testutil::random_matrix(rng, Index{1} << N);
  CMatrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

// Probability that Z outcomes of qubits 0 and i differ.
double z_disagreement(const CMatrix& rho, int N, int i) {
  double p = 0.0;
  for (Index b = 0; b < rho.rows(); ++b) {
    const bool a0 = (b >> (N - 1)) & 1;
    const bool ai = (b >> (N - 1 - i)) & 1;
    if (a0 != ai) p += rho(b, b).real();
  }
  return p;
}

// Exchange qubits i and j of an N-qubit operator.
CMatrix swap_qubits(const CMatrix& rho, int N, int i, int j) {
  const Index dim = rho.rows();
  auto map = [&](Index b) {
    const Index bi = (b >> (N - 1 - i)) & 1, bj = (b >> (N - 1 - j)) & 1;
    if (bi == bj) return b;
    return b ^ (Index{1} << (N - 1 - i)) ^ (Index{1} << (N - 1 - j));
  };
  CMatrix out(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) out(map(r), map(c)) = rho(r, c);
  return out;
}

}  // namespace

TEST_CASE("perfect GHZ projects onto itself with unit probability") {
  const ProjectedState p = project_logical(perfect_ghz(), LogicalEncoding::ghz_2d(), 0.0);
  CHECK(p.P_Pi == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(max_abs(p.logical - projector(ghz_basis_vector(3, 0, true))) < 1e-14);
  const GhzCoeffs c = ghz_coeffs(p.logical);
  CHECK(c.plus[0] == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t j = 1; j < c.plus.size(); ++j) CHECK(std::abs(c.lambda(j)) < 1e-14);
  CHECK(std::abs(c.minus[0]) < 1e-14);
}

TEST_CASE("state outside the logical subspace is rejected") {
  const DensityState vac = DensityState::basis(memory_space(1, {"A1", "B1", "A2", "B2"}), {0, 0, 0, 0});
  CHECK_THROWS_AS(project_logical(vac, LogicalEncoding::two_link_1d(), 0.0), DegenerateEncoding);
  CHECK_THROWS_AS(project_logical(bell(), single_mode_pair(), 1.0), std::invalid_argument);
  LogicalEncoding bad = single_mode_pair();
  bad.parties[1].modes = {"A"};
  CHECK_THROWS_AS(project_logical(bell(), bad, 0.0), std::invalid_argument);
}

TEST_CASE("read-out loss on a single-excitation Bell pair") {
  // Dual-rail qubit {|10>, |01>}: a lost excitation leaves the subspace.
  const LogicalEncoding dual{{{"X", {"A", "B"}, {1, 0}, {0, 1}}}};
  const ProjectedState p = project_logical(bell(), dual, 0.1);
  CHECK(p.P_Pi == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(max_abs(p.logical - CMatrix::Constant(2, 2, 0.5)) < 1e-12);
  // Single-mode encoding: every pattern is logical, loss becomes a bit error.
  const ProjectedState e = project_logical(bell(), single_mode_pair(), 0.1);
  CHECK(e.P_Pi == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(error_rates(ghz_coeffs(e.logical)).Q_Z == doctest::Approx(0.1).epsilon(1e-12));

  // Two parallel links: double excitations at one party are discarded.
  const TwoLinkState two = two_link_state(bell(), 2.0);
  CHECK(two.T_pair == 3.0);
  CHECK(two.rho.space().labels() == std::vector<std::string>{"A1", "B1", "A2", "B2"});
  const ProjectedState q = project_logical(two.rho, LogicalEncoding::two_link_1d(), 0.1);
  CHECK(q.P_Pi == doctest::Approx(0.5 * 0.81).epsilon(1e-12));
  CHECK(max_abs(q.logical - projector(ghz_basis_vector(2, 0, true))) < 1e-12);
}

TEST_CASE("GHZ coefficients of simple states") {
  const CMatrix mixed = CMatrix::Identity(4, 4) / 4.0;
  const GhzCoeffs c = ghz_coeffs(mixed);
  for (double x : {c.plus[0], c.minus[0], c.plus[1], c.minus[1]}) CHECK(x == doctest::Approx(0.25).epsilon(1e-14));

  const CMatrix dephased = 0.5 * projector(ghz_basis_vector(2, 0, true)) + 0.5 * projector(ghz_basis_vector(2, 0, false));
  const ErrorRates q = error_rates(ghz_coeffs(dephased));
  CHECK(std::abs(q.Q_Z) < 1e-15);
  CHECK(q.Q_X == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(secret_fraction(q)) < 1e-15);
  CHECK(secret_fraction(error_rates(GhzCoeffs{2, {0.5, 0.0}, {0.5, 0.0}})) == 0.0);
}

TEST_CASE("depolarization round trip") {
  std::mt19937_64 rng(11);
  for (int N : {2, 3, 4}) {
    const GhzCoeffs c = ghz_coeffs(random_logical(rng, N));
    CHECK(c.normalization() == doctest::Approx(1.0).epsilon(1e-12));
    const GhzCoeffs back = ghz_coeffs(depolarized(c));
    CHECK(std::abs(back.plus[0] - c.plus[0]) < 1e-12);
    CHECK(std::abs(back.minus[0] - c.minus[0]) < 1e-12);
    for (std::size_t j = 1; j < c.plus.size(); ++j) {
      CHECK(std::abs(back.plus[j] - c.lambda(j)) < 1e-12);
      CHECK(std::abs(back.minus[j] - c.lambda(j)) < 1e-12);
    }
    CHECK(depolarized(c).trace().real() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("Q_AB matches Z-basis disagreement of the depolarized state") {
  GhzCoeffs c{2, {0.25, 0.25}, {0.25, 0.25}};
  ErrorRates q = error_rates(c);
  REQUIRE(q.Q_AB.size() == 1);
  CHECK(q.Q_AB[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q.Q_AB[0] == doctest::Approx(z_disagreement(depolarized(c), 2, 1)).epsilon(1e-14));

  std::mt19937_64 rng(5);
  for (int N : {3, 4}) {
    c = ghz_coeffs(random_logical(rng, N));
    q = error_rates(c);
    const CMatrix dep = depolarized(c);
    CHECK(q.Q_Z == doctest::Approx(1.0 - ghz_coeffs(dep).plus[0] - ghz_coeffs(dep).minus[0]).epsilon(1e-12));
    for (int i = 1; i < N; ++i) CHECK(q.Q_AB[i - 1] == doctest::Approx(z_disagreement(dep, N, i)).epsilon(1e-12));
  }
}

TEST_CASE("secret fraction corner values") {
  CHECK(secret_fraction({0.0, 0.0, {0.0, 0.0}}) == 1.0);
  CHECK(secret_fraction({0.0, 0.5, {0.0}}) == 0.0);
  CHECK(binary_entropy(0.5) == 1.0);
  CHECK(binary_entropy(0.0) == 0.0);
  // Non-increasing in Q_X on the physical branch Q_Z/2 <= Q_X <= 1/2.
  for (double qz : {0.0, 0.1, 0.3}) {
    for (double qab : {0.0, 0.05, 0.2}) {
      double prev = 2.0;
      for (int k = 0; k <= 50; ++k) {
        const double qx = qz / 2 + (0.5 - qz / 2) * k / 50.0;
        const double r = secret_fraction({qz, qx, {qab}});
        CHECK(r >= 0.0);
        CHECK(r <= prev + 1e-15);
        prev = r;
      }
    }
  }
}

TEST_CASE("secret fraction is symmetric in the parties B_i") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    // Close to GHZ so the fraction is not clamped.
    const CMatrix noise = random_logical(rng, 3);
    const CMatrix rho = 0.97 * projector(ghz_basis_vector(3, 0, true)) + 0.03 * noise;
    const double r = secret_fraction(error_rates(ghz_coeffs(rho)));
    const double s = secret_fraction(error_rates(ghz_coeffs(swap_qubits(rho, 3, 1, 2))));
    CHECK(r > 0.0);
    CHECK(r == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("key rate composition") {
  const KeyRateReport k = key_rate(perfect_ghz(), 1.0, LogicalEncoding::ghz_2d(), 0.0);
  CHECK(k.r_inf == 1.0);
  CHECK(k.K == doctest::Approx(1.0).epsilon(1e-14));

  // Dephased Bell: no key.
  const ModeSpace sp = memory_space(1, {"A", "B"});
  CVector minus = CVector::Zero(4);
  minus[basis_index(sp, {1, 0})] = 1.0 / std::sqrt(2.0);
  minus[basis_index(sp, {0, 1})] = -1.0 / std::sqrt(2.0);
  const DensityState deph(sp, 0.5 * bell().matrix() + 0.5 * projector(minus));
  const KeyRateReport z = key_rate(deph, 0.5, single_mode_pair(), 0.0);
  CHECK(std::abs(z.r_inf) < 1e-14);
  CHECK(std::abs(z.K) < 1e-13);

  // Two parallel ideal links: half the pairs survive the projection.
  const TwoLinkState two = two_link_state(bell(), 0.1);
  const KeyRateReport t = key_rate(two.rho, two.T_pair, LogicalEncoding::two_link_1d(), 0.0);
  CHECK(t.P_Pi == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.K == doctest::Approx(1.0 * 0.5 / 0.15).epsilon(1e-12));
  CHECK_THROWS_AS(key_rate(perfect_ghz(), 0.0, LogicalEncoding::ghz_2d(), 0.0), std::invalid_argument);
}
