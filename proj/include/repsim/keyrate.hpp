#pragma once

// N-partite secret-key rate from a distributed state: logical projection
// after lossy read-out, GHZ-diagonal depolarization, error rates and the
// asymptotic secret fraction.

#include <string>
#include <vector>

#include "repsim/liouville.hpp"

namespace repsim {

// Logical |0> and |1> of one party as occupation patterns of its modes.
struct PartyEncoding {
  std::string name;
  std::vector<std::string> modes;
  std::vector<int> zero;
  std::vector<int> one;
};

// The first party is the reference party A; the others are B_1 .. B_{N-1}.
struct LogicalEncoding {
  std::vector<PartyEncoding> parties;

  std::size_t size() const { return parties.size(); }
  void validate() const;  // std::invalid_argument

  // 2D output on (A, C, B): A and C carry the excitation, B the inverse.
  static LogicalEncoding ghz_2d();
  // Two parallel 1D links (A1, B1) and (A2, B2): A {|10>, |01>}, B {|01>, |10>}.
  static LogicalEncoding two_link_1d();
};

struct ProjectedState {
  CMatrix logical;  // normalized N-qubit state, party 0 most significant
  double P_Pi;
};

// Read-out loss S_loss(-ln(1 - v)) on every memory, then projection onto the
// logical subspace. Modes outside the encoding are traced out first.
ProjectedState project_logical(const DensityState& rho, const LogicalEncoding& enc, double v);

// Coefficients <psi_j^+-|rho|psi_j^+-> with
// |psi_j^+-> = (|0>|j> +- |1>|~j>)/sqrt2, j = 0 .. 2^{N-1} - 1.
struct GhzCoeffs {
  int N;
  std::vector<double> plus;
  std::vector<double> minus;
  double lambda(std::size_t j) const { return 0.5 * (plus[j] + minus[j]); }  // j >= 1 after depolarization
  double normalization() const;  // lambda_0^+ + lambda_0^- + sum_{j>0} 2 lambda_j
};

CVector ghz_basis_vector(int N, std::size_t j, bool plus);
GhzCoeffs ghz_coeffs(const CMatrix& logical);
CMatrix depolarized(const GhzCoeffs& c);

struct ErrorRates {
  double Q_Z;
  double Q_X;
  std::vector<double> Q_AB;  // one per party B_i
};

ErrorRates error_rates(const GhzCoeffs& c);
double binary_entropy(double p);
double secret_fraction(const ErrorRates& q);  // clamped to [0, 1]

struct KeyRateReport {
  double P_Pi;
  GhzCoeffs lambda;
  ErrorRates errors;
  double r_inf;
  double K;  // secret bits per second
};

KeyRateReport key_rate(const DensityState& rho, double T, const LogicalEncoding& enc, double v);

// Joint state of two independent parallel 1D links, each on modes (A, B) with
// mean generation time T. T_pair is the mean time until both links are ready
// when each is a Poisson source of rate 1/T.
struct TwoLinkState {
  DensityState rho;  // modes (A1, B1, A2, B2)
  double T_pair;     // 3T/2
};
TwoLinkState two_link_state(const DensityState& link, double T);

}  // namespace repsim
