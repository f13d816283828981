#include "repsim/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "repsim/errors.hpp"

namespace repsim {

namespace {

// x log2 x with the limit 0 at x = 0; non-positive arguments give 0.
double xlog2x(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

}  // namespace

void LogicalEncoding::validate() const {
  if (parties.empty()) throw std::invalid_argument("key encoding needs at least one party");
  std::set<std::string> seen;
  for (const auto& p : parties) {
    if (p.modes.empty() || p.zero.size() != p.modes.size() || p.one.size() != p.modes.size()) {
      throw std::invalid_argument("party '" + p.name + "': logical patterns must cover its modes");
    }
    if (p.zero == p.one) throw std::invalid_argument("party '" + p.name + "': logical states coincide");
    for (const auto& m : p.modes) {
      if (!seen.insert(m).second) throw std::invalid_argument("mode '" + m + "' belongs to two parties");
    }
  }
}

LogicalEncoding LogicalEncoding::ghz_2d() {
  return {{{"A", {"A"}, {0}, {1}}, {"C", {"C"}, {0}, {1}}, {"B", {"B"}, {1}, {0}}}};
}

LogicalEncoding LogicalEncoding::two_link_1d() {
  return {{{"A", {"A1", "A2"}, {1, 0}, {0, 1}}, {"B", {"B1", "B2"}, {0, 1}, {1, 0}}}};
}

ProjectedState project_logical(const DensityState& rho, const LogicalEncoding& enc, double v) {
  enc.validate();
  if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("detector inefficiency must lie in [0, 1)");
  std::vector<std::string> order;
  for (const auto& p : enc.parties) order.insert(order.end(), p.modes.begin(), p.modes.end());
  for (const auto& m : order) {
    if (!rho.space().contains(m)) throw std::invalid_argument("encoding mode '" + m + "' not in state");
  }
  std::vector<std::string> rest;
  for (const auto& l : rho.space().labels()) {
    if (std::find(order.begin(), order.end(), l) == order.end()) rest.push_back(l);
  }
  DensityState x = rest.empty() ? rho : partial_trace(rho, rest);
  x = permute(x, order);
  if (v > 0.0) {
    const double g = -std::log1p(-v);
    for (const auto& m : x.space().modes()) {
      if (m.kind == ModeKind::memory) x = apply(loss_channel(x.space().subspace({m.label}), m.label, g), x);
    }
  }

  const std::size_t n = enc.size();
  const Index dim = Index{1} << n;
  std::vector<Index> idx(dim);
  for (Index b = 0; b < dim; ++b) {
    std::vector<int> occ;
    for (std::size_t p = 0; p < n; ++p) {
      const bool bit = (b >> (n - 1 - p)) & 1;
      const auto& pat = bit ? enc.parties[p].one : enc.parties[p].zero;
      occ.insert(occ.end(), pat.begin(), pat.end());
    }
    idx[b] = basis_index(x.space(), occ);
  }
  CMatrix l(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) l(i, j) = x.matrix()(idx[i], idx[j]);
  const double p = l.trace().real();
  if (!(p > 0.0)) throw DegenerateEncoding("state has no weight in the logical subspace");
  return {l / p, p};
}

CVector ghz_basis_vector(int N, std::size_t j, bool plus) {
  const std::size_t half = std::size_t{1} << (N - 1);
  if (N < 2 || j >= half) throw std::invalid_argument("GHZ basis index out of range");
  CVector psi = CVector::Zero(static_cast<Index>(2 * half));
  const double a = 1.0 / std::sqrt(2.0);
  psi[static_cast<Index>(j)] = a;
  psi[static_cast<Index>(half + (~j & (half - 1)))] = plus ? a : -a;
  return psi;
}

double GhzCoeffs::normalization() const {
  double s = plus[0] + minus[0];
  for (std::size_t j = 1; j < plus.size(); ++j) s += 2.0 * lambda(j);
  return s;
}

GhzCoeffs ghz_coeffs(const CMatrix& logical) {
  const Index dim = logical.rows();
  int N = 0;
  while ((Index{1} << N) < dim) ++N;
  if ((Index{1} << N) != dim || N < 2) throw std::invalid_argument("logical state must hold N >= 2 qubits");
  GhzCoeffs c{N, {}, {}};
  const Index half = dim / 2;
  // <psi_j^+-|rho|psi_j^+-> = (rho_jj + rho_kk +- 2 Re rho_jk) / 2 with k = 2^{N-1} + ~j.
  for (Index j = 0; j < half; ++j) {
    const Index k = half + (~j & (half - 1));
    const double diag = logical(j, j).real() + logical(k, k).real();
    const double coh = 2.0 * logical(j, k).real();
    c.plus.push_back(0.5 * (diag + coh));
    c.minus.push_back(0.5 * (diag - coh));
  }
  return c;
}

CMatrix depolarized(const GhzCoeffs& c) {
  const Index dim = Index{1} << c.N;
  CMatrix out = CMatrix::Zero(dim, dim);
  for (std::size_t j = 0; j < c.plus.size(); ++j) {
    const double wp = j == 0 ? c.plus[0] : c.lambda(j);
    const double wm = j == 0 ? c.minus[0] : c.lambda(j);
    const CVector p = ghz_basis_vector(c.N, j, true);
    const CVector m = ghz_basis_vector(c.N, j, false);
    out += wp * p * p.adjoint() + wm * m * m.adjoint();
  }
  return out;
}

ErrorRates error_rates(const GhzCoeffs& c) {
  ErrorRates q;
  q.Q_Z = 1.0 - c.plus[0] - c.minus[0];
  q.Q_X = 0.5 * (1.0 - c.plus[0] + c.minus[0]);
  for (int i = 1; i < c.N; ++i) {
    double s = 0.0;
    for (std::size_t j = 1; j < c.plus.size(); ++j) {
      if ((j >> (c.N - 1 - i)) & 1) s += c.lambda(j);
    }
    q.Q_AB.push_back(2.0 * s);
  }
  return q;
}

double binary_entropy(double p) { return -xlog2x(p) - xlog2x(1.0 - p); }

double secret_fraction(const ErrorRates& q) {
  const double a = 1.0 - 0.5 * q.Q_Z - q.Q_X;
  const double b = q.Q_X - 0.5 * q.Q_Z;
  const double c = 1.0 - q.Q_Z;
  const double worst = q.Q_AB.empty() ? 0.0 : *std::max_element(q.Q_AB.begin(), q.Q_AB.end());
  const double r = xlog2x(a) + xlog2x(b) + c - xlog2x(c) - binary_entropy(std::clamp(worst, 0.0, 1.0));
  return std::clamp(r, 0.0, 1.0);
}

KeyRateReport key_rate(const DensityState& rho, double T, const LogicalEncoding& enc, double v) {
  if (!(T > 0.0)) throw std::invalid_argument("generation time must be > 0");
  const ProjectedState proj = project_logical(rho, enc, v);
  GhzCoeffs lambda = ghz_coeffs(proj.logical);
  ErrorRates errors = error_rates(lambda);
  const double r = secret_fraction(errors);
  return {proj.P_Pi, std::move(lambda), std::move(errors), r, r * proj.P_Pi / T};
}

TwoLinkState two_link_state(const DensityState& link, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("generation time must be > 0");
  std::vector<std::string> first, second;
  for (const auto& l : link.space().labels()) {
    first.push_back(l + "1");
    second.push_back(l + "2");
  }
  return {tensor(link.relabeled(first), link.relabeled(second)), 1.5 * T};
}

}  // namespace repsim
