// Acceptance criteria 1-10. Usage: acceptance [n ...] (default: all).
// Prints one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "engine_fixtures.hpp"
#include "repsim/keyrate.hpp"
#include "repsim/montecarlo.hpp"
#include "repsim/optimize.hpp"
#include "test_util.hpp"

using namespace repsim;
using namespace fixtures;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "[x] ") + what;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: closed-form times ----
Outcome ac1() {
  constexpr double kTol = 1e-12;
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double e_basic = 0, e_comm = 0, e_filt = 0, e_2d = 0;
  for (double P : {0.05, 0.37, 1.0}) {
    for (double nu : {0.5, 4.0, 1e3}) {
      e_basic = std::max(e_basic, rel(level_1d_basic(scalar_spec_1d(P, nu)).T, 3.0 / (2 * P * nu)));
      const double t_c = 0.02, t_swap = 0.01, t_m = t_c + t_swap;
      e_comm = std::max(e_comm, rel(level_1d_comm(scalar_spec_1d(P, nu, t_c, t_swap)).T, (t_m + 1.5 / nu) / P));
      for (double nt : {0.3, 2.0}) {
        const double want = (t_m + 1.5 / nu + (t_c + 0.5 / nu) / std::expm1(nt)) / P;
        e_filt = std::max(e_filt, rel(level_1d_filter(scalar_spec_1d(P, nu, t_c, t_swap, nt / nu)).T, want));
      }
      for (double P2 : {0.1, 0.6}) {
        e_2d = std::max(e_2d, rel(level_2d_basic(scalar_spec_2d(P, P2, nu)).T, 5.0 / (6 * P * P2 * nu)));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  o.check(e_basic < kTol, fmt("1D basic 3/(2P nu) rel err %.1e", e_basic));
  o.check(e_comm < kTol, fmt("1D comm rel err %.1e", e_comm));
  o.check(e_filt < kTol, fmt("1D filter rel err %.1e", e_filt));
  o.check(e_2d < kTol, fmt("2D basic 5/(6 P1 P2 nu) rel err %.2e", e_2d));
  o.check(elapsed < 1.0, fmt("%.3f s", elapsed));
  return o;
}

// ---- 2: trace completeness ----
Outcome ac2() {
  constexpr double kTol = 1e-9;
  Outcome o;
  std::mt19937_64 rng(2024);
  double e[5] = {0, 0, 0, 0, 0};
  for (int i = 0; i < 20; ++i) {
    const Dissipative1D plain = random_spec_1d(rng, false, false);
    e[0] = std::max(e[0], std::abs(image_1d(plain.spec, 0.0).trace() - 1.0));
    const Dissipative1D comm = random_spec_1d(rng, false, true);
    e[1] = std::max(e[1], std::abs(image_1d(comm.spec, 0.0).trace() - 1.0));
    const Dissipative1D filt = random_spec_1d(rng, true, true);
    e[2] = std::max(e[2], std::abs(image_1d(filt.spec, 0.0).trace() - 1.0));
  }
  for (int i = 0; i < 20; ++i) {
    const Dissipative2D basic = random_spec_2d(rng, false, false);
    e[3] = std::max(e[3], std::abs(image_2d_basic(basic.spec, 0.0).trace - 1.0));
    const Dissipative2D full = random_spec_2d(rng, true, true);
    e[4] = std::max(e[4], std::abs(image_2d_full(full.spec, 0.0).trace - 1.0));
  }
  const char* names[5] = {"1D basic", "1D comm", "1D filter", "2D basic", "2D full"};
  for (int k = 0; k < 5; ++k) o.check(e[k] < kTol, fmt("%s max |Tr-1| %.1e", names[k], e[k]));
  return o;
}

// ---- 3: Laplace images against time-domain quadrature ----
DensityState weighted_bell(const std::string& x, const std::string& y, double eps) {
  const ModeSpace sp = memory_space(2, {x, y});
  CVector psi = CVector::Zero(sp.dim());
  psi[basis_index(sp, {1, 0})] = 1.0;
  psi[basis_index(sp, {0, 1})] = eps;
  psi.normalize();
  return DensityState::from_pure(sp, psi);
}

Outcome ac3() {
  constexpr double kTol = 1e-8;
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();

  const double nu = 1.3, s = 0.4;
  LevelSpec1D spec;
  spec.segments = {weighted_bell("A1", "B1", 0.6), weighted_bell("A2", "B2", 0.3)};
  const SuperOp gen = dissipator(memory_space(2, {"A1"}), annihilation(2)).scaled(0.8);
  spec.segment_decay[0] = LocalGenerator(spec.segments[0].space(), {gen});
  spec.merge = SuperOp::identity(spec.segments[0].space());
  spec.nu = nu;
  const DensityState got = prep_image_1d(spec, s);
  const SuperOp full = spec.segment_decay[0].assemble();
  const CVector x0 = testutil::laplace_quadrature(full.matrix(), s + nu, spec.segments[0].vec(), 0.004, 45.0);
  const DensityState w0 = DensityState::from_vec(spec.segments[0].space(), x0);
  const DensityState w1 = spec.segments[1].scaled(1.0 / (s + nu));
  const DensityState want = (tensor(w0, spec.segments[1]) + tensor(spec.segments[0], w1)).scaled(nu * nu / (s + 2 * nu));
  const double e_prep = testutil::max_abs(got.matrix() - want.matrix());
  o.check(e_prep < kTol, fmt("prep image vs quadrature %.1e", e_prep));

  std::mt19937_64 rng(3);
  const ModeSpace sp = memory_space(2, {"X", "Y"});
  const CMatrix a = embed_operator(sp, "X", annihilation(2));
  const CMatrix b = embed_operator(sp, "Y", annihilation(2));
  const SuperOp L = dissipator(sp, a).scaled(0.7) + dissipator(sp, b).scaled(0.3) +
                    dissipator(sp, b.adjoint() * b).scaled(0.5);
  const DensityState rho = testutil::random_state(rng, sp);
  const double s2 = 0.5;
  const DensityState r = resolvent_apply(L, s2, rho);
  const CVector q = testutil::laplace_quadrature(L.matrix(), s2, rho.vec(), 0.004, 80.0);
  const double e_res = (r.vec() - q).cwiseAbs().maxCoeff();
  o.check(e_res < kTol, fmt("resolvent vs quadrature %.1e", e_res));
  const double elapsed = seconds_since(t0);
  o.check(elapsed < 60.0, fmt("%.1f s", elapsed));
  return o;
}

// ---- 4: time density and its Poisson approximation ----
Outcome ac4() {
  Outcome o;
  const double nu = 1.0;
  double l1[2];
  int k = 0;
  for (double P : {0.5, 0.1}) {
    const double T = 3.0 / (2 * P * nu);
    const int n = 200000;  // Simpson on [0, 60 T]
    const double h = 60.0 * T / n;
    std::vector<double> t(n + 1);
    for (int i = 0; i <= n; ++i) t[i] = i * h;
    const GenerationPdf g = generation_pdf_1d(P, nu, t);
    double integral = 0.0, dist = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      integral += w * g.r[i];
      dist += w * std::abs(g.r[i] - g.poisson[i]);
    }
    integral *= h / 3.0;
    l1[k++] = dist * h / 3.0;
    o.check(std::abs(integral - 1.0) < 1e-6, fmt("P=%.1f integral-1 %.1e", P, integral - 1.0));
  }
  o.check(l1[1] < l1[0], fmt("L1 to Poisson: P=0.1 %.4f < P=0.5 %.4f", l1[1], l1[0]));
  return o;
}

// ---- 5: Monte Carlo against the engine at nesting level II ----
Outcome ac5() {
  constexpr double kZ = 3.0;
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int ok_f = 0, ok_r = 0;
  std::string worst;
  double zmax = 0.0;
  for (double L0 : {10.0, 20.0, 30.0}) {
    for (double eps : {0.05, 0.1, 0.2}) {
      ProtocolConfig cfg;
      cfg.levels = 2;
      cfg.eps = eps;
      cfg.hw.L0_km = L0;
      cfg.hw.T_coh_s = 0.15;
      cfg.hw.t_swap = 1e-4;
      cfg.filter.kind = FilterSchedule::Kind::absolute;
      cfg.filter.tau_s = {0.015};
      const ProtocolModel model(cfg);
      const LevelRecord eng = run_protocol(model).back();
      McSettings s;
      s.n_traj = 4151;
      s.seed = 5;
      const McEstimate mc = estimate(model, s);
      const double zf = (eng.fidelity - mc.fidelity) / mc.fidelity_stderr;
      const double zr = (1.0 / eng.result.T - mc.rate) / mc.rate_stderr;
      ok_f += std::abs(zf) <= kZ;
      ok_r += std::abs(zr) <= kZ;
      std::printf("  AC5 L=%g km eps=%.2f: F engine %.4f MC %.4f+-%.4f z=%+.2f | rate engine %.4g MC %.4g+-%.2g z=%+.2f\n",
                  4 * L0, eps, eng.fidelity, mc.fidelity, mc.fidelity_stderr, zf, 1.0 / eng.result.T, mc.rate,
                  mc.rate_stderr, zr);
      if (std::max(std::abs(zf), std::abs(zr)) > zmax) {
        zmax = std::max(std::abs(zf), std::abs(zr));
        worst = fmt("worst |z| %.2f at L=%g km eps=%.2f", zmax, 4 * L0, eps);
      }
    }
  }
  o.check(ok_f == 9, fmt("fidelity within 3 SE at %d/9 points", ok_f));
  o.check(ok_r == 9, fmt("rate within 3 SE at %d/9 points", ok_r));
  o.detail += "; " + worst;
  const double elapsed = seconds_since(t0);
  o.check(elapsed < 1800.0, fmt("%.0f s", elapsed));
  return o;
}

// ---- 6: completion-time distribution ----
Outcome ac6() {
  Outcome o;
  const double q = 1e-4, dt = 1e-4, P = 0.4;
  const ProtocolModel model = synthetic_model(1, q, dt, P);
  McSettings s;
  s.n_traj = 100000;
  s.seed = 6;
  s.keep_times = true;
  const McEstimate e = estimate(model, s);
  const double nu = q / dt;
  const GenerationPdf g = generation_pdf_1d(P, nu, {});
  const double d = ks_distance(e.times, [&](double t) { return two_pole_cdf(g, P, nu, t); });
  const double crit = 1.628 / std::sqrt(static_cast<double>(s.n_traj));  // 1% level
  o.check(d < crit, fmt("KS distance %.5f < %.5f (n=1e5)", d, crit));
  return o;
}

// ---- 7: filtering limits ----
Outcome ac7() {
  Outcome o;
  std::mt19937_64 rng(77);
  double e_state = 0.0, e_T = 0.0, e_div = 0.0;
  for (int i = 0; i < 5; ++i) {
    Dissipative1D d = random_spec_1d(rng, false, true);
    const LevelResult comm = level_1d_comm(d.spec);
    d.spec.tau = 50.0 / d.spec.nu;
    const LevelResult filt = level_1d_filter(d.spec);
    e_state = std::max(e_state, (filt.rho.matrix() - comm.rho.matrix()).norm());
    e_T = std::max(e_T, rel(filt.T, comm.T));
  }
  for (double nu : {0.5, 2.0, 40.0}) {
    for (double t_c : {0.0, 0.3}) {
      const double tau = 1e-3 / nu;
      const double T = level_1d_filter(scalar_spec_1d(1.0, nu, t_c, 0.0, tau)).T;
      e_div = std::max(e_div, rel(T, (t_c + 0.5 / nu) / (nu * tau)));
    }
  }
  o.check(e_state < 1e-8, fmt("nu tau=50 state norm diff %.1e", e_state));
  o.check(e_T < 1e-8, fmt("nu tau=50 T rel diff %.1e", e_T));
  o.check(e_div < 1e-2, fmt("nu tau=1e-3 divergence rel err %.2e", e_div));
  return o;
}

// ---- 8: key-rate corner cases ----
Outcome ac8() {
  Outcome o;
  const ModeSpace sp = memory_space(2, {"A", "C", "B"});
  const KeyRateReport k = key_rate(DensityState::from_pure(sp, ghz_target(sp)), 1.0, LogicalEncoding::ghz_2d(), 0.0);
  o.check(k.r_inf == 1.0, fmt("r(perfect GHZ) = %.17g", k.r_inf));
  const double r0 = secret_fraction(error_rates(GhzCoeffs{2, {0.5, 0.0}, {0.5, 0.0}}));
  o.check(r0 == 0.0, fmt("r(l0+ = l0- = 1/2) = %.17g", r0));
  std::mt19937_64 rng(8);
  double e = 0.0;
  for (int N : {2, 3, 4, 5}) {
    const CMatrix g = testutil::random_matrix(rng, Index{1} << N);
    CMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    const GhzCoeffs c = ghz_coeffs(rho);
    const GhzCoeffs back = ghz_coeffs(depolarized(c));
    e = std::max({e, std::abs(back.plus[0] - c.plus[0]), std::abs(back.minus[0] - c.minus[0])});
    for (std::size_t j = 1; j < c.plus.size(); ++j) {
      e = std::max({e, std::abs(back.plus[j] - c.lambda(j)), std::abs(back.minus[j] - c.lambda(j))});
    }
  }
  o.check(e < 1e-12, fmt("depolarization round trip %.1e", e));
  return o;
}

// ---- 9: rate-fidelity frontier with and without filtering ----
Outcome ac9() {
  Outcome o;
  ProtocolConfig cfg;
  cfg.levels = 1;
  cfg.hw.L0_km = 150.0;  // L = 300 km
  cfg.hw.T_coh_s = 0.1;
  OptimizeSettings s;
  s.objective = Objective::fidelity;
  s.levels = {1};
  s.eps = {0.01, 0.6};
  s.nu_tau = {1e-3, 1e2, true};
  s.filter = false;
  const PointOptimum plain = optimize_point(cfg, s);
  s.filter = true;
  const PointOptimum filt = optimize_point(cfg, s);

  std::vector<double> eps, nt{std::numeric_limits<double>::infinity()};
  for (int i = 1; i <= 12; ++i) eps.push_back(0.05 * i);
  for (int i = 0; i <= 15; ++i) nt.push_back(std::pow(10.0, -3.0 + 0.333333 * i));
  const auto front = rate_fidelity_frontier(cfg, eps, nt);
  bool monotone = front.size() >= 2;
  for (std::size_t i = 1; i < front.size(); ++i) monotone &= front[i].fidelity > front[i - 1].fidelity && front[i].T > front[i - 1].T;

  const double f0 = plain.eval.fidelity, f1 = filt.eval.fidelity;
  o.check(front.size() >= 2 && monotone, fmt("monotone frontier with %zu points", front.size()));
  o.check(f1 > f0, fmt("max F filtered %.4f > unfiltered %.4f", f1, f0));
  o.check(f1 - f0 >= 0.1, fmt("gap %.4f >= 0.1", f1 - f0));
  return o;
}

// ---- 10: linear scaling of the engine with depth ----
double engine_seconds(double L0, int levels) {
  ProtocolConfig cfg;
  cfg.levels = levels;
  cfg.hw.L0_km = L0;
  cfg.filter.kind = FilterSchedule::Kind::relative;
  cfg.filter.nu_tau = 1.0;
  const ProtocolModel model(cfg);
  double best = 1e300;
  for (int rep = 0; rep < 25; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_protocol(model);
    best = std::min(best, seconds_since(t0));
    if (r.size() != static_cast<std::size_t>(levels + 1)) return NAN;
  }
  return best;
}

struct Fit {
  double slope, intercept, r2;
};

Fit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ss_res += std::pow(y[i] - slope * x[i] - icpt, 2);
    ss_tot += std::pow(y[i] - sy / n, 2);
  }
  return {slope, icpt, 1.0 - ss_res / ss_tot};
}

Outcome ac10() {
  Outcome o;
  Fit fits[2];
  int k = 0;
  for (double L0 : {178.0 / 16.0, 178.0 / 4.0}) {
    std::vector<double> n, t;
    for (int N = 1; N <= 10; ++N) {
      n.push_back(N);
      t.push_back(engine_seconds(L0, N));
    }
    fits[k] = linear_fit(n, t);
    o.check(fits[k].r2 >= 0.95, fmt("L0=%.2f km R^2 %.4f, %.2f ms/level", L0, fits[k].r2, 1e3 * fits[k].slope));
    ++k;
  }
  const double d = rel(fits[1].slope, fits[0].slope);
  o.check(d < 0.1, fmt("per-level time differs by %.1f%%", 100 * d));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (int i = 1; i <= 10; ++i) which.push_back(i);
  }
  bool all = true;
  for (int id : which) {
    if (id < 1 || id > 10) {
      std::fprintf(stderr, "unknown criterion %d\n", id);
      return 2;
    }
    Outcome out;
    try {
      out = criteria[id - 1]();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::printf("AC%d %s  %s\n", id, out.pass ? "PASS" : "FAIL", out.detail.c_str());
    std::fflush(stdout);
    all &= out.pass;
  }
  return all ? 0 : 1;
}
