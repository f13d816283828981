#pragma once

// Parameter optimization: bounded Nelder-Mead with Halton multistart over the
// continuous protocol parameters, the nesting depth enumerated.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "repsim/keyrate.hpp"
#include "repsim/protocol.hpp"

namespace repsim {

enum class Objective { fidelity, rate, key_rate };

Objective parse_objective(const std::string& name);  // std::invalid_argument
std::string to_string(Objective o);

struct Bounds {
  double lo;
  double hi;
  bool log = false;  // search on a logarithmic scale (lo > 0)

  void validate() const;
  double map(double u) const;    // [0, 1] -> [lo, hi]
  double unmap(double x) const;  // inverse of map
};

struct NelderMeadSettings {
  int max_evals = 300;  // per local search
  double x_tol = 1e-8;  // simplex diameter in unit-cube coordinates
  double f_tol = 1e-12;
  double initial_step = 0.1;
};

struct LocalOptimum {
  std::vector<double> u;  // unit-cube coordinates
  double value;
  int evals;
};

// Maximizes f over the unit cube [0, 1]^d starting from u0. Points outside the
// cube are projected back onto it.
LocalOptimum nelder_mead_max(const std::function<double(const std::vector<double>&)>& f, std::vector<double> u0,
                             const NelderMeadSettings& settings);

// Point `index` (from 1) of the Halton sequence in `dim` dimensions.
std::vector<double> halton(std::size_t index, std::size_t dim);

// Multistart maximization of f over the box; starts_per_dim * dim Halton starts.
// f may return -inf to mark an infeasible point.
LocalOptimum maximize_box(const std::function<double(const std::vector<double>&)>& f, std::size_t dim,
                          int starts_per_dim, const NelderMeadSettings& settings);

struct OptimizeSettings {
  Objective objective = Objective::key_rate;
  std::vector<int> levels = {0, 1, 2, 3, 4, 5, 6};
  Bounds eps{1e-3, 0.5};                  // 1D eps, 2D eps_a and eps_b
  bool filter = true;                     // also search nu*tau (nu*tau1, nu*tau2 in 2D)
  Bounds nu_tau{1e-3, 1e2, true};
  int starts_per_dim = 5;
  NelderMeadSettings nm;
  std::optional<double> total_L_km;       // if set, L0 = L / 2^N for each depth N

  void validate() const;  // std::invalid_argument
};

struct Evaluation {
  double value;
  double fidelity;
  double T;
  double key_rate;
  std::vector<LevelRecord> chain;
};

// Protocol run and objective value for one configuration. Key rates use the
// memory read-out inefficiency hw.v; a state with no logical weight has K = 0.
Evaluation evaluate(const ProtocolConfig& cfg, Objective objective);

struct PointOptimum {
  bool found = false;
  ProtocolConfig config;  // optimal configuration (levels, eps, filter, L0)
  Evaluation eval;
  int evaluations = 0;
  std::vector<std::string> log;  // skipped depths and failed evaluations
};

// Best configuration over depths and continuous parameters. With filtering
// enabled the unfiltered optimum is searched as well, so tau = infinity stays
// in the feasible set.
PointOptimum optimize_point(const ProtocolConfig& base, const OptimizeSettings& settings);

struct SweepSpec {
  ProtocolConfig base;
  OptimizeSettings settings;
  std::vector<double> L_km;     // total distance; sets settings.total_L_km per point
  std::vector<double> T_coh_s;
  int threads = 0;              // 0: REPSIM_THREADS or hardware concurrency

  void validate() const;
};

struct SweepRow {
  double L_km;
  double T_coh_s;
  PointOptimum optimum;
};

// Row-major over (L, T_coh); points run in parallel, each deterministic.
std::vector<SweepRow> sweep(const SweepSpec& spec);

struct FrontierPoint {
  double eps;
  double nu_tau;  // +inf without filtering
  double fidelity;
  double T;
};

// Pareto set of (T, F) over an (eps, nu*tau) grid at fixed depth: sorted by
// increasing T with strictly increasing F.
std::vector<FrontierPoint> rate_fidelity_frontier(const ProtocolConfig& base, const std::vector<double>& eps,
                                                  const std::vector<double>& nu_tau);

}  // namespace repsim
