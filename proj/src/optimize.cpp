#include "repsim/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "repsim/errors.hpp"
#include "repsim/montecarlo.hpp"

namespace repsim {

namespace {

constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

using Point = std::vector<double>;

void clamp_unit(Point& u) {
  for (double& x : u) x = std::clamp(x, 0.0, 1.0);
}

Point affine(const Point& a, const Point& b, double t) {  // a + t (b - a)
  Point out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  clamp_unit(out);
  return out;
}

double diameter(const std::vector<Point>& simplex) {
  double d = 0.0;
  for (std::size_t i = 1; i < simplex.size(); ++i)
    for (std::size_t k = 0; k < simplex[0].size(); ++k) d = std::max(d, std::abs(simplex[i][k] - simplex[0][k]));
  return d;
}

double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

unsigned nth_prime(std::size_t n) {
  unsigned p = 1;
  for (std::size_t found = 0; found <= n;) {
    ++p;
    bool prime = true;
    for (unsigned q = 2; q * q <= p; ++q) {
      if (p % q == 0) {
        prime = false;
        break;
      }
    }
    if (prime) ++found;
  }
  return p;
}

// Continuous parameters of one search: eps (or eps_a, eps_b) then, if
// filtered, nu*tau (and nu*tau2 in 2D).
struct Layout {
  bool two_d;
  bool filtered;
  std::size_t dim() const { return (two_d ? 2 : 1) + (filtered ? (two_d ? 2 : 1) : 0); }
};

ProtocolConfig build(const ProtocolConfig& cfg, const Layout& layout, const OptimizeSettings& s, const Point& u) {
  ProtocolConfig out = cfg;
  std::size_t i = 0;
  if (layout.two_d) {
    out.eps_a = s.eps.map(u[i++]);
    out.eps_b = s.eps.map(u[i++]);
  } else {
    out.eps = s.eps.map(u[i++]);
  }
  out.filter = FilterSchedule{};
  if (layout.filtered) {
    out.filter.kind = FilterSchedule::Kind::relative;
    out.filter.nu_tau = s.nu_tau.map(u[i++]);
    if (layout.two_d) out.filter.nu_tau2 = s.nu_tau.map(u[i++]);
  }
  return out;
}

}  // namespace

Objective parse_objective(const std::string& name) {
  if (name == "fidelity") return Objective::fidelity;
  if (name == "rate") return Objective::rate;
  if (name == "key_rate") return Objective::key_rate;
  throw std::invalid_argument("unknown objective '" + name + "' (fidelity, rate, key_rate)");
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::fidelity: return "fidelity";
    case Objective::rate: return "rate";
    case Objective::key_rate: return "key_rate";
  }
  return "?";
}

void Bounds::validate() const {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw std::invalid_argument("bounds must be finite with lo < hi");
  if (log && !(lo > 0.0)) throw std::invalid_argument("logarithmic bounds need lo > 0");
}

double Bounds::map(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  if (log) return std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
  return lo + u * (hi - lo);
}

double Bounds::unmap(double x) const {
  if (log) return (std::log(x) - std::log(lo)) / (std::log(hi) - std::log(lo));
  return (x - lo) / (hi - lo);
}

LocalOptimum nelder_mead_max(const std::function<double(const Point&)>& f, Point u0, const NelderMeadSettings& s) {
  const std::size_t d = u0.size();
  clamp_unit(u0);
  std::vector<Point> x{u0};
  for (std::size_t i = 0; i < d; ++i) {
    Point v = u0;
    v[i] += (v[i] + s.initial_step <= 1.0) ? s.initial_step : -s.initial_step;
    x.push_back(v);
  }
  int evals = 0;
  auto eval = [&](const Point& p) {
    ++evals;
    return f(p);
  };
  std::vector<double> fx;
  for (const auto& p : x) fx.push_back(eval(p));

  std::vector<std::size_t> order(d + 1);
  auto sort = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] > fx[b]; });
    std::vector<Point> xs;
    std::vector<double> fs;
    for (auto k : order) {
      xs.push_back(x[k]);
      fs.push_back(fx[k]);
    }
    x = std::move(xs);
    fx = std::move(fs);
  };

  while (true) {
    sort();
    const double spread = fx[0] - fx[d];
    const bool flat = fx[0] == fx[d] || (std::isfinite(spread) && spread <= s.f_tol * std::abs(fx[0]));
    if (evals >= s.max_evals || diameter(x) < s.x_tol || flat) break;

    Point c(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) c[k] += x[i][k] / static_cast<double>(d);

    const Point xr = affine(c, x[d], -1.0);
    const double fr = eval(xr);
    if (fr > fx[0]) {
      const Point xe = affine(c, x[d], -2.0);
      const double fe = eval(xe);
      if (fe > fr) {
        x[d] = xe;
        fx[d] = fe;
      } else {
        x[d] = xr;
        fx[d] = fr;
      }
      continue;
    }
    if (fr > fx[d - 1]) {
      x[d] = xr;
      fx[d] = fr;
      continue;
    }
    const bool outside = fr > fx[d];
    const Point xc = outside ? affine(c, xr, 0.5) : affine(c, x[d], 0.5);
    const double fc = eval(xc);
    if (outside ? fc >= fr : fc > fx[d]) {
      x[d] = xc;
      fx[d] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= d; ++i) {
      x[i] = affine(x[0], x[i], 0.5);
      fx[i] = eval(x[i]);
    }
  }
  return {x[0], fx[0], evals};
}

std::vector<double> halton(std::size_t index, std::size_t dim) {
  std::vector<double> u(dim);
  for (std::size_t k = 0; k < dim; ++k) u[k] = radical_inverse(index, nth_prime(k));
  return u;
}

LocalOptimum maximize_box(const std::function<double(const Point&)>& f, std::size_t dim, int starts_per_dim,
                          const NelderMeadSettings& settings) {
  if (starts_per_dim < 1) throw std::invalid_argument("need at least one start per dimension");
  LocalOptimum best{{}, kInfeasible, 0};
  int evals = 0;
  const std::size_t starts = static_cast<std::size_t>(starts_per_dim) * std::max<std::size_t>(dim, 1);
  for (std::size_t k = 1; k <= starts; ++k) {
    LocalOptimum local = nelder_mead_max(f, halton(k, dim), settings);
    evals += local.evals;
    if (best.u.empty() || local.value > best.value) best = std::move(local);
  }
  best.evals = evals;
  return best;
}

void OptimizeSettings::validate() const {
  if (levels.empty()) throw std::invalid_argument("optimizer needs at least one nesting depth");
  for (int n : levels) {
    if (n < 0) throw std::invalid_argument("nesting depths must be >= 0");
  }
  eps.validate();
  if (!(eps.lo > 0.0 && eps.hi < 1.0)) throw std::invalid_argument("squeezing bounds must lie in (0, 1)");
  nu_tau.validate();
  if (!(nu_tau.lo > 0.0)) throw std::invalid_argument("filter bounds must be > 0");
  if (starts_per_dim < 1) throw std::invalid_argument("need at least one start per dimension");
  if (nm.max_evals < 1) throw std::invalid_argument("optimizer budget must be >= 1");
  if (total_L_km && !(*total_L_km > 0.0)) throw std::invalid_argument("total distance must be > 0");
}

Evaluation evaluate(const ProtocolConfig& cfg, Objective objective) {
  Evaluation e;
  e.chain = run_protocol(cfg);
  const LevelRecord& last = e.chain.back();
  e.fidelity = last.fidelity;
  e.T = last.result.T;
  try {
    if (cfg.geometry == Geometry::one_d) {
      const TwoLinkState two = two_link_state(last.result.rho, e.T);
      e.key_rate = key_rate(two.rho, two.T_pair, LogicalEncoding::two_link_1d(), cfg.hw.v).K;
    } else {
      e.key_rate = key_rate(last.result.rho, e.T, LogicalEncoding::ghz_2d(), cfg.hw.v).K;
    }
  } catch (const DegenerateEncoding&) {
    e.key_rate = 0.0;
  }
  switch (objective) {
    case Objective::fidelity: e.value = e.fidelity; break;
    case Objective::rate: e.value = 1.0 / e.T; break;
    case Objective::key_rate: e.value = e.key_rate; break;
  }
  return e;
}

PointOptimum optimize_point(const ProtocolConfig& base, const OptimizeSettings& s) {
  s.validate();
  PointOptimum out;
  double best = kInfeasible;
  const bool two_d = base.geometry == Geometry::two_d;
  for (int n : s.levels) {
    ProtocolConfig cfg = base;
    cfg.levels = n;
    if (s.total_L_km) cfg.hw.L0_km = std::ldexp(*s.total_L_km, -n);
    std::vector<Layout> layouts{{two_d, false}};
    if (s.filter && n > 0) layouts.push_back({two_d, true});
    for (const Layout& layout : layouts) {
      int failures = 0;
      std::string first_error;
      auto f = [&](const Point& u) {
        try {
          const double v = evaluate(build(cfg, layout, s, u), s.objective).value;
          return std::isfinite(v) ? v : kInfeasible;
        } catch (const std::exception& ex) {
          if (failures++ == 0) first_error = ex.what();
          return kInfeasible;
        }
      };
      const LocalOptimum opt = maximize_box(f, layout.dim(), s.starts_per_dim, s.nm);
      out.evaluations += opt.evals;
      const std::string tag = "N=" + std::to_string(n) + (layout.filtered ? " filtered" : " unfiltered");
      if (failures > 0) {
        out.log.push_back(tag + ": " + std::to_string(failures) + " evaluations skipped (" + first_error + ")");
      }
      if (!(opt.value > kInfeasible)) {
        out.log.push_back(tag + ": no feasible point");
        continue;
      }
      if (opt.value > best) {
        best = opt.value;
        out.config = build(cfg, layout, s, opt.u);
        out.found = true;
      }
    }
  }
  // Re-evaluate at the reported parameters.
  if (out.found) out.eval = evaluate(out.config, s.objective);
  return out;
}

void SweepSpec::validate() const {
  if (L_km.empty() || T_coh_s.empty()) throw std::invalid_argument("sweep grids must be non-empty");
  for (double l : L_km) {
    if (!(l > 0.0)) throw std::invalid_argument("sweep distances must be > 0");
  }
  for (double t : T_coh_s) {
    if (!(t > 0.0)) throw std::invalid_argument("sweep coherence times must be > 0");
  }
  settings.validate();
}

std::vector<SweepRow> sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (double l : spec.L_km)
    for (double t : spec.T_coh_s) rows.push_back({l, t, {}});

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= rows.size()) return;
      try {
        ProtocolConfig cfg = spec.base;
        cfg.hw.T_coh_s = rows[i].T_coh_s;
        OptimizeSettings s = spec.settings;
        s.total_L_km = rows[i].L_km;
        rows[i].optimum = optimize_point(cfg, s);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(rows.size());
        return;
      }
    }
  };
  const int threads = std::max(1, spec.threads > 0 ? spec.threads : default_threads());
  std::vector<std::thread> pool;
  for (int k = 1; k < threads && static_cast<std::size_t>(k) < rows.size(); ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::vector<FrontierPoint> rate_fidelity_frontier(const ProtocolConfig& base, const std::vector<double>& eps,
                                                  const std::vector<double>& nu_tau) {
  std::vector<FrontierPoint> all;
  for (double e : eps) {
    for (double nt : nu_tau) {
      ProtocolConfig cfg = base;
      if (cfg.geometry == Geometry::one_d) {
        cfg.eps = e;
      } else {
        cfg.eps_a = cfg.eps_b = e;
      }
      cfg.filter = FilterSchedule{};
      if (std::isfinite(nt)) {
        cfg.filter.kind = FilterSchedule::Kind::relative;
        cfg.filter.nu_tau = nt;
        cfg.filter.nu_tau2 = nt;
      }
      try {
        const LevelRecord r = run_protocol(cfg).back();
        all.push_back({e, nt, r.fidelity, r.result.T});
      } catch (const NumericFailure&) {
      } catch (const DegenerateProtocol&) {
      }
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.T < b.T || (a.T == b.T && a.fidelity > b.fidelity);
  });
  std::vector<FrontierPoint> front;
  for (const auto& p : all) {
    if (front.empty() || p.fidelity > front.back().fidelity) front.push_back(p);
  }
  return front;
}

}  // namespace repsim
