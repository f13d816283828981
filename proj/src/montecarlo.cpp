#include "repsim/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

#include "repsim/errors.hpp"

namespace repsim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Merge maps and labels per level; the LevelSpec segment states are placeholders.
struct Plan {
  McSchedule schedule;
  std::vector<LevelSpec1D> specs_1d;
  std::vector<LevelSpec2D> specs_2d;
};

Plan make_plan(const ProtocolModel& model, McSchedule schedule) {
  Plan plan{std::move(schedule), {}, {}};
  const ProtocolConfig& cfg = model.config();
  for (int n = 1; n <= cfg.levels; ++n) {
    if (cfg.geometry == Geometry::one_d) {
      plan.specs_1d.push_back(model.spec_1d(n, model.segment().rho_e, 1.0));
    } else {
      plan.specs_2d.push_back(model.spec_2d(n, model.segment().rho_e, 1.0));
    }
  }
  return plan;
}

struct Sample {
  DensityState rho;  // state at `ready`
  double ready;
};

class Trajectory {
 public:
  Trajectory(const ProtocolModel& model, const Plan& plan, std::uint64_t seed, double max_time)
      : model_(model), cfg_(model.config()), sched_(plan.schedule), specs_1d_(plan.specs_1d),
        specs_2d_(plan.specs_2d), rng_(seed), max_time_(max_time), log_(cfg_.levels + 1) {
    base_labels_ = model.segment().rho_e.space().labels();
  }

  TrajectoryOutcome run() {
    Sample s = generate(cfg_.levels, 0.0, true);
    if (cfg_.levels == 0) intervals_.push_back({Interval::Kind::generate, s.ready});
    double t = 0.0;
    for (const auto& iv : intervals_) t += iv.dt;
    return {s.rho.normalized(), t, std::move(log_), std::move(intervals_)};
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  void guard(double t) const {
    if (t > max_time_) throw McTimeout("trajectory exceeded the simulated-time limit of " + std::to_string(max_time_) + " s");
  }

  // Advance the top-level clock to `to`; events already in the past (a
  // stale child filtered during a merge) leave it unchanged.
  void mark(bool top, Interval::Kind kind, double& clock, double to) {
    if (!top || to <= clock) return;
    intervals_.push_back({kind, to - clock});
    clock += to - clock;
  }

  DensityState decay(const DensityState& rho, double dt) {
    if (dt <= 0.0) return rho;
    auto it = channels_.find(dt);
    if (it == channels_.end()) {
      if (channels_.size() > 4096) channels_.clear();
      it = channels_.emplace(dt, channel_exp(model_.decay(), dt)).first;
    }
    DensityState out = rho;
    for (const auto& m : rho.space().modes()) {
      if (m.kind == ModeKind::memory) out = apply(it->second.relabeled({m.label}), out);
    }
    return out;
  }

  Sample elementary(double start) {
    const SegmentResult& seg = model_.segment();
    long k = 1;
    if (seg.q < 1.0) {
      // Inversion of the geometric law on {1, 2, ...}.
      const double u = 1.0 - uniform();
      k = 1 + static_cast<long>(std::floor(std::log(u) / std::log1p(-seg.q)));
    }
    log_[0].attempts += k;
    const double ready = start + static_cast<double>(k) * seg.dt;
    guard(ready);
    return {seg.rho_e, ready};
  }

  Sample generate(int level, double start, bool top = false) {
    if (level == 0) return elementary(start);
    return cfg_.geometry == Geometry::one_d ? level_1d(level, start, top) : level_2d(level, start, top);
  }

  Sample level_1d(int level, double start, bool top) {
    const LevelSpec1D& spec = specs_1d_[level - 1];
    const double tau = sched_.tau[level];
    const double t_m = spec.t_m();
    double clock = start;
    Sample c[2] = {generate(level - 1, start), generate(level - 1, start)};
    while (true) {
      const int a = c[0].ready <= c[1].ready ? 0 : 1;
      const int b = 1 - a;
      if (c[b].ready - c[a].ready > tau) {
        const double t_f = c[a].ready + tau;
        ++log_[level].filtrations;
        mark(top, Interval::Kind::generate, clock, t_f);
        mark(top, Interval::Kind::filter_pause, clock, t_f + spec.t_c);
        c[a] = generate(level - 1, t_f + spec.t_c);
        continue;
      }
      const double t2 = c[b].ready;
      mark(top, Interval::Kind::generate, clock, t2);
      const DensityState x = decay(c[a].rho, t2 - c[a].ready).relabeled(numbered(a + 1));
      const DensityState y = c[b].rho.relabeled(numbered(b + 1));
      const DensityState merged = a == 0 ? apply(spec.merge, {&x, &y}) : apply(spec.merge, {&y, &x});
      const double p = merged.trace();
      ++log_[level].attempts;
      const double done = t2 + t_m;
      guard(done);
      mark(top, Interval::Kind::merge, clock, done);
      if (uniform() < p) {
        DensityState out = decay(merged, t_m).scaled(1.0 / p).relabeled(base_labels_);
        return {std::move(out), done};
      }
      ++log_[level].merge_failures;
      c[0] = generate(level - 1, done);
      c[1] = generate(level - 1, done);
    }
  }

  Sample level_2d(int level, double start, bool top) {
    const LevelSpec2D& spec = specs_2d_[level - 1];
    const double tau1 = sched_.tau[level];
    const double tau2 = sched_.tau2[level];
    const double t_m = spec.t_m();
    constexpr int pairs[3][2] = {{1, 2}, {0, 2}, {0, 1}};
    double clock = start;
    std::vector<Sample> c;
    for (int i = 0; i < 3; ++i) c.push_back(generate(level - 1, start));

    while (true) {
      // Stage 1: the two earliest children.
      int order[3] = {0, 1, 2};
      std::sort(order, order + 3, [&](int x, int y) { return c[x].ready < c[y].ready || (c[x].ready == c[y].ready && x < y); });
      const int a = order[0], b = order[1], k = order[2];
      if (c[b].ready - c[a].ready > tau1) {
        const double t_f = c[a].ready + tau1;
        ++log_[level].filtrations;
        mark(top, Interval::Kind::generate, clock, t_f);
        mark(top, Interval::Kind::filter_pause, clock, t_f + spec.t_c);
        c[a] = generate(level - 1, t_f + spec.t_c);
        continue;
      }
      const double t2 = c[b].ready;
      mark(top, Interval::Kind::generate, clock, t2);
      const int i = pairs[k][0], j = pairs[k][1];
      const DensityState xi = (i == a ? decay(c[i].rho, t2 - c[i].ready) : c[i].rho).relabeled(labels_2d(i));
      const DensityState xj = (j == a ? decay(c[j].rho, t2 - c[j].ready) : c[j].rho).relabeled(labels_2d(j));
      const DensityState m1 = apply(spec.first_merge[k], {&xi, &xj});
      const double p1 = m1.trace();
      ++log_[level].attempts;
      const double done1 = t2 + t_m;
      guard(done1);
      mark(top, Interval::Kind::merge, clock, done1);
      if (!(uniform() < p1)) {
        ++log_[level].merge_failures;
        c[i] = generate(level - 1, done1);
        c[j] = generate(level - 1, done1);
        continue;
      }
      const DensityState pair = decay(m1, t_m).scaled(1.0 / p1);

      // Stage 2: child k joins the merged pair.
      const double rk = c[k].ready;
      if (rk - done1 > tau2) {
        const double t_f = done1 + tau2;
        ++log_[level].filtrations;
        mark(top, Interval::Kind::wait, clock, t_f);
        mark(top, Interval::Kind::filter_pause, clock, t_f + spec.t_c);
        c[i] = generate(level - 1, t_f + spec.t_c);
        c[j] = generate(level - 1, t_f + spec.t_c);
        continue;
      }
      const double t3 = std::max(rk, done1);
      mark(top, Interval::Kind::wait, clock, t3);
      const DensityState waited_pair = decay(pair, t3 - done1);
      const DensityState xk = decay(c[k].rho, t3 - rk).relabeled(labels_2d(k));
      DensityState m2 = apply(spec.second_merge[k], {&waited_pair, &xk});
      const double p2 = m2.trace();
      ++log_[level].attempts;
      const double done2 = t3 + t_m;
      guard(done2);
      mark(top, Interval::Kind::merge, clock, done2);
      if (uniform() < p2) {
        m2 = decay(permute(m2, spec.output_order), t_m).scaled(1.0 / p2).relabeled(base_labels_);
        return {std::move(m2), done2};
      }
      ++log_[level].merge_failures;
      for (int n = 0; n < 3; ++n) c[n] = generate(level - 1, done2);
    }
  }

  std::vector<std::string> numbered(int n) const {
    std::vector<std::string> out;
    for (const auto& l : base_labels_) out.push_back(l + std::to_string(n));
    return out;
  }

  static std::vector<std::string> labels_2d(int k) {
    const auto l = segment_labels_2d(k);
    return {l.begin(), l.end()};
  }

  const ProtocolModel& model_;
  const ProtocolConfig& cfg_;
  const McSchedule& sched_;
  const std::vector<LevelSpec1D>& specs_1d_;
  const std::vector<LevelSpec2D>& specs_2d_;
  std::mt19937_64 rng_;
  double max_time_;
  std::vector<LevelLog> log_;
  std::vector<Interval> intervals_;
  std::vector<std::string> base_labels_;
  std::map<double, SuperOp> channels_;
};

}  // namespace

int default_threads() {
  if (const char* env = std::getenv("REPSIM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ index);
}

McSchedule resolve_schedule(const ProtocolModel& model) {
  const ProtocolConfig& cfg = model.config();
  McSchedule s;
  s.tau.assign(cfg.levels + 1, kNoFilter);
  s.tau2.assign(cfg.levels + 1, kNoFilter);
  if (cfg.filter.kind == FilterSchedule::Kind::none) return s;
  if (cfg.filter.kind == FilterSchedule::Kind::absolute) {
    for (int n = 1; n <= cfg.levels; ++n) {
      s.tau[n] = cfg.filter.tau(n, 1.0);
      s.tau2[n] = cfg.filter.tau2(n, 1.0);
    }
    return s;
  }
  const auto records = run_protocol(model);
  for (int n = 1; n <= cfg.levels; ++n) {
    s.tau[n] = records[n].tau;
    s.tau2[n] = records[n].tau2;
  }
  return s;
}

TrajectoryOutcome simulate_trajectory(const ProtocolModel& model, const McSchedule& schedule, std::uint64_t seed,
                                      double max_time_s) {
  const Plan plan = make_plan(model, schedule);
  return Trajectory(model, plan, seed, max_time_s).run();
}

TrajectoryOutcome simulate_trajectory(const ProtocolModel& model, std::uint64_t seed, double max_time_s) {
  return simulate_trajectory(model, resolve_schedule(model), seed, max_time_s);
}

McEstimate estimate(const ProtocolModel& model, const McSettings& settings) {
  if (settings.n_traj < 2) throw std::invalid_argument("Monte Carlo needs at least two trajectories");
  const Plan plan = make_plan(model, resolve_schedule(model));
  const std::size_t n = settings.n_traj;
  std::vector<std::optional<TrajectoryOutcome>> out(n);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = Trajectory(model, plan, trajectory_seed(settings.seed, i), settings.max_time_s).run();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const int threads = std::max(1, settings.threads > 0 ? settings.threads : default_threads());
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  // Index-ordered reduction.
  const ModeSpace space = out[0]->rho.space();
  const CVector target = model.target(space);
  CMatrix sum = CMatrix::Zero(space.dim(), space.dim());
  double t_sum = 0.0, t_sq = 0.0, f_sum = 0.0, f_sq = 0.0;
  McEstimate est;
  est.log.assign(model.config().levels + 1, LevelLog{});
  for (std::size_t i = 0; i < n; ++i) {
    const TrajectoryOutcome& o = *out[i];
    sum += o.rho.matrix();
    t_sum += o.time;
    t_sq += o.time * o.time;
    const double f = fidelity(o.rho, target);
    f_sum += f;
    f_sq += f * f;
    for (std::size_t l = 0; l < o.log.size(); ++l) {
      est.log[l].attempts += o.log[l].attempts;
      est.log[l].filtrations += o.log[l].filtrations;
      est.log[l].merge_failures += o.log[l].merge_failures;
    }
    if (settings.keep_times) est.times.push_back(o.time);
  }
  const double dn = static_cast<double>(n);
  est.rho = DensityState(space, sum / dn);
  est.T = t_sum / dn;
  est.T_stderr = std::sqrt(std::max(0.0, (t_sq - dn * est.T * est.T) / (dn - 1.0)) / dn);
  const double f_mean = f_sum / dn;
  est.fidelity = fidelity(est.rho, target);
  est.fidelity_stderr = std::sqrt(std::max(0.0, (f_sq - dn * f_mean * f_mean) / (dn - 1.0)) / dn);
  est.rate = 1.0 / est.T;
  est.rate_stderr = est.T_stderr / (est.T * est.T);
  est.n_traj = n;
  est.seed = settings.seed;
  return est;
}

}  // namespace repsim
