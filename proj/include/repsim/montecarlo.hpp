#pragma once

// Trajectory-level Monte Carlo of the nested protocol. Elementary segments
// are attempted every dt with success probability q; every level waits for
// its children, applies memory decay for the exact waiting time, filters
// states older than the cut-off and attempts the merge.
//
// Random numbers: std::mt19937_64 per trajectory, seeded with
// SplitMix64(seed, trajectory index); results are reduced in index order so
// estimates do not depend on the thread count.

#include <cstdint>
#include <string>
#include <vector>

#include "repsim/protocol.hpp"

namespace repsim {

struct McSettings {
  std::size_t n_traj = 4151;
  std::uint64_t seed = 1;
  double max_time_s = 1e7;  // simulated-time guard per trajectory
  int threads = 0;          // 0: REPSIM_THREADS or hardware concurrency
  bool keep_times = false;  // store every completion time in the estimate
};

struct LevelLog {
  long attempts = 0;        // elementary attempts (level 0) or merge attempts
  long filtrations = 0;
  long merge_failures = 0;  // 2D: both stages
};

// One step of the top-level clock.
struct Interval {
  enum class Kind { generate, wait, merge, filter_pause } kind;
  double dt;
};

struct TrajectoryOutcome {
  DensityState rho;  // normalized, output labels
  double time;       // completion time (s)
  std::vector<LevelLog> log;        // index = level
  std::vector<Interval> intervals;  // top-level timeline; sums to `time`
};

struct McEstimate {
  DensityState rho;  // mean state
  double T;          // mean completion time
  double T_stderr;
  double fidelity;   // fidelity of the mean state
  double fidelity_stderr;
  double rate;       // 1 / T
  double rate_stderr;
  std::size_t n_traj;
  std::uint64_t seed;
  std::vector<LevelLog> log;  // summed over trajectories
  std::vector<double> times;  // only with keep_times
};

// Absolute cut-off per level as used by the simulator (relative schedules
// are resolved with the engine's level rates).
struct McSchedule {
  std::vector<double> tau;   // index = level, entry 0 unused
  std::vector<double> tau2;
};
McSchedule resolve_schedule(const ProtocolModel& model);

std::uint64_t trajectory_seed(std::uint64_t seed, std::uint64_t index);

TrajectoryOutcome simulate_trajectory(const ProtocolModel& model, std::uint64_t seed,
                                      double max_time_s = 1e7);
TrajectoryOutcome simulate_trajectory(const ProtocolModel& model, const McSchedule& schedule, std::uint64_t seed,
                                      double max_time_s = 1e7);

McEstimate estimate(const ProtocolModel& model, const McSettings& settings);

// Worker count from REPSIM_THREADS, else hardware concurrency (at least 1).
int default_threads();

}  // namespace repsim
