#pragma once

// Nested repeater protocol: elementary segments feed level 1, whose output
// (treated as a Poisson source with rate 1/T) feeds level 2, and so on.

#include <string>
#include <vector>

#include "repsim/elementary.hpp"
#include "repsim/engine.hpp"

namespace repsim {

enum class Geometry { one_d, two_d };

// Cut-off times per level (level index starts at 1). Absolute values are
// seconds; relative values are nu*tau with nu the input rate of the level.
struct FilterSchedule {
  enum class Kind { none, absolute, relative };
  Kind kind = Kind::none;
  std::vector<double> tau_s;   // one per level, or a single value for all
  std::vector<double> tau2_s;  // 2D second stage; empty: no second-stage filter
  double nu_tau = kNoFilter;
  double nu_tau2 = kNoFilter;

  double tau(int level, double nu) const;
  double tau2(int level, double nu) const;
  void validate() const;
};

// Classical communication time at level n: 2^n L0 v_c (doubling) or zero.
enum class TcRule { doubling, none };

struct ProtocolConfig {
  Geometry geometry = Geometry::one_d;
  int levels = 1;  // nesting depth N
  HardwareParams hw;
  double eps = 0.1;    // 1D squeezing
  double eps_a = 0.1;  // 2D squeezing, A arm
  double eps_b = 0.1;  // 2D squeezing, B arm
  TcRule tc_rule = TcRule::doubling;
  FilterSchedule filter;

  void validate() const;  // std::invalid_argument
};

// Pieces shared by every level of one configuration.
class ProtocolModel {
 public:
  explicit ProtocolModel(ProtocolConfig cfg);
  // 1D model with a given elementary segment (modes (A, B)) and merge map on
  // (B1, A2); used for validation with synthetic segments.
  ProtocolModel(ProtocolConfig cfg, SegmentResult segment, SuperOp merge_1d);

  const ProtocolConfig& config() const { return cfg_; }
  const SegmentResult& segment() const { return segment_; }
  double nu0() const { return segment_.rate(); }
  const SuperOp& decay() const { return decay_; }  // single-mode "m"
  double t_c(int level) const;

  // Specs for level `level` >= 1 with input segment state rho (modes (A, B)
  // or (A, C, B)) produced at rate nu.
  LevelSpec1D spec_1d(int level, const DensityState& rho, double nu) const;
  LevelSpec2D spec_2d(int level, const DensityState& rho, double nu) const;

  // Decay generator on every memory of `space`.
  LocalGenerator decay_on(const ModeSpace& space) const;

  CVector target(const ModeSpace& space) const;

 private:
  ProtocolConfig cfg_;
  SegmentResult segment_;
  SuperOp decay_;
  SuperOp merge_1d_;
  Merges2D merges_2d_;
};

struct LevelRecord {
  int level;
  LevelResult result;
  double fidelity;
  double nu_in;  // input segment rate (0 at level 0)
  double t_c;
  double tau;
  double tau2;
};

std::vector<LevelRecord> run_protocol(const ProtocolModel& model);
std::vector<LevelRecord> run_protocol(const ProtocolConfig& cfg);

// Level operation used by run_protocol.
LevelResult evaluate_level(const ProtocolModel& model, int level, const DensityState& rho, double nu);

}  // namespace repsim
