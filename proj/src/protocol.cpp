#include "repsim/protocol.hpp"

#include <cmath>
#include <stdexcept>

namespace repsim {

namespace {

double pick(const std::vector<double>& v, int level) {
  if (v.empty()) return kNoFilter;
  if (v.size() == 1) return v[0];
  if (level < 1 || static_cast<std::size_t>(level) > v.size()) {
    throw std::invalid_argument("filter schedule has no entry for level " + std::to_string(level));
  }
  return v[level - 1];
}

std::vector<std::string> numbered(const std::vector<std::string>& labels, int n) {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l + std::to_string(n));
  return out;
}

// Modes that survive `op` when applied to a state on `joint`.
ModeSpace surviving(const SuperOp& op, const ModeSpace& joint) {
  std::vector<std::string> consumed;
  for (const auto& m : op.in_space().modes()) {
    if (!op.out_space().contains(m.label)) consumed.push_back(m.label);
  }
  return joint.without(consumed);
}

}  // namespace

double FilterSchedule::tau(int level, double nu) const {
  switch (kind) {
    case Kind::none: return kNoFilter;
    case Kind::absolute: return pick(tau_s, level);
    case Kind::relative: return nu_tau / nu;
  }
  return kNoFilter;
}

double FilterSchedule::tau2(int level, double nu) const {
  switch (kind) {
    case Kind::none: return kNoFilter;
    case Kind::absolute: return pick(tau2_s, level);
    case Kind::relative: return nu_tau2 / nu;
  }
  return kNoFilter;
}

void FilterSchedule::validate() const {
  for (double t : tau_s) {
    if (!(t > 0.0)) throw std::invalid_argument("filter times must be > 0");
  }
  for (double t : tau2_s) {
    if (!(t > 0.0)) throw std::invalid_argument("filter times must be > 0");
  }
  if (!(nu_tau > 0.0) || !(nu_tau2 > 0.0)) throw std::invalid_argument("relative filter times must be > 0");
  if (kind == Kind::absolute && tau_s.empty() && tau2_s.empty()) {
    throw std::invalid_argument("absolute filter schedule needs at least one time");
  }
}

void ProtocolConfig::validate() const {
  if (levels < 0) throw std::invalid_argument("nesting depth must be >= 0");
  hw.validate();
  for (double e : {eps, eps_a, eps_b}) {
    if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("squeezing amplitude must lie in (0, 1)");
  }
  filter.validate();
}

ProtocolModel::ProtocolModel(ProtocolConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.geometry == Geometry::one_d) {
    segment_ = build_segment_1d(cfg_.hw, cfg_.eps);
    merge_1d_ = merge_superop_1d(cfg_.hw, "B1", "A2");
  } else {
    segment_ = build_segment_2d(cfg_.hw, cfg_.eps_a, cfg_.eps_b);
    merges_2d_ = merge_superops_2d(cfg_.hw);
  }
  decay_ = memory_decay_generator(cfg_.hw);
}

ProtocolModel::ProtocolModel(ProtocolConfig cfg, SegmentResult segment, SuperOp merge_1d)
    : cfg_(std::move(cfg)), segment_(std::move(segment)), merge_1d_(std::move(merge_1d)) {
  cfg_.validate();
  if (cfg_.geometry != Geometry::one_d) throw std::invalid_argument("synthetic segments are supported in 1D only");
  if (!(segment_.q > 0.0 && segment_.q <= 1.0)) throw std::invalid_argument("segment success probability must lie in (0, 1]");
  if (!(segment_.dt > 0.0)) throw std::invalid_argument("segment attempt duration must be > 0");
  decay_ = memory_decay_generator(cfg_.hw);
}

double ProtocolModel::t_c(int level) const {
  if (cfg_.tc_rule == TcRule::none) return 0.0;
  return std::ldexp(cfg_.hw.L0_km * cfg_.hw.v_c_s_per_km, level);
}

LocalGenerator ProtocolModel::decay_on(const ModeSpace& space) const {
  return LocalGenerator::uniform(space, decay_, ModeKind::memory);
}

CVector ProtocolModel::target(const ModeSpace& space) const {
  return cfg_.geometry == Geometry::one_d ? bell_target(space) : ghz_target(space);
}

LevelSpec1D ProtocolModel::spec_1d(int level, const DensityState& rho, double nu) const {
  LevelSpec1D spec;
  const std::vector<std::string> base = rho.space().labels();
  for (int i = 0; i < 2; ++i) {
    spec.segments[i] = rho.relabeled(numbered(base, i + 1));
    spec.segment_decay[i] = decay_on(spec.segments[i].space());
  }
  spec.merge = merge_1d_;
  const ModeSpace joint = spec.segments[0].space().concat(spec.segments[1].space());
  spec.merged_decay = decay_on(surviving(spec.merge, joint));
  spec.output_labels = base;
  spec.nu = nu;
  spec.t_c = t_c(level);
  spec.t_swap = cfg_.hw.t_swap;
  spec.tau = cfg_.filter.tau(level, nu);
  return spec;
}

LevelSpec2D ProtocolModel::spec_2d(int level, const DensityState& rho, double nu) const {
  LevelSpec2D spec;
  for (int k = 0; k < 3; ++k) {
    const auto labels = segment_labels_2d(k);
    spec.segments[k] = rho.relabeled({labels.begin(), labels.end()});
    spec.segment_decay[k] = decay_on(spec.segments[k].space());
  }
  constexpr int pairs[3][2] = {{1, 2}, {0, 2}, {0, 1}};
  for (int k = 0; k < 3; ++k) {
    spec.first_merge[k] = merges_2d_.first[k];
    spec.second_merge[k] = merges_2d_.second[k];
    const ModeSpace joint = spec.segments[pairs[k][0]].space().concat(spec.segments[pairs[k][1]].space());
    spec.pair_decay[k] = decay_on(surviving(spec.first_merge[k], joint));
  }
  const auto& out = output_labels_2d();
  spec.output_order = {out.begin(), out.end()};
  std::vector<Mode> out_modes;
  for (const auto& l : spec.output_order) out_modes.push_back({l, ModeKind::memory});
  spec.merged_decay = decay_on(ModeSpace(cfg_.hw.n_max, out_modes));
  spec.output_labels = rho.space().labels();
  spec.nu = nu;
  spec.t_c = t_c(level);
  spec.t_swap = cfg_.hw.t_swap;
  spec.tau1 = cfg_.filter.tau(level, nu);
  spec.tau2 = cfg_.filter.tau2(level, nu);
  return spec;
}

LevelResult evaluate_level(const ProtocolModel& model, int level, const DensityState& rho, double nu) {
  if (model.config().geometry == Geometry::one_d) return level_1d_filter(model.spec_1d(level, rho, nu));
  return level_2d_full(model.spec_2d(level, rho, nu));
}

std::vector<LevelRecord> run_protocol(const ProtocolModel& model) {
  const SegmentResult& seg = model.segment();
  std::vector<LevelRecord> out;
  LevelResult base{seg.rho_e, seg.dt / seg.q, seg.q, 1.0, {}};
  base.diagnostics["q"] = seg.q;
  base.diagnostics["dt"] = seg.dt;
  out.push_back({0, base, fidelity(seg.rho_e, model.target(seg.rho_e.space())), 0.0, 0.0, kNoFilter, kNoFilter});

  DensityState rho = seg.rho_e;
  double nu = model.nu0();
  const bool two_d = model.config().geometry == Geometry::two_d;
  for (int n = 1; n <= model.config().levels; ++n) {
    LevelResult r = evaluate_level(model, n, rho, nu);
    const double f = fidelity(r.rho, model.target(r.rho.space()));
    const double tau = model.config().filter.tau(n, nu);
    const double tau2 = two_d ? model.config().filter.tau2(n, nu) : kNoFilter;
    out.push_back({n, r, f, nu, model.t_c(n), tau, tau2});
    rho = r.rho;
    nu = 1.0 / r.T;
  }
  return out;
}

std::vector<LevelRecord> run_protocol(const ProtocolConfig& cfg) { return run_protocol(ProtocolModel(cfg)); }

}  // namespace repsim
