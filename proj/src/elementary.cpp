#include "repsim/elementary.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace repsim {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// S_det = S_dc(d) S_loss(-ln(1 - f)) on one mode.
SuperOp detector(const ModeSpace& sp, const std::string& label, double f, double d) {
  return compose(dark_count_channel(sp, label, d), loss_channel(sp, label, -std::log1p(-f)));
}

}  // namespace

void HardwareParams::validate() const {
  require(std::isfinite(L0_km) && L0_km >= 0.0, "L0_km must be >= 0");
  require(std::isfinite(L_att_km) && L_att_km > 0.0, "L_att_km must be > 0");
  require(f >= 0.0 && f < 1.0, "f must lie in [0, 1)");
  require(std::isfinite(d) && d >= 0.0, "d must be >= 0");
  require(v >= 0.0 && v < 1.0, "v must lie in [0, 1)");
  require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
  require(T_coh_s > 0.0, "T_coh must be > 0");
  require(std::isfinite(t_s) && t_s >= 0.0, "t_s must be >= 0");
  require(std::isfinite(t_swap) && t_swap >= 0.0, "t_swap must be >= 0");
  require(std::isfinite(v_c_s_per_km) && v_c_s_per_km >= 0.0, "v_c must be >= 0");
  require(n_max >= 1, "n_max must be >= 1");
}

DensityState two_mode_squeezed(double eps, int n_max, const std::string& memory, const std::string& photon) {
  require(eps >= 0.0 && eps < 1.0, "squeezing amplitude must lie in [0, 1)");
  const ModeSpace sp(n_max, {{memory, ModeKind::memory}, {photon, ModeKind::photonic}});
  CVector psi = CVector::Zero(sp.dim());
  double amp = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    psi[basis_index(sp, {n, n})] = amp;
    amp *= eps;
  }
  psi /= psi.norm();
  return DensityState::from_pure(sp, psi);
}

SuperOp swap_station(double f, double d, int n_max, const std::string& i, const std::string& j) {
  require(f >= 0.0 && f < 1.0, "f must lie in [0, 1)");
  require(d >= 0.0, "d must be >= 0");
  const ModeSpace pair = photonic_space(n_max, {i, j});
  const SuperOp det = tensor(detector(pair.subspace({i}), i, f, d), detector(pair.subspace({j}), j, f, d));
  const SuperOp pre = compose(det, beamsplitter(pair, i, j));
  return compose(projection_effect(pair, {1, 0}, 2.0), pre);
}

SuperOp memory_decay_generator(const HardwareParams& p) {
  const ModeSpace one = memory_space(p.n_max, {"m"});
  return dissipator(one, annihilation(p.n_max)).scaled(1.0 / p.T_coh_s);
}

SegmentResult build_segment_1d(const HardwareParams& p, double eps) {
  p.validate();
  const double dt = p.v_c_s_per_km * p.L0_km + p.t_s;
  DensityState arm_a = two_mode_squeezed(eps, p.n_max, "A", "a");
  DensityState arm_b = two_mode_squeezed(eps, p.n_max, "B", "b");
  const double fiber = p.L0_km / (2.0 * p.L_att_km);
  const double mem = dt / p.T_coh_s;
  arm_a = apply(loss_channel(arm_a.space(), "a", fiber), apply(loss_channel(arm_a.space(), "A", mem), arm_a));
  arm_b = apply(loss_channel(arm_b.space(), "b", fiber), apply(loss_channel(arm_b.space(), "B", mem), arm_b));
  const DensityState out = apply(swap_station(p.f, p.d, p.n_max, "a", "b"), {&arm_a, &arm_b});
  const double q = out.trace();
  if (!(q > 0.0)) throw std::invalid_argument("segment success probability vanishes");
  return {out.normalized(), q, dt};
}

SuperOp merge_superop_1d(const HardwareParams& p, const std::string& i, const std::string& j) {
  p.validate();
  const ModeSpace pair = memory_space(p.n_max, {i, j});
  const double g = -std::log1p(-p.v);
  const SuperOp readout = tensor(loss_channel(pair, i, g), loss_channel(pair, j, g));
  return compose(swap_station(p.f, p.d, p.n_max, i, j), readout);
}

SuperOp nonlinear_gate(double eta, int n_max, const std::string& a, const std::string& mem, const std::string& c) {
  require(eta > 0.0 && eta <= 1.0, "gate efficiency must lie in (0, 1]");
  const ModeSpace sp(n_max, {{a, ModeKind::photonic}, {mem, ModeKind::memory}, {c, ModeKind::photonic}});
  const CMatrix op_a = embed_operator(sp, a, annihilation(n_max));
  const CMatrix op_m = embed_operator(sp, mem, annihilation(n_max));
  const CMatrix op_c = embed_operator(sp, c, annihilation(n_max));
  const CMatrix x = op_a * op_m.adjoint() * op_c.adjoint();
  const CMatrix gen = (std::numbers::pi / 2.0) * (x - x.adjoint());
  const CMatrix u = gen.exp();
  const SuperOp loss = loss_channel(sp, a, -std::log(eta));
  const SuperOp gate = compose(conjugation(sp, u), loss);
  return compose(trace_out(sp, {a}), gate);
}

SegmentResult build_segment_2d(const HardwareParams& p, double eps_a, double eps_b) {
  p.validate();
  const double dt = 2.0 * p.v_c_s_per_km * p.L0_km + p.t_s;
  const double t_c_node = p.v_c_s_per_km * p.L0_km + p.t_s;
  const double fiber = p.L0_km / p.L_att_km;
  const double mem = dt / p.T_coh_s;

  DensityState arm_a = two_mode_squeezed(eps_a, p.n_max, "A", "a");
  DensityState arm_b = two_mode_squeezed(eps_b, p.n_max, "B", "b");
  arm_a = apply(loss_channel(arm_a.space(), "a", fiber), apply(loss_channel(arm_a.space(), "A", mem), arm_a));
  arm_b = apply(loss_channel(arm_b.space(), "b", fiber), apply(loss_channel(arm_b.space(), "B", mem), arm_b));

  const ModeSpace node_c(p.n_max, {{"C", ModeKind::memory}, {"c", ModeKind::photonic}});
  const DensityState vac_c = DensityState::basis(node_c, {0, 0});
  DensityState gated = apply(nonlinear_gate(p.eta, p.n_max, "a", "C", "c"), {&arm_a, &vac_c});  // (A, C, c)
  gated = apply(loss_channel(gated.space(), "C", t_c_node / p.T_coh_s), gated);

  DensityState out = apply(swap_station(p.f, p.d, p.n_max, "b", "c"), {&gated, &arm_b});
  out = permute(out, {"A", "C", "B"});
  const double q = out.trace();
  if (!(q > 0.0)) throw std::invalid_argument("segment success probability vanishes");
  return {out.normalized(), q, dt};
}

std::array<std::string, 3> segment_labels_2d(int k) {
  require(k >= 0 && k < 3, "segment index must be 0, 1 or 2");
  const std::string n = std::to_string(k + 1);
  return {"A" + n, "C" + n, "B" + n};
}

const std::array<std::string, 3>& output_labels_2d() {
  static const std::array<std::string, 3> out{"A1", "A2", "A3"};
  return out;
}

Merges2D merge_superops_2d(const HardwareParams& p) {
  const SuperOp m12 = merge_superop_1d(p, "C1", "B2");
  const SuperOp m13 = merge_superop_1d(p, "B1", "B3");
  const SuperOp m23 = merge_superop_1d(p, "C2", "C3");
  return Merges2D{
      {m23, m13, m12},
      {tensor(m12, m13), tensor(m12, m23), tensor(m13, m23)},
  };
}

CVector bell_target(const ModeSpace& space) {
  require(space.size() == 2, "Bell target needs two modes");
  CVector psi = CVector::Zero(space.dim());
  psi[basis_index(space, {1, 0})] = 1.0 / std::sqrt(2.0);
  psi[basis_index(space, {0, 1})] = 1.0 / std::sqrt(2.0);
  return psi;
}

CVector ghz_target(const ModeSpace& space) {
  require(space.size() == 3, "GHZ target needs three modes");
  CVector psi = CVector::Zero(space.dim());
  psi[basis_index(space, {1, 1, 0})] = 1.0 / std::sqrt(2.0);
  psi[basis_index(space, {0, 0, 1})] = 1.0 / std::sqrt(2.0);
  return psi;
}

}  // namespace repsim
