#include "repsim/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "repsim/errors.hpp"

namespace repsim {

namespace {

Index ipow(Index base, std::size_t e) {
  Index r = 1;
  for (std::size_t k = 0; k < e; ++k) r *= base;
  return r;
}

SpMatrix to_sparse(const CMatrix& m) { return m.sparseView(); }

TraceFlag compose_flags(TraceFlag second, TraceFlag first) {
  auto channel_like = [](TraceFlag f) {
    return f == TraceFlag::preserving || f == TraceFlag::non_increasing;
  };
  if (second == TraceFlag::preserving && first == TraceFlag::preserving) return TraceFlag::preserving;
  if (channel_like(second) && channel_like(first)) return TraceFlag::non_increasing;
  return TraceFlag::general;
}

// Offsets into each factor's flat index for every multi-index over `positions`
// (global mode positions, most significant first).
struct FactorLayout {
  std::vector<std::size_t> factor;  // per global position
  std::vector<Index> weight;        // per global position
  std::size_t factors = 0;
};

std::vector<std::vector<Index>> offsets(const FactorLayout& lay, const std::vector<std::size_t>& positions,
                                       Index local_dim) {
  const Index n = ipow(local_dim, positions.size());
  std::vector<std::vector<Index>> off(lay.factors, std::vector<Index>(static_cast<std::size_t>(n), 0));
  for (Index idx = 0; idx < n; ++idx) {
    Index rest = idx;
    for (std::size_t k = positions.size(); k-- > 0;) {
      const Index digit = rest % local_dim;
      rest /= local_dim;
      const std::size_t p = positions[k];
      off[lay.factor[p]][static_cast<std::size_t>(idx)] += digit * lay.weight[p];
    }
  }
  return off;
}

DensityState apply_raw(const SuperOp& op, const DensityState& rho);

}  // namespace

// ---------------------------------------------------------------- ModeSpace

ModeSpace::ModeSpace(int n_max, std::vector<Mode> modes) : n_max_(n_max), modes_(std::move(modes)) {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  std::set<std::string> seen;
  for (const auto& m : modes_) {
    if (!seen.insert(m.label).second) throw std::invalid_argument("duplicate mode label '" + m.label + "'");
  }
  dim_ = ipow(n_max + 1, modes_.size());
}

std::optional<std::size_t> ModeSpace::find(std::string_view label) const {
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (modes_[i].label == label) return i;
  }
  return std::nullopt;
}

std::size_t ModeSpace::index_of(std::string_view label) const {
  auto i = find(label);
  if (!i) throw std::invalid_argument("unknown mode label '" + std::string(label) + "'");
  return *i;
}

std::vector<std::string> ModeSpace::labels() const {
  std::vector<std::string> out;
  out.reserve(modes_.size());
  for (const auto& m : modes_) out.push_back(m.label);
  return out;
}

ModeSpace ModeSpace::subspace(const std::vector<std::string>& labels) const {
  std::vector<Mode> out;
  for (const auto& l : labels) out.push_back(modes_[index_of(l)]);
  return ModeSpace(n_max_, std::move(out));
}

ModeSpace ModeSpace::without(const std::vector<std::string>& labels) const {
  for (const auto& l : labels) index_of(l);
  std::vector<Mode> out;
  for (const auto& m : modes_) {
    if (std::find(labels.begin(), labels.end(), m.label) == labels.end()) out.push_back(m);
  }
  return ModeSpace(n_max_, std::move(out));
}

ModeSpace ModeSpace::concat(const ModeSpace& other) const {
  if (other.n_max_ != n_max_) throw std::invalid_argument("n_max mismatch in concat");
  std::vector<Mode> out = modes_;
  out.insert(out.end(), other.modes_.begin(), other.modes_.end());
  return ModeSpace(n_max_, std::move(out));
}

ModeSpace ModeSpace::relabeled(const std::vector<std::string>& labels) const {
  if (labels.size() != modes_.size()) throw std::invalid_argument("relabel: wrong label count");
  std::vector<Mode> out = modes_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].label = labels[i];
  return ModeSpace(n_max_, std::move(out));
}

ModeSpace memory_space(int n_max, const std::vector<std::string>& labels) {
  std::vector<Mode> m;
  for (const auto& l : labels) m.push_back({l, ModeKind::memory});
  return ModeSpace(n_max, std::move(m));
}

ModeSpace photonic_space(int n_max, const std::vector<std::string>& labels) {
  std::vector<Mode> m;
  for (const auto& l : labels) m.push_back({l, ModeKind::photonic});
  return ModeSpace(n_max, std::move(m));
}

Index basis_index(const ModeSpace& space, const std::vector<int>& occ) {
  if (occ.size() != space.size()) throw std::invalid_argument("occupation count mismatch");
  Index idx = 0;
  for (int n : occ) {
    if (n < 0 || n > space.n_max()) throw std::invalid_argument("occupation outside truncation");
    idx = idx * space.local_dim() + n;
  }
  return idx;
}

std::vector<int> occupations(const ModeSpace& space, Index index) {
  std::vector<int> occ(space.size());
  for (std::size_t k = space.size(); k-- > 0;) {
    occ[k] = static_cast<int>(index % space.local_dim());
    index /= space.local_dim();
  }
  return occ;
}

// ------------------------------------------------------------- DensityState

DensityState::DensityState(ModeSpace space, CMatrix rho) : space_(std::move(space)), rho_(std::move(rho)) {
  if (rho_.rows() != space_.dim() || rho_.cols() != space_.dim()) {
    throw std::invalid_argument("density matrix dimension does not match mode space");
  }
}

DensityState DensityState::from_pure(ModeSpace space, const CVector& psi) {
  CMatrix rho = psi * psi.adjoint();
  return DensityState(std::move(space), std::move(rho));
}

DensityState DensityState::basis(ModeSpace space, const std::vector<int>& occ) {
  const Index i = basis_index(space, occ);
  CMatrix rho = CMatrix::Zero(space.dim(), space.dim());
  rho(i, i) = 1.0;
  return DensityState(std::move(space), std::move(rho));
}

CVector DensityState::vec() const { return Eigen::Map<const CVector>(rho_.data(), rho_.size()); }

DensityState DensityState::from_vec(ModeSpace space, const CVector& v) {
  const Index d = space.dim();
  if (v.size() != d * d) throw std::invalid_argument("vectorized state has wrong length");
  CMatrix rho = Eigen::Map<const CMatrix>(v.data(), d, d);
  return DensityState(std::move(space), std::move(rho));
}

DensityState DensityState::scaled(double c) const { return DensityState(space_, rho_ * c); }

DensityState DensityState::normalized() const {
  const double t = trace();
  if (!(t > 0.0)) throw DegenerateProtocol("cannot normalize a state with non-positive trace");
  return scaled(1.0 / t);
}

DensityState DensityState::relabeled(const std::vector<std::string>& labels) const {
  return DensityState(space_.relabeled(labels), rho_);
}

void DensityState::hermitize() {
  CMatrix h = 0.5 * (rho_ + rho_.adjoint());
  rho_ = std::move(h);
}

DensityState& DensityState::operator+=(const DensityState& other) {
  if (!(other.space_ == space_)) throw std::invalid_argument("adding states on different spaces");
  rho_ += other.rho_;
  return *this;
}

DensityState operator+(DensityState a, const DensityState& b) { return a += b; }

DensityState operator-(DensityState a, const DensityState& b) { return a += b.scaled(-1.0); }

PhysicalCheck physical_check(const DensityState& rho) {
  const CMatrix& m = rho.matrix();
  PhysicalCheck c{};
  c.hermiticity_error = (m - m.adjoint()).cwiseAbs().maxCoeff();
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  c.min_eigenvalue = es.eigenvalues().minCoeff();
  c.trace = rho.trace();
  return c;
}

double fidelity(const DensityState& rho, const CVector& target) {
  const cplx f = target.dot(rho.matrix() * target);
  return f.real() / rho.trace();
}

DensityState permute(const DensityState& rho, const std::vector<std::string>& order) {
  const ModeSpace& from = rho.space();
  if (order.size() != from.size()) throw std::invalid_argument("permute: order must list every mode");
  const ModeSpace to = from.subspace(order);
  if (to == from) return rho;
  const Index D = from.local_dim();
  const Index d = from.dim();
  std::vector<Index> w_from(from.size());
  for (std::size_t k = 0; k < from.size(); ++k) w_from[k] = ipow(D, from.size() - 1 - k);
  std::vector<Index> map(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    Index rest = i, old = 0;
    for (std::size_t k = to.size(); k-- > 0;) {
      old += (rest % D) * w_from[from.index_of(order[k])];
      rest /= D;
    }
    map[static_cast<std::size_t>(i)] = old;
  }
  CMatrix out(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) out(i, j) = rho.matrix()(map[i], map[j]);
  return DensityState(to, std::move(out));
}

DensityState tensor(const DensityState& a, const DensityState& b) {
  ModeSpace s = a.space().concat(b.space());
  CMatrix m = Eigen::kroneckerProduct(a.matrix(), b.matrix());
  return DensityState(std::move(s), std::move(m));
}

DensityState partial_trace(const DensityState& rho, const std::vector<std::string>& modes_out) {
  const ModeSpace& sp = rho.space();
  const ModeSpace kept = sp.without(modes_out);
  FactorLayout lay;
  lay.factors = 1;
  const Index D = sp.local_dim();
  for (std::size_t k = 0; k < sp.size(); ++k) {
    lay.factor.push_back(0);
    lay.weight.push_back(ipow(D, sp.size() - 1 - k));
  }
  std::vector<std::size_t> kpos, tpos;
  for (std::size_t k = 0; k < sp.size(); ++k) {
    (kept.contains(sp.mode(k).label) ? kpos : tpos).push_back(k);
  }
  const auto ok = offsets(lay, kpos, D)[0];
  const auto ot = offsets(lay, tpos, D)[0];
  const Index dk = kept.dim();
  CMatrix out = CMatrix::Zero(dk, dk);
  for (Index j = 0; j < dk; ++j)
    for (Index i = 0; i < dk; ++i) {
      cplx acc = 0.0;
      for (Index t : ot) acc += rho.matrix()(ok[i] + t, ok[j] + t);
      out(i, j) = acc;
    }
  return DensityState(kept, std::move(out));
}

// ------------------------------------------------------------------ SuperOp

SuperOp::SuperOp(ModeSpace in, ModeSpace out, SpMatrix m, TraceFlag flag)
    : in_(std::move(in)), out_(std::move(out)), m_(std::move(m)), flag_(flag) {
  if (in_.n_max() != out_.n_max()) throw std::invalid_argument("SuperOp: n_max mismatch");
  if (m_.rows() != out_.dim() * out_.dim() || m_.cols() != in_.dim() * in_.dim()) {
    throw std::invalid_argument("SuperOp: matrix shape does not match spaces");
  }
  for (const auto& md : out_.modes()) {
    if (!in_.contains(md.label)) throw std::invalid_argument("SuperOp output mode not among inputs");
  }
  m_.makeCompressed();
}

SuperOp::SuperOp(ModeSpace space, SpMatrix m, TraceFlag flag) : SuperOp(space, space, std::move(m), flag) {}

SuperOp SuperOp::identity(const ModeSpace& space) {
  const Index n = space.dim() * space.dim();
  SpMatrix m(n, n);
  m.setIdentity();
  return SuperOp(space, std::move(m), TraceFlag::preserving);
}

SuperOp SuperOp::zero_generator(const ModeSpace& space) {
  const Index n = space.dim() * space.dim();
  return SuperOp(space, SpMatrix(n, n), TraceFlag::annihilating);
}

SuperOp SuperOp::relabeled(const std::vector<std::string>& in_labels) const {
  ModeSpace in = in_.relabeled(in_labels);
  std::vector<std::string> out_labels;
  for (const auto& m : out_.modes()) out_labels.push_back(in_labels[in_.index_of(m.label)]);
  return SuperOp(in, out_.relabeled(out_labels), m_, flag_);
}

SuperOp SuperOp::scaled(double c) const {
  TraceFlag f = TraceFlag::general;
  if (flag_ == TraceFlag::annihilating) {
    f = TraceFlag::annihilating;
  } else if ((flag_ == TraceFlag::preserving || flag_ == TraceFlag::non_increasing) && c >= 0.0 && c <= 1.0) {
    f = (c == 1.0) ? flag_ : TraceFlag::non_increasing;
  }
  return SuperOp(in_, out_, c * m_, f);
}

SuperOp operator+(const SuperOp& a, const SuperOp& b) {
  if (!(a.in_space() == b.in_space()) || !(a.out_space() == b.out_space())) {
    throw std::invalid_argument("adding superoperators on different spaces");
  }
  const TraceFlag f = (a.flag() == TraceFlag::annihilating && b.flag() == TraceFlag::annihilating)
                          ? TraceFlag::annihilating
                          : TraceFlag::general;
  SpMatrix m = a.matrix() + b.matrix();
  return SuperOp(a.in_space(), a.out_space(), std::move(m), f);
}

SuperOp compose(const SuperOp& second, const SuperOp& first_in) {
  // Modes that `second` needs and `first` never touched pass through `first`.
  std::vector<std::string> extra;
  for (const auto& m : second.in_space().modes()) {
    if (first_in.out_space().contains(m.label)) continue;
    if (first_in.in_space().contains(m.label)) {
      throw std::invalid_argument("compose: mode '" + m.label + "' consumed by the first map");
    }
    extra.push_back(m.label);
  }
  const SuperOp first =
      extra.empty() ? first_in : tensor(first_in, SuperOp::identity(second.in_space().subspace(extra)));
  const ModeSpace& mid = first.out_space();
  if (second.in_space() == mid) {
    SpMatrix m = second.matrix() * first.matrix();
    return SuperOp(first.in_space(), second.out_space(), std::move(m), compose_flags(second.flag(), first.flag()));
  }
  // Apply `second` to every nonzero column of `first`, viewed as an operator on mid.
  std::vector<std::string> consumed;
  for (const auto& m : second.in_space().modes()) {
    if (!second.out_space().contains(m.label)) consumed.push_back(m.label);
  }
  const std::optional<ModeSpace> out_space = mid.without(consumed);
  const Index dm = mid.dim();
  std::vector<Eigen::Triplet<cplx>> trip;
  CVector col(dm * dm);
  for (Index c = 0; c < first.matrix().outerSize(); ++c) {
    col.setZero();
    bool any = false;
    for (SpMatrix::InnerIterator it(first.matrix(), c); it; ++it) {
      col[it.row()] = it.value();
      any = true;
    }
    if (!any) continue;
    const CVector v = apply_raw(second, DensityState::from_vec(mid, col)).vec();
    for (Index r = 0; r < v.size(); ++r) {
      if (v[r] != cplx(0.0)) trip.emplace_back(r, c, v[r]);
    }
  }
  const Index dout = out_space->dim();
  SpMatrix m(dout * dout, first.matrix().cols());
  m.setFromTriplets(trip.begin(), trip.end());
  return SuperOp(first.in_space(), *out_space, std::move(m), compose_flags(second.flag(), first.flag()));
}

SuperOp tensor(const SuperOp& a, const SuperOp& b) {
  const ModeSpace in = a.in_space().concat(b.in_space());
  const ModeSpace out = a.out_space().concat(b.out_space());
  const Index ai = a.in_space().dim(), ao = a.out_space().dim();
  const Index bi = b.in_space().dim(), bo = b.out_space().dim();
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(a.matrix().nonZeros() * b.matrix().nonZeros()));
  for (Index ca = 0; ca < a.matrix().outerSize(); ++ca) {
    const Index ia = ca % ai, ja = ca / ai;
    for (SpMatrix::InnerIterator ita(a.matrix(), ca); ita; ++ita) {
      const Index oa = ita.row() % ao, pa = ita.row() / ao;
      for (Index cb = 0; cb < b.matrix().outerSize(); ++cb) {
        const Index ib = cb % bi, jb = cb / bi;
        const Index col = (ia * bi + ib) + ai * bi * (ja * bi + jb);
        for (SpMatrix::InnerIterator itb(b.matrix(), cb); itb; ++itb) {
          const Index ob = itb.row() % bo, pb = itb.row() / bo;
          const Index row = (oa * bo + ob) + ao * bo * (pa * bo + pb);
          trip.emplace_back(row, col, ita.value() * itb.value());
        }
      }
    }
  }
  SpMatrix m(out.dim() * out.dim(), in.dim() * in.dim());
  m.setFromTriplets(trip.begin(), trip.end());
  TraceFlag f = compose_flags(a.flag(), b.flag());
  return SuperOp(in, out, std::move(m), f);
}

namespace {

DensityState apply_local_impl(const ModeSpace& op_in, const ModeSpace& op_out, const VecMap& map,
                              const std::vector<const DensityState*>& factors, bool hermitize) {
  if (factors.empty()) throw std::invalid_argument("apply: no input states");
  const int n_max = op_in.n_max();
  const Index D = n_max + 1;
  FactorLayout lay;
  lay.factors = factors.size();
  std::vector<Mode> all;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const ModeSpace& sp = factors[f]->space();
    if (sp.n_max() != n_max) throw std::invalid_argument("apply: n_max mismatch");
    for (std::size_t k = 0; k < sp.size(); ++k) {
      all.push_back(sp.mode(k));
      lay.factor.push_back(f);
      lay.weight.push_back(ipow(D, sp.size() - 1 - k));
    }
  }
  const ModeSpace joint(n_max, all);  // validates label uniqueness

  std::vector<std::size_t> in_pos;
  for (const auto& m : op_in.modes()) in_pos.push_back(joint.index_of(m.label));
  std::vector<std::size_t> spect;
  std::vector<std::string> spect_labels;
  for (std::size_t p = 0; p < all.size(); ++p) {
    if (!op_in.contains(all[p].label)) {
      spect.push_back(p);
      spect_labels.push_back(all[p].label);
    }
  }
  const auto off_r = offsets(lay, spect, D);
  const auto off_i = offsets(lay, in_pos, D);
  const Index d_r = ipow(D, spect.size());
  const Index d_i = op_in.dim();
  const Index d_o = op_out.dim();

  CMatrix res = CMatrix::Zero(d_r * d_o, d_r * d_o);
  CVector x(d_i * d_i), y(d_o * d_o);
  const std::size_t F = factors.size();
  for (Index r2 = 0; r2 < d_r; ++r2) {
    for (Index r = 0; r < d_r; ++r) {
      bool nonzero = false;
      for (Index i2 = 0; i2 < d_i; ++i2) {
        for (Index i = 0; i < d_i; ++i) {
          cplx prod = 1.0;
          for (std::size_t f = 0; f < F; ++f) {
            prod *= factors[f]->matrix()(off_r[f][r] + off_i[f][i], off_r[f][r2] + off_i[f][i2]);
          }
          x[i + d_i * i2] = prod;
          nonzero = nonzero || prod != cplx(0.0);
        }
      }
      if (!nonzero) continue;
      map(x, y);
      for (Index o2 = 0; o2 < d_o; ++o2)
        for (Index o = 0; o < d_o; ++o) res(r * d_o + o, r2 * d_o + o2) = y[o + d_o * o2];
    }
  }

  std::vector<Mode> inter_modes;
  for (std::size_t p : spect) inter_modes.push_back(all[p]);
  for (const auto& m : op_out.modes()) inter_modes.push_back(all[joint.index_of(m.label)]);
  DensityState inter(ModeSpace(n_max, inter_modes), std::move(res));

  std::vector<std::string> consumed;
  for (const auto& m : op_in.modes()) {
    if (!op_out.contains(m.label)) consumed.push_back(m.label);
  }
  DensityState out = permute(inter, joint.without(consumed).labels());
  if (hermitize) out.hermitize();
  return out;
}

DensityState apply_raw(const SuperOp& op, const DensityState& rho) {
  if (op.in_space() == rho.space()) return DensityState::from_vec(op.out_space(), op.matrix() * rho.vec());
  const SpMatrix& m = op.matrix();
  return apply_local_impl(op.in_space(), op.out_space(), [&m](const CVector& x, CVector& y) { y.noalias() = m * x; },
                          {&rho}, false);
}

}  // namespace

DensityState apply_local(const ModeSpace& op_in, const ModeSpace& op_out, const VecMap& map,
                         const std::vector<const DensityState*>& factors) {
  return apply_local_impl(op_in, op_out, map, factors, true);
}

DensityState apply(const SuperOp& op, const std::vector<const DensityState*>& factors) {
  const SpMatrix& m = op.matrix();
  return apply_local(op.in_space(), op.out_space(), [&m](const CVector& x, CVector& y) { y.noalias() = m * x; },
                     factors);
}

DensityState apply(const SuperOp& op, const DensityState& rho) {
  if (op.in_space() == rho.space()) {
    DensityState out = DensityState::from_vec(op.out_space(), op.matrix() * rho.vec());
    out.hermitize();
    return out;
  }
  return repsim::apply(op, std::vector<const DensityState*>{&rho});
}

// ---------------------------------------------------------------- operators

CMatrix annihilation(int n_max) {
  if (n_max < 1) throw std::invalid_argument("annihilation: n_max must be >= 1");
  CMatrix a = CMatrix::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

CMatrix embed_operator(const ModeSpace& space, std::string_view label, const CMatrix& local) {
  const std::size_t pos = space.index_of(label);
  if (local.rows() != space.local_dim() || local.cols() != space.local_dim()) {
    throw std::invalid_argument("embed_operator: local operator dimension mismatch");
  }
  const Index left = ipow(space.local_dim(), pos);
  const Index right = ipow(space.local_dim(), space.size() - 1 - pos);
  CMatrix l = CMatrix::Identity(left, left);
  CMatrix r = CMatrix::Identity(right, right);
  CMatrix tmp = Eigen::kroneckerProduct(l, local);
  return Eigen::kroneckerProduct(tmp, r);
}

SuperOp dissipator(const ModeSpace& space, const CMatrix& c) {
  const Index d = space.dim();
  if (c.rows() != d || c.cols() != d) throw std::invalid_argument("dissipator: jump operator dimension mismatch");
  const CMatrix id = CMatrix::Identity(d, d);
  const CMatrix cdc = c.adjoint() * c;
  CMatrix m = Eigen::kroneckerProduct(c.conjugate(), c);
  m -= 0.5 * CMatrix(Eigen::kroneckerProduct(id, cdc));
  m -= 0.5 * CMatrix(Eigen::kroneckerProduct(cdc.transpose(), id));
  return SuperOp(space, to_sparse(m), TraceFlag::annihilating);
}

SuperOp conjugation(const ModeSpace& space, const CMatrix& u) {
  const Index d = space.dim();
  if (u.rows() != d || u.cols() != d) throw std::invalid_argument("conjugation: operator dimension mismatch");
  const bool unitary = (u.adjoint() * u - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-10;
  CMatrix m = Eigen::kroneckerProduct(u.conjugate(), u);
  return SuperOp(space, to_sparse(m), unitary ? TraceFlag::preserving : TraceFlag::general);
}

SuperOp channel_exp(const SuperOp& generator, double g) {
  if (!std::isfinite(g)) throw std::invalid_argument("channel_exp: gain must be finite");
  if (!generator.endomorphism()) throw std::invalid_argument("channel_exp: generator must be an endomorphism");
  if (g == 0.0 || generator.matrix().nonZeros() == 0) return SuperOp::identity(generator.in_space());
  CMatrix m = CMatrix(generator.matrix()) * g;
  CMatrix e = m.exp();
  const TraceFlag f = generator.flag() == TraceFlag::annihilating ? TraceFlag::preserving : TraceFlag::general;
  return SuperOp(generator.in_space(), to_sparse(e), f);
}

SuperOp loss_channel(const ModeSpace& space, std::string_view label, double g) {
  const ModeSpace one = space.subspace({std::string(label)});
  return channel_exp(dissipator(one, annihilation(space.n_max())), g);
}

SuperOp dark_count_channel(const ModeSpace& space, std::string_view label, double d) {
  const ModeSpace one = space.subspace({std::string(label)});
  const CMatrix a = annihilation(space.n_max());
  const CMatrix ad = a.adjoint();
  return channel_exp(dissipator(one, a) + dissipator(one, ad), d);
}

SuperOp beamsplitter(const ModeSpace& space, std::string_view mode_i, std::string_view mode_j) {
  if (mode_i == mode_j) throw std::invalid_argument("beamsplitter: modes must be distinct");
  const ModeSpace pair = space.subspace({std::string(mode_i), std::string(mode_j)});
  const CMatrix a = annihilation(space.n_max());
  const CMatrix ai = embed_operator(pair, mode_i, a);
  const CMatrix aj = embed_operator(pair, mode_j, a);
  const CMatrix gen = (std::numbers::pi / 4.0) * (ai.adjoint() * aj - ai * aj.adjoint());
  const CMatrix u = gen.exp();
  return conjugation(pair, u);
}

SuperOp trace_out(const ModeSpace& space, const std::vector<std::string>& labels) {
  const ModeSpace kept = space.without(labels);
  FactorLayout lay;
  lay.factors = 1;
  const Index D = space.local_dim();
  for (std::size_t k = 0; k < space.size(); ++k) {
    lay.factor.push_back(0);
    lay.weight.push_back(ipow(D, space.size() - 1 - k));
  }
  std::vector<std::size_t> kpos, tpos;
  for (std::size_t k = 0; k < space.size(); ++k) {
    (kept.contains(space.mode(k).label) ? kpos : tpos).push_back(k);
  }
  const auto ok = offsets(lay, kpos, D)[0];
  const auto ot = offsets(lay, tpos, D)[0];
  const Index dk = kept.dim(), d = space.dim();
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Index j = 0; j < dk; ++j)
    for (Index i = 0; i < dk; ++i)
      for (Index t : ot) trip.emplace_back(i + dk * j, (ok[i] + t) + d * (ok[j] + t), 1.0);
  SpMatrix m(dk * dk, d * d);
  m.setFromTriplets(trip.begin(), trip.end());
  return SuperOp(space, kept, std::move(m), TraceFlag::preserving);
}

SuperOp projection_effect(const ModeSpace& modes, const std::vector<int>& occ, double weight) {
  const Index p = basis_index(modes, occ);
  const Index d = modes.dim();
  SpMatrix m(1, d * d);
  m.insert(0, p + d * p) = weight;
  const ModeSpace none(modes.n_max());
  return SuperOp(modes, none, std::move(m), weight <= 1.0 ? TraceFlag::non_increasing : TraceFlag::general);
}

Projection detect_project(const DensityState& rho, std::string_view mode_i, std::string_view mode_j) {
  const ModeSpace& sp = rho.space();
  for (auto l : {mode_i, mode_j}) {
    if (sp.mode(sp.index_of(l)).kind != ModeKind::photonic) {
      throw std::invalid_argument("detect_project: mode '" + std::string(l) + "' is not photonic");
    }
  }
  if (mode_i == mode_j) throw std::invalid_argument("detect_project: modes must be distinct");
  const ModeSpace pair = sp.subspace({std::string(mode_i), std::string(mode_j)});
  DensityState out = apply(projection_effect(pair, {1, 0}, 2.0), rho);
  const double w = out.trace();
  return {std::move(out), w};
}

// ---------------------------------------------------------------- resolvent

struct Resolvent::Impl {
  SpMatrix a;  // s - L
  Eigen::SparseLU<SpMatrix, Eigen::COLAMDOrdering<int>> lu;
  bool trivial = false;  // L == 0
};

Resolvent::Resolvent(const SuperOp& generator, double s) : space_(generator.in_space()), s_(s) {
  if (!generator.endomorphism()) throw std::invalid_argument("resolvent: generator must be an endomorphism");
  if (!std::isfinite(s)) throw std::invalid_argument("resolvent: s must be finite");
  auto impl = std::make_shared<Impl>();
  if (generator.matrix().nonZeros() == 0) {
    if (s == 0.0) throw NumericFailure("resolvent: singular system (L = 0, s = 0)", INFINITY);
    impl->trivial = true;
  } else {
    const Index n = generator.matrix().rows();
    SpMatrix id(n, n);
    id.setIdentity();
    impl->a = s * id - generator.matrix();
    impl->a.makeCompressed();
    impl->lu.compute(impl->a);
    if (impl->lu.info() != Eigen::Success) {
      throw NumericFailure("resolvent: sparse LU factorization failed", INFINITY);
    }
  }
  impl_ = std::move(impl);
}

CVector Resolvent::solve(const CVector& x) const {
  if (impl_->trivial) return x / s_;
  CVector y = impl_->lu.solve(x);
  const double res = (impl_->a * y - x).norm();
  const double scale = std::max(1.0, x.norm());
  if (!(res <= 1e-9 * scale)) {
    throw NumericFailure("resolvent: residual " + std::to_string(res) + " exceeds tolerance", res);
  }
  return y;
}

DensityState Resolvent::apply(const DensityState& rho) const {
  if (rho.space() == space_) {
    DensityState out = DensityState::from_vec(space_, solve(rho.vec()));
    out.hermitize();
    return out;
  }
  return this->apply(std::vector<const DensityState*>{&rho});
}

DensityState Resolvent::apply(const std::vector<const DensityState*>& factors) const {
  return apply_local(space_, space_, [this](const CVector& x, CVector& y) { y = solve(x); }, factors);
}

DensityState resolvent_apply(const SuperOp& generator, double s, const DensityState& rho) {
  return Resolvent(generator, s).apply(rho);
}

// ---------------------------------------------------------- LocalGenerator

LocalGenerator::LocalGenerator(ModeSpace space, std::vector<SuperOp> terms)
    : space_(std::move(space)), terms_(std::move(terms)) {
  std::set<std::string> used;
  for (const auto& t : terms_) {
    if (t.in_space().size() != 1 || !t.endomorphism()) {
      throw std::invalid_argument("LocalGenerator: terms must be single-mode endomorphisms");
    }
    const std::string& l = t.in_space().mode(0).label;
    space_.index_of(l);
    if (!used.insert(l).second) throw std::invalid_argument("LocalGenerator: two terms on mode '" + l + "'");
  }
  std::erase_if(terms_, [](const SuperOp& t) { return t.matrix().nonZeros() == 0; });
}

LocalGenerator LocalGenerator::uniform(const ModeSpace& space, const SuperOp& single_mode, ModeKind kind) {
  if (single_mode.in_space().size() != 1) throw std::invalid_argument("uniform: generator must act on one mode");
  std::vector<SuperOp> terms;
  for (const auto& m : space.modes()) {
    if (m.kind == kind) terms.push_back(single_mode.relabeled({m.label}));
  }
  return LocalGenerator(space, std::move(terms));
}

SuperOp LocalGenerator::assemble() const {
  const Index n = space_.dim() * space_.dim();
  SpMatrix total(n, n);
  const std::vector<std::string> labels = space_.labels();
  for (const auto& t : terms_) {
    const std::size_t pos = space_.index_of(t.in_space().mode(0).label);
    SuperOp acc = t;
    if (pos != 0) {
      acc = tensor(SuperOp::identity(space_.subspace({labels.begin(), labels.begin() + pos})), t);
    }
    if (pos + 1 < space_.size()) {
      acc = tensor(acc, SuperOp::identity(space_.subspace({labels.begin() + pos + 1, labels.end()})));
    }
    total += acc.matrix();
  }
  return SuperOp(space_, std::move(total), TraceFlag::annihilating);
}

LocalChannel LocalGenerator::exponential(double t) const {
  std::vector<SuperOp> f;
  if (t != 0.0) {
    for (const auto& term : terms_) f.push_back(channel_exp(term, t));
  }
  return LocalChannel(std::move(f));
}

LocalGenerator LocalGenerator::relabeled(const std::vector<std::string>& labels) const {
  std::vector<SuperOp> terms;
  for (const auto& t : terms_) terms.push_back(t.relabeled({labels.at(space_.index_of(t.in_space().mode(0).label))}));
  return LocalGenerator(space_.relabeled(labels), std::move(terms));
}

DensityState LocalChannel::apply(const DensityState& rho) const {
  DensityState out = rho;
  for (const auto& f : factors_) out = repsim::apply(f, out);
  return out;
}

}  // namespace repsim
