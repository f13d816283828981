#pragma once

// Truncated-Fock operator and superoperator algebra.
//
// Conventions shared by every module:
//  * A ModeSpace is an ordered list of labelled bosonic modes, each truncated
//    at n_max. The first mode is the most significant digit of the flat
//    Hilbert-space index.
//  * Density matrices are vectorized by column stacking, vec(rho)[i + d*j] =
//    rho(i, j). The superoperator of A . B^dagger is conj(B) (x) A.
//  * Operators are matched to modes by label, never by position. Applying an
//    operator to a larger state leaves the spectator modes untouched and keeps
//    the state's mode order (modes consumed by the operator disappear).

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace repsim {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using SpMatrix = Eigen::SparseMatrix<cplx>;
using Index = Eigen::Index;

enum class ModeKind { memory, photonic };

struct Mode {
  std::string label;
  ModeKind kind = ModeKind::memory;
  bool operator==(const Mode&) const = default;
};

class ModeSpace {
 public:
  explicit ModeSpace(int n_max = 2, std::vector<Mode> modes = {});

  int n_max() const { return n_max_; }
  int local_dim() const { return n_max_ + 1; }
  std::size_t size() const { return modes_.size(); }
  Index dim() const { return dim_; }
  const std::vector<Mode>& modes() const { return modes_; }
  const Mode& mode(std::size_t i) const { return modes_.at(i); }

  std::optional<std::size_t> find(std::string_view label) const;
  std::size_t index_of(std::string_view label) const;  // throws if absent
  bool contains(std::string_view label) const { return find(label).has_value(); }
  std::vector<std::string> labels() const;

  // Modes with the given labels, in the given order.
  ModeSpace subspace(const std::vector<std::string>& labels) const;
  // This space without the given labels, order preserved.
  ModeSpace without(const std::vector<std::string>& labels) const;
  // This space followed by `other`; labels must be disjoint.
  ModeSpace concat(const ModeSpace& other) const;
  ModeSpace relabeled(const std::vector<std::string>& labels) const;

  bool operator==(const ModeSpace&) const = default;

 private:
  int n_max_;
  std::vector<Mode> modes_;
  Index dim_;
};

ModeSpace memory_space(int n_max, const std::vector<std::string>& labels);
ModeSpace photonic_space(int n_max, const std::vector<std::string>& labels);

// Flat index <-> per-mode occupations.
Index basis_index(const ModeSpace& space, const std::vector<int>& occupations);
std::vector<int> occupations(const ModeSpace& space, Index index);

class DensityState {
 public:
  DensityState() : rho_(CMatrix::Zero(1, 1)) {}  // zero on the empty space
  DensityState(ModeSpace space, CMatrix rho);

  static DensityState from_pure(ModeSpace space, const CVector& psi);
  static DensityState basis(ModeSpace space, const std::vector<int>& occupations);

  const ModeSpace& space() const { return space_; }
  const CMatrix& matrix() const { return rho_; }
  Index dim() const { return rho_.rows(); }
  double trace() const { return rho_.trace().real(); }

  CVector vec() const;
  static DensityState from_vec(ModeSpace space, const CVector& v);

  DensityState scaled(double c) const;
  DensityState normalized() const;  // DegenerateProtocol on non-positive trace
  DensityState relabeled(const std::vector<std::string>& labels) const;
  void hermitize();

  DensityState& operator+=(const DensityState& other);

 private:
  ModeSpace space_;
  CMatrix rho_;
};

DensityState operator+(DensityState a, const DensityState& b);
DensityState operator-(DensityState a, const DensityState& b);

struct PhysicalCheck {
  double hermiticity_error;  // max |rho - rho^dagger|
  double min_eigenvalue;     // of the Hermitian part
  double trace;
  bool ok(double herm_tol = 1e-10, double eig_tol = -1e-9, double trace_tol = 1e-10) const {
    return hermiticity_error <= herm_tol && min_eigenvalue >= eig_tol && trace >= -trace_tol &&
           trace <= 1.0 + trace_tol;
  }
};
PhysicalCheck physical_check(const DensityState& rho);

// <psi|rho|psi> / Tr rho.
double fidelity(const DensityState& rho, const CVector& target);

// Reorder modes to `order` (a permutation of the state's labels).
DensityState permute(const DensityState& rho, const std::vector<std::string>& order);

// Kronecker product; `a`'s modes come first.
DensityState tensor(const DensityState& a, const DensityState& b);

DensityState partial_trace(const DensityState& rho, const std::vector<std::string>& modes_out);

enum class TraceFlag {
  preserving,
  non_increasing,
  general,
  annihilating,  // generator with Tr(L rho) = 0
};

// Linear map from operators on in_space to operators on out_space. The output
// modes are always a subset of the input modes (read-out and detection
// consume modes, nothing creates them).
class SuperOp {
 public:
  SuperOp() : m_(1, 1), flag_(TraceFlag::general) {}  // zero map on the empty space
  SuperOp(ModeSpace in, ModeSpace out, SpMatrix m, TraceFlag flag);
  SuperOp(ModeSpace space, SpMatrix m, TraceFlag flag);

  static SuperOp identity(const ModeSpace& space);
  static SuperOp zero_generator(const ModeSpace& space);

  const ModeSpace& in_space() const { return in_; }
  const ModeSpace& out_space() const { return out_; }
  const SpMatrix& matrix() const { return m_; }
  TraceFlag flag() const { return flag_; }
  bool endomorphism() const { return in_ == out_; }

  // Rename modes; `in_labels` replaces the input labels positionally and the
  // output labels follow by name.
  SuperOp relabeled(const std::vector<std::string>& in_labels) const;
  SuperOp scaled(double c) const;

 private:
  ModeSpace in_;
  ModeSpace out_;
  SpMatrix m_;
  TraceFlag flag_;
};

SuperOp operator+(const SuperOp& a, const SuperOp& b);

// second o first. second's input modes must be among first's output modes.
SuperOp compose(const SuperOp& second, const SuperOp& first);

// Independent action on disjoint modes. Spaces are concatenated (a first).
SuperOp tensor(const SuperOp& a, const SuperOp& b);

// Apply op to a state whose space contains op's input modes.
DensityState apply(const SuperOp& op, const DensityState& rho);

// Apply op to the product of `factors` without forming the full product
// unless the operator touches all modes. Result mode order: the factors'
// modes concatenated, minus modes consumed by op.
DensityState apply(const SuperOp& op, const std::vector<const DensityState*>& factors);

// Local vectorized map x -> y with x over op_in, y over op_out.
using VecMap = std::function<void(const CVector& x, CVector& y)>;
DensityState apply_local(const ModeSpace& op_in, const ModeSpace& op_out, const VecMap& map,
                         const std::vector<const DensityState*>& factors);

// ---- operators ----

CMatrix annihilation(int n_max);
// Single-mode operator lifted onto `space` (identity on the other modes).
CMatrix embed_operator(const ModeSpace& space, std::string_view label, const CMatrix& local);

SuperOp dissipator(const ModeSpace& space, const CMatrix& jump);
// U . U^dagger; flagged preserving when U is unitary to 1e-10.
SuperOp conjugation(const ModeSpace& space, const CMatrix& u);
// exp(g * generator).
SuperOp channel_exp(const SuperOp& generator, double g);

SuperOp loss_channel(const ModeSpace& space, std::string_view label, double g);
SuperOp dark_count_channel(const ModeSpace& space, std::string_view label, double d);
SuperOp beamsplitter(const ModeSpace& space, std::string_view mode_i, std::string_view mode_j);
SuperOp trace_out(const ModeSpace& space, const std::vector<std::string>& labels);

// Effect rho -> weight * <occ|rho|occ> on the listed modes (consumed).
SuperOp projection_effect(const ModeSpace& modes, const std::vector<int>& occupations,
                          double weight);

struct Projection {
  DensityState state;
  double weight;
};
// 2 <1_i 0_j| rho |1_i 0_j> on the remaining modes.
Projection detect_project(const DensityState& rho, std::string_view mode_i, std::string_view mode_j);

// ---- resolvent ----

// Factorization of (s - L) for repeated solves.
class Resolvent {
 public:
  Resolvent(const SuperOp& generator, double s);

  double s() const { return s_; }
  const ModeSpace& space() const { return space_; }

  // (s - L)^-1 x; NumericFailure when the residual check fails.
  CVector solve(const CVector& x) const;
  DensityState apply(const DensityState& rho) const;
  DensityState apply(const std::vector<const DensityState*>& factors) const;

 private:
  struct Impl;
  ModeSpace space_;
  double s_;
  std::shared_ptr<const Impl> impl_;
};

DensityState resolvent_apply(const SuperOp& generator, double s, const DensityState& rho);

// ---- sums of single-mode generators ----

// Generator made of one single-mode term per mode (distinct modes, so the
// terms commute and the exponential factorizes).
class LocalChannel;

class LocalGenerator {
 public:
  LocalGenerator() = default;
  LocalGenerator(ModeSpace space, std::vector<SuperOp> terms);

  // The same single-mode generator on every mode of `space` of kind `kind`.
  static LocalGenerator uniform(const ModeSpace& space, const SuperOp& single_mode,
                                ModeKind kind = ModeKind::memory);

  const ModeSpace& space() const { return space_; }
  const std::vector<SuperOp>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  SuperOp assemble() const;
  LocalChannel exponential(double t) const;
  LocalGenerator relabeled(const std::vector<std::string>& labels) const;

 private:
  ModeSpace space_;
  std::vector<SuperOp> terms_;
};

class LocalChannel {
 public:
  LocalChannel() = default;
  explicit LocalChannel(std::vector<SuperOp> factors) : factors_(std::move(factors)) {}
  const std::vector<SuperOp>& factors() const { return factors_; }
  bool is_identity() const { return factors_.empty(); }
  DensityState apply(const DensityState& rho) const;

 private:
  std::vector<SuperOp> factors_;
};

}  // namespace repsim
