#pragma once

// Elementary segments and merging maps for the 1D (DLCZ) and 2D repeaters.
//
// Mode labels: a 1D segment holds memories (A, B); a 2D segment holds
// memories (A, C, B) with target (|1_A 1_C 0_B> + |0_A 0_C 1_B>)/sqrt2.
// docs/geometry.md shows how three 2D segments are wired for merging.

#include <array>
#include <string>

#include "repsim/liouville.hpp"

namespace repsim {

// Defaults are conventional literature values, not a reproduction of any
// particular experimental parameter set; override them through config.
struct HardwareParams {
  double L0_km = 10.0;           // elementary segment length
  double L_att_km = 22.0;        // fiber attenuation length
  double f = 0.05;               // detector photon-loss probability
  double d = 1e-4;               // dark-count gain per detection window
  double v = 0.05;               // memory read-out inefficiency
  double eta = 0.9;              // nonlinear-gate efficiency
  double T_coh_s = 0.1;          // memory coherence time
  double t_s = 1e-4;             // signal pulse / detection duration
  double t_swap = 1e-4;          // duration of a merging attempt
  double v_c_s_per_km = 5e-6;    // fiber signal delay per length
  int n_max = 2;                 // Fock truncation

  void validate() const;  // std::invalid_argument on out-of-range fields
};

struct SegmentResult {
  DensityState rho_e;  // normalized, memory modes only
  double q;            // per-attempt success probability
  double dt;           // attempt duration (s)
  double rate() const { return q / dt; }
};

// Truncated two-mode squeezed vacuum sum_n eps^n |n_mem n_photon>, renormalized.
DensityState two_mode_squeezed(double eps, int n_max, const std::string& memory = "A",
                               const std::string& photon = "a");

// Heralding station on modes (i, j): beamsplitter, lossy dark-counting
// detectors, factor-2 single-click projection. Consumes both modes.
SuperOp swap_station(double f, double d, int n_max, const std::string& i = "i", const std::string& j = "j");

// Memory decay generator D[a]/T_coh on a single mode labelled "m".
SuperOp memory_decay_generator(const HardwareParams& p);

SegmentResult build_segment_1d(const HardwareParams& p, double eps);

// Read-out of memories i and j followed by the heralding station.
SuperOp merge_superop_1d(const HardwareParams& p, const std::string& i, const std::string& j);

// Node-C gate from photonic mode `a` onto (memory C, photonic c); `a` is traced out.
SuperOp nonlinear_gate(double eta, int n_max, const std::string& a = "a", const std::string& mem = "C",
                       const std::string& c = "c");

SegmentResult build_segment_2d(const HardwareParams& p, double eps_a, double eps_b);

// Three 2D segments labelled A1,C1,B1 / A2,C2,B2 / A3,C3,B3. first[k] joins
// the two segments other than k; second[k] attaches segment k to that pair.
// The merged output lives on (A1, A2, A3), which plays the role of (A, C, B).
struct Merges2D {
  std::array<SuperOp, 3> first;
  std::array<SuperOp, 3> second;
};
Merges2D merge_superops_2d(const HardwareParams& p);

std::array<std::string, 3> segment_labels_2d(int k);  // {A_k, C_k, B_k}, k = 0..2
const std::array<std::string, 3>& output_labels_2d();  // {A1, A2, A3}

// Ideal target states.
CVector bell_target(const ModeSpace& space);  // (|10> + |01>)/sqrt2 on a 2-mode space
CVector ghz_target(const ModeSpace& space);   // (|110> + |001>)/sqrt2 on (A, C, B)

}  // namespace repsim
