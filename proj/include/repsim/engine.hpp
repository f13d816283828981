#pragma once

// Laplace-domain level recursion.
//
// A level combines identical, independently generated segments (rate nu each)
// into one larger segment. Every function here works on the Laplace image
// rho~(s) = int e^{-st} rho(t) dt of the unnormalized output distribution; the
// level result is rho = rho~(0) and T = -d/ds Tr rho~(s) at s = 0.

#include <array>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "repsim/elementary.hpp"
#include "repsim/liouville.hpp"

namespace repsim {

inline constexpr double kNoFilter = std::numeric_limits<double>::infinity();

struct LevelSpec1D {
  std::array<DensityState, 2> segments;       // disjoint labels
  std::array<LocalGenerator, 2> segment_decay;  // acts on a waiting segment
  LocalGenerator merged_decay;                  // acts on the merge output for t_m
  SuperOp merge;                                // on modes of both segments
  std::vector<std::string> output_labels;       // relabel the output (empty: keep)
  double nu = 1.0;
  double t_c = 0.0;
  double t_swap = 0.0;
  double tau = kNoFilter;
  double t_m() const { return t_swap + t_c; }
};

struct LevelSpec2D {
  std::array<DensityState, 3> segments;
  std::array<LocalGenerator, 3> segment_decay;  // segment i waiting for a partner
  std::array<LocalGenerator, 3> pair_decay;     // merged pair that excludes k
  LocalGenerator merged_decay;
  std::array<SuperOp, 3> first_merge;   // joins the two segments other than k
  std::array<SuperOp, 3> second_merge;  // attaches segment k
  std::vector<std::string> output_order;   // mode order of the merged state
  std::vector<std::string> output_labels;  // then relabeled (empty: keep)
  double nu = 1.0;
  double t_c = 0.0;
  double t_swap = 0.0;
  double tau1 = kNoFilter;
  double tau2 = kNoFilter;
  double t_m() const { return t_swap + t_c; }
};

struct LevelResult {
  DensityState rho;  // normalized
  double T;          // mean generation time (s)
  double P;          // merging success probability (P1*P2 in 2D)
  double P_nf;       // probability of not filtering (product of stages in 2D)
  std::map<std::string, double> diagnostics;
};

// Unnormalized distribution of the two segments ready for merging (joint
// state, segment 0 modes first). Includes the filter when tau is finite.
DensityState prep_image_1d(const LevelSpec1D& spec, double s);
// Laplace image of the filtration-event density.
double filter_image_1d(const LevelSpec1D& spec, double s);
// Full image of the merged output.
DensityState image_1d(const LevelSpec1D& spec, double s);

LevelResult level_1d_basic(const LevelSpec1D& spec);   // tau = inf, t_m = 0
LevelResult level_1d_comm(const LevelSpec1D& spec);    // tau = inf
LevelResult level_1d_filter(const LevelSpec1D& spec);  // any tau > 0

struct Image2D {
  DensityState value;  // rho~(s), output order/labels applied
  double trace;
  double trace_derivative;  // d/ds Tr rho~(s)
  double P1;                // first-merge success given prepared pair
  double P2;                // second-merge success given prepared triple
};

// Image without filtering or delays, assembled from the per-stage
// propagators; value only (derivative fields are NaN).
Image2D image_2d_basic(const LevelSpec2D& spec, double s);
// Full chain with two filters and merging delays; analytic s-derivative.
Image2D image_2d_full(const LevelSpec2D& spec, double s);

LevelResult level_2d_basic(const LevelSpec2D& spec);
LevelResult level_2d_full(const LevelSpec2D& spec);

struct GenerationPdf {
  std::vector<double> t;
  std::vector<double> r;        // two-pole density
  std::vector<double> poisson;  // (1/T) e^{-t/T}
  double a;                     // poles of the image, a > b
  double b;
  double T;
};
// Time density of a lossless (L = 0) 1D level with success probability P.
GenerationPdf generation_pdf_1d(double P, double nu, const std::vector<double>& t);
GenerationPdf generation_pdf_1d(const LevelSpec1D& spec, const std::vector<double>& t);

}  // namespace repsim
