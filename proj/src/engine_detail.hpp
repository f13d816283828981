#pragma once

#include <cmath>
#include <optional>

#include "repsim/engine.hpp"
#include "repsim/errors.hpp"

namespace repsim::detail {

// Resolvent (s - L)^-1 and semigroup e^{Lt} of a local generator. An empty
// generator acts as L = 0.
class Propagator {
 public:
  Propagator(const LocalGenerator& gen, double s) : gen_(gen), s_(s) {
    if (!gen.is_zero()) res_.emplace(gen.assemble(), s);
  }
  DensityState resolve(const DensityState& rho) const {
    if (!res_) {
      if (s_ == 0.0) throw NumericFailure("resolvent: singular system (L = 0, s = 0)", INFINITY);
      return rho.scaled(1.0 / s_);
    }
    return res_->apply(rho);
  }
  DensityState evolve(const DensityState& rho, double t) const { return evolve(gen_, rho, t); }
  static DensityState evolve(const LocalGenerator& gen, const DensityState& rho, double t) {
    if (gen.is_zero() || t == 0.0) return rho;
    return gen.exponential(t).apply(rho);
  }

 private:
  const LocalGenerator& gen_;
  double s_;
  std::optional<Resolvent> res_;
};

inline void require_rate(double nu) {
  if (!(std::isfinite(nu) && nu > 0.0)) throw std::invalid_argument("generation rate nu must be finite and > 0");
}

inline void require_delays(double t_c, double t_swap) {
  if (!(std::isfinite(t_c) && t_c >= 0.0)) throw std::invalid_argument("t_c must be finite and >= 0");
  if (!(std::isfinite(t_swap) && t_swap >= 0.0)) throw std::invalid_argument("t_swap must be finite and >= 0");
}

inline void require_cutoff(double tau, const char* name) {
  if (!(tau > 0.0)) throw std::invalid_argument(std::string(name) + " must be > 0");
}

inline DensityState finish_output(DensityState rho, const std::vector<std::string>& order,
                                  const std::vector<std::string>& labels) {
  if (!order.empty()) rho = permute(rho, order);
  if (!labels.empty()) rho = rho.relabeled(labels);
  return rho;
}

}  // namespace repsim::detail
