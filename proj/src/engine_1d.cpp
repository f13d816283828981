#include <cmath>
#include <stdexcept>

#include "engine_detail.hpp"

namespace repsim {

namespace {

using detail::Propagator;

void validate(const LevelSpec1D& spec) {
  detail::require_rate(spec.nu);
  detail::require_delays(spec.t_c, spec.t_swap);
  detail::require_cutoff(spec.tau, "tau");
}

// sum_i nu^2/(s+2nu) (1 - e^{-(s+nu-L_i)tau}) (s+nu-L_i)^-1 rho_in
DensityState no_filter_image(const LevelSpec1D& spec, double s) {
  const double sp = s + spec.nu;
  std::array<DensityState, 2> waited = spec.segments;
  for (int i = 0; i < 2; ++i) {
    const Propagator prop(spec.segment_decay[i], sp);
    DensityState x = prop.resolve(spec.segments[i]);
    if (std::isfinite(spec.tau)) x = x - prop.evolve(x, spec.tau).scaled(std::exp(-sp * spec.tau));
    waited[i] = x;
  }
  DensityState out = tensor(waited[0], spec.segments[1]) + tensor(spec.segments[0], waited[1]);
  return out.scaled(spec.nu * spec.nu / (sp + spec.nu));
}

LevelResult solve_level(const LevelSpec1D& spec) {
  const DensityState prep = prep_image_1d(spec, 0.0);
  const DensityState merged = apply(spec.merge, prep);
  const double P = merged.trace() / prep.trace();
  if (!(P > 0.0) || !std::isfinite(P)) throw DegenerateProtocol("1D level: merging success probability vanishes");

  const double nu = spec.nu;
  double wait = spec.t_m() + 1.5 / nu;
  double P_nf = 1.0;
  if (std::isfinite(spec.tau)) {
    wait += (spec.t_c + 0.5 / nu) / std::expm1(nu * spec.tau);
    P_nf = -std::expm1(-nu * spec.tau);
  }
  DensityState rho = Propagator::evolve(spec.merged_decay, merged, spec.t_m()).normalized();
  rho = detail::finish_output(std::move(rho), {}, spec.output_labels);
  LevelResult r{std::move(rho), wait / P, P, P_nf, {}};
  r.diagnostics["prep_trace"] = prep.trace();
  return r;
}

}  // namespace

double filter_image_1d(const LevelSpec1D& spec, double s) {
  if (!std::isfinite(spec.tau)) return 0.0;
  const double nu = spec.nu;
  return 2.0 * nu * std::exp(-nu * spec.tau - s * (spec.tau + spec.t_c)) / (s + 2.0 * nu);
}

DensityState prep_image_1d(const LevelSpec1D& spec, double s) {
  validate(spec);
  const double pf = filter_image_1d(spec, s);
  if (!(pf < 1.0)) throw DegenerateProtocol("1D level: filter retry series diverges");
  return no_filter_image(spec, s).scaled(1.0 / (1.0 - pf));
}

DensityState image_1d(const LevelSpec1D& spec, double s) {
  const DensityState prep = prep_image_1d(spec, s);
  const DensityState merged = apply(spec.merge, prep);
  const double denom = std::exp(s * spec.t_m()) - (prep.trace() - merged.trace());
  if (!(denom > 0.0)) throw DegenerateProtocol("1D level: merge retry series diverges");
  DensityState out = Propagator::evolve(spec.merged_decay, merged, spec.t_m()).scaled(1.0 / denom);
  return detail::finish_output(std::move(out), {}, spec.output_labels);
}

LevelResult level_1d_basic(const LevelSpec1D& spec) {
  if (spec.t_c != 0.0 || spec.t_swap != 0.0) throw std::invalid_argument("level_1d_basic: needs t_c = t_swap = 0");
  if (std::isfinite(spec.tau)) throw std::invalid_argument("level_1d_basic: needs tau = inf");
  validate(spec);
  return solve_level(spec);
}

LevelResult level_1d_comm(const LevelSpec1D& spec) {
  if (std::isfinite(spec.tau)) throw std::invalid_argument("level_1d_comm: needs tau = inf");
  validate(spec);
  return solve_level(spec);
}

LevelResult level_1d_filter(const LevelSpec1D& spec) {
  validate(spec);
  return solve_level(spec);
}

GenerationPdf generation_pdf_1d(double P, double nu, const std::vector<double>& t) {
  if (!(P > 0.0 && P <= 1.0)) throw std::invalid_argument("generation_pdf_1d: P must lie in (0, 1]");
  detail::require_rate(nu);
  // image 2 P nu^2 / (s^2 + 3 nu s + 2 P nu^2)
  const double disc = std::sqrt(9.0 * nu * nu - 8.0 * P * nu * nu);
  GenerationPdf out;
  out.t = t;
  out.a = 0.5 * (-3.0 * nu + disc);
  out.b = 0.5 * (-3.0 * nu - disc);
  out.T = 3.0 / (2.0 * P * nu);
  const double c = 2.0 * P * nu * nu / (out.a - out.b);
  out.r.reserve(t.size());
  out.poisson.reserve(t.size());
  for (double ti : t) {
    out.r.push_back(c * (std::exp(out.a * ti) - std::exp(out.b * ti)));
    out.poisson.push_back(std::exp(-ti / out.T) / out.T);
  }
  return out;
}

GenerationPdf generation_pdf_1d(const LevelSpec1D& spec, const std::vector<double>& t) {
  if (!spec.segment_decay[0].is_zero() || !spec.segment_decay[1].is_zero()) {
    throw std::invalid_argument("generation_pdf_1d: needs vanishing segment decay");
  }
  if (spec.t_c != 0.0 || spec.t_swap != 0.0 || std::isfinite(spec.tau)) {
    throw std::invalid_argument("generation_pdf_1d: needs t_c = t_swap = 0 and tau = inf");
  }
  const DensityState prep = prep_image_1d(spec, 0.0);
  return generation_pdf_1d(apply(spec.merge, prep).trace() / prep.trace(), spec.nu, t);
}

}  // namespace repsim
