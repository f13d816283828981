#include <cmath>
#include <stdexcept>

#include "engine_detail.hpp"

namespace repsim {

namespace {

using detail::Propagator;

// Value and first s-derivative.
struct Jet {
  double v = 0.0;
  double d = 0.0;
};

Jet operator*(Jet a, Jet b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Jet operator+(Jet a, Jet b) { return {a.v + b.v, a.d + b.d}; }
Jet operator-(Jet a, Jet b) { return {a.v - b.v, a.d - b.d}; }
Jet inverse(Jet a) { return {1.0 / a.v, -a.d / (a.v * a.v)}; }

struct StateJet {
  DensityState v;
  DensityState d;
  Jet trace() const { return {v.trace(), d.trace()}; }
};

StateJet operator*(Jet a, const StateJet& x) {
  return {x.v.scaled(a.v), x.d.scaled(a.v) + x.v.scaled(a.d)};
}

constexpr std::array<std::array<int, 2>, 3> kPairs{{{1, 2}, {0, 2}, {0, 1}}};

void validate(const LevelSpec2D& spec) {
  detail::require_rate(spec.nu);
  detail::require_delays(spec.t_c, spec.t_swap);
  detail::require_cutoff(spec.tau1, "tau1");
  detail::require_cutoff(spec.tau2, "tau2");
}

// (1 - e^{-(sigma - L) tau}) (sigma - L)^-1 x as a jet in s, sigma = s + shift.
// x itself may depend on s.
StateJet filtered_resolvent(const LocalGenerator& gen, double sigma, double tau, const StateJet& x) {
  const Propagator prop(gen, sigma);
  const DensityState rx = prop.resolve(x.v);
  const DensityState r2x = prop.resolve(rx);
  const DensityState rxd = prop.resolve(x.d);
  StateJet out{rx, rxd - r2x};
  if (std::isfinite(tau)) {
    const double e = std::exp(-sigma * tau);
    const DensityState erx = prop.evolve(rx, tau);
    out.v = out.v - erx.scaled(e);
    out.d = out.d + erx.scaled(tau * e) + prop.evolve(r2x, tau).scaled(e) - prop.evolve(rxd, tau).scaled(e);
  }
  return out;
}

StateJet merge_jet(const SuperOp& op, const StateJet& a, const DensityState& b) {
  return {apply(op, {&a.v, &b}), apply(op, {&a.d, &b})};
}

StateJet evolve_jet(const LocalGenerator& gen, const StateJet& x, double t) {
  return {Propagator::evolve(gen, x.v, t), Propagator::evolve(gen, x.d, t)};
}

}  // namespace

Image2D image_2d_full(const LevelSpec2D& spec, double s) {
  validate(spec);
  const double nu = spec.nu;
  const double t_m = spec.t_m();

  // Stage 1: two of the three segments become ready.
  std::vector<StateJet> waited;
  for (int i = 0; i < 3; ++i) {
    const DensityState zero = spec.segments[i].scaled(0.0);
    waited.push_back(filtered_resolvent(spec.segment_decay[i], s + 2.0 * nu, spec.tau1, {spec.segments[i], zero}));
  }
  const Jet c{nu * nu / (s + 3.0 * nu), -nu * nu / ((s + 3.0 * nu) * (s + 3.0 * nu))};
  Jet pf1;
  if (std::isfinite(spec.tau1)) {
    pf1.v = 3.0 * nu * std::exp(-2.0 * nu * spec.tau1 - s * (spec.tau1 + spec.t_c)) / (s + 3.0 * nu);
    pf1.d = pf1.v * (-(spec.tau1 + spec.t_c) - 1.0 / (s + 3.0 * nu));
  }
  if (!(pf1.v < 1.0)) throw DegenerateProtocol("2D level: first filter retry series diverges");
  const Jet a = c * inverse(Jet{1.0, 0.0} - pf1);

  std::vector<StateJet> merged1;
  Jet prep1_total;
  Jet merged1_total;
  for (int k = 0; k < 3; ++k) {
    const auto [i, j] = kPairs[k];
    const SuperOp& m = spec.first_merge[k];
    const StateJet gi = merge_jet(m, waited[i], spec.segments[j]);
    StateJet gj{apply(m, {&spec.segments[i], &waited[j].v}), apply(m, {&spec.segments[i], &waited[j].d})};
    merged1.push_back(a * StateJet{gi.v + gj.v, gi.d + gj.d});
    const Jet ti = waited[i].trace() * Jet{spec.segments[j].trace(), 0.0};
    const Jet tj = waited[j].trace() * Jet{spec.segments[i].trace(), 0.0};
    prep1_total = prep1_total + a * (ti + tj);
    merged1_total = merged1_total + merged1[k].trace();
  }
  const Jet d1 = Jet{std::exp(s * t_m), t_m * std::exp(s * t_m)} - (prep1_total - merged1_total);
  if (!(d1.v > 0.0)) throw DegenerateProtocol("2D level: first merge retry series diverges");
  const Jet inv_d1 = inverse(d1);

  // Stage 2: the remaining segment becomes ready.
  std::vector<StateJet> pair;
  Jet pair_total;
  for (int k = 0; k < 3; ++k) {
    pair.push_back(inv_d1 * evolve_jet(spec.pair_decay[k], merged1[k], t_m));
    pair_total = pair_total + pair[k].trace();
  }
  Jet pf2;
  if (std::isfinite(spec.tau2)) {
    const double g = std::exp(-nu * spec.tau2 - s * (spec.tau2 + spec.t_c));
    pf2 = Jet{g, -(spec.tau2 + spec.t_c) * g} * pair_total;
  }
  if (!(pf2.v < 1.0)) throw DegenerateProtocol("2D level: second filter retry series diverges");
  const Jet b = Jet{nu, 0.0} * inverse(Jet{1.0, 0.0} - pf2);

  Jet prep2_total;
  Jet merged2_total;
  std::optional<StateJet> sum;
  for (int k = 0; k < 3; ++k) {
    const StateJet prep2 = b * filtered_resolvent(spec.pair_decay[k], s + nu, spec.tau2, pair[k]);
    StateJet out = merge_jet(spec.second_merge[k], prep2, spec.segments[k]);
    if (!spec.output_order.empty()) out = {permute(out.v, spec.output_order), permute(out.d, spec.output_order)};
    prep2_total = prep2_total + prep2.trace();
    merged2_total = merged2_total + out.trace();
    if (sum) {
      sum->v += out.v;
      sum->d += out.d;
    } else {
      sum = std::move(out);
    }
  }
  const Jet d2 = Jet{std::exp(s * t_m), t_m * std::exp(s * t_m)} - (prep2_total - merged2_total);
  if (!(d2.v > 0.0)) throw DegenerateProtocol("2D level: second merge retry series diverges");

  const Jet tr = merged2_total * inverse(d2);
  DensityState value = Propagator::evolve(spec.merged_decay, sum->v, t_m).scaled(1.0 / d2.v);
  value = detail::finish_output(std::move(value), {}, spec.output_labels);
  return {std::move(value), tr.v, tr.d, merged1_total.v / prep1_total.v, merged2_total.v / prep2_total.v};
}

Image2D image_2d_basic(const LevelSpec2D& spec, double s) {
  validate(spec);
  if (spec.t_c != 0.0 || spec.t_swap != 0.0) throw std::invalid_argument("2D basic level: needs t_c = t_swap = 0");
  if (std::isfinite(spec.tau1) || std::isfinite(spec.tau2)) {
    throw std::invalid_argument("2D basic level: needs tau1 = tau2 = inf");
  }
  const double nu = spec.nu;

  // Y_k(s): successful first merges of the pair excluding k.
  std::array<DensityState, 3> waited = spec.segments;
  for (int i = 0; i < 3; ++i) waited[i] = Propagator(spec.segment_decay[i], s + 2.0 * nu).resolve(spec.segments[i]);
  const double c = nu * nu / (s + 3.0 * nu);
  std::array<DensityState, 3> y = spec.segments;
  double fail1 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const auto [i, j] = kPairs[k];
    const SuperOp& m = spec.first_merge[k];
    y[k] = (apply(m, {&waited[i], &spec.segments[j]}) + apply(m, {&spec.segments[i], &waited[j]})).scaled(c);
    const double attempted = c * (waited[i].trace() * spec.segments[j].trace() +
                                  spec.segments[i].trace() * waited[j].trace());
    fail1 += attempted - y[k].trace();
  }
  if (!(fail1 < 1.0)) throw DegenerateProtocol("2D level: first merge retry series diverges");

  // sigma(s): successful second merges; fail2(s): failed ones.
  double fail2 = 0.0;
  double success1 = 0.0;
  double attempted2 = 0.0;
  std::optional<DensityState> sigma;
  for (int k = 0; k < 3; ++k) {
    success1 += y[k].trace();
    const DensityState pair = y[k].scaled(1.0 / (1.0 - fail1));
    const DensityState z = Propagator(spec.pair_decay[k], s + nu).resolve(pair).scaled(nu);
    DensityState out = apply(spec.second_merge[k], {&z, &spec.segments[k]});
    if (!spec.output_order.empty()) out = permute(out, spec.output_order);
    attempted2 += z.trace() * spec.segments[k].trace();
    fail2 += z.trace() * spec.segments[k].trace() - out.trace();
    if (sigma) {
      *sigma += out;
    } else {
      sigma = std::move(out);
    }
  }
  if (!(fail2 < 1.0)) throw DegenerateProtocol("2D level: second merge retry series diverges");
  DensityState value = sigma->scaled(1.0 / (1.0 - fail2));
  const double tr = value.trace();
  value = detail::finish_output(std::move(value), {}, spec.output_labels);
  const double prep1_total = success1 + fail1;
  return {std::move(value), tr, std::nan(""), success1 / prep1_total, (attempted2 - fail2) / attempted2};
}

LevelResult level_2d_basic(const LevelSpec2D& spec) {
  const Image2D img = image_2d_basic(spec, 0.0);
  if (!(img.P1 > 0.0) || !(img.P2 > 0.0)) throw DegenerateProtocol("2D level: merging success probability vanishes");
  const double T = (5.0 + 6.0 * img.P1) / (6.0 * img.P1 * img.P2 * spec.nu);
  LevelResult r{img.value.normalized(), T, img.P1 * img.P2, 1.0, {}};
  r.diagnostics["P1"] = img.P1;
  r.diagnostics["P2"] = img.P2;
  r.diagnostics["image_trace"] = img.trace;
  return r;
}

LevelResult level_2d_full(const LevelSpec2D& spec) {
  const Image2D img = image_2d_full(spec, 0.0);
  if (!(img.P1 > 0.0) || !(img.P2 > 0.0)) throw DegenerateProtocol("2D level: merging success probability vanishes");
  const double nu = spec.nu;
  const double pnf1 = std::isfinite(spec.tau1) ? -std::expm1(-2.0 * nu * spec.tau1) : 1.0;
  const double pnf2 = std::isfinite(spec.tau2) ? -std::expm1(-nu * spec.tau2) : 1.0;
  LevelResult r{img.value.normalized(), -img.trace_derivative, img.P1 * img.P2, pnf1 * pnf2, {}};
  r.diagnostics["P1"] = img.P1;
  r.diagnostics["P2"] = img.P2;
  r.diagnostics["P_nf1"] = pnf1;
  r.diagnostics["P_nf2"] = pnf2;
  r.diagnostics["image_trace"] = img.trace;
  return r;
}

}  // namespace repsim
