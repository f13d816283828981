#include <cmath>
#include <limits>

#include "doctest.h"
#include "repsim/optimize.hpp"

using namespace repsim;

namespace {

OptimizeSettings quick(Objective o, std::vector<int> levels) {
  OptimizeSettings s;
  s.objective = o;
  s.levels = std::move(levels);
  s.starts_per_dim = 2;
  s.nm.max_evals = 60;
  s.nm.x_tol = 1e-4;
  s.nm.f_tol = 1e-8;
  return s;
}

}  // namespace

TEST_CASE("Halton points and bound maps") {
  const auto a = halton(1, 3);
  CHECK(a[0] == 0.5);
  CHECK(a[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(a[2] == doctest::Approx(0.2).epsilon(1e-15));
  const auto b = halton(2, 2);
  CHECK(b[0] == 0.25);
  CHECK(b[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const Bounds lin{0.1, 0.5};
  const Bounds lg{1e-3, 1e2, true};
  CHECK(lin.map(0.5) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(lg.map(0.6) == doctest::Approx(1.0).epsilon(1e-13));
  for (double u : {0.0, 0.3, 1.0}) {
    CHECK(lin.unmap(lin.map(u)) == doctest::Approx(u).epsilon(1e-14));
    CHECK(lg.unmap(lg.map(u)) == doctest::Approx(u).epsilon(1e-13));
  }
  CHECK_THROWS_AS((Bounds{0.0, 1.0, true}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((Bounds{1.0, 1.0}).validate(), std::invalid_argument);
}

TEST_CASE("simplex search finds analytic maximizers") {
  NelderMeadSettings s;
  auto quad = [](const std::vector<double>& u) { return -(u[0] - 0.3) * (u[0] - 0.3); };
  const LocalOptimum one = maximize_box(quad, 1, 5, s);
  CHECK(std::abs(one.u[0] - 0.3) < 1e-6);

  auto bowl = [](const std::vector<double>& u) {
    return 2.0 - (u[0] - 0.2) * (u[0] - 0.2) - 3.0 * (u[1] - 0.7) * (u[1] - 0.7) - (u[0] - 0.2) * (u[1] - 0.7);
  };
  const LocalOptimum two = maximize_box(bowl, 2, 5, s);
  CHECK(std::abs(two.u[0] - 0.2) < 1e-6);
  CHECK(std::abs(two.u[1] - 0.7) < 1e-6);
  CHECK(two.value == doctest::Approx(2.0).epsilon(1e-12));

  // Maximizer on the boundary of the box.
  auto ramp = [](const std::vector<double>& u) { return u[0]; };
  CHECK(maximize_box(ramp, 1, 2, s).u[0] == 1.0);

  // Infeasible region is skipped.
  auto holed = [](const std::vector<double>& u) {
    return u[0] < 0.5 ? -std::numeric_limits<double>::infinity() : -(u[0] - 0.8) * (u[0] - 0.8);
  };
  CHECK(std::abs(maximize_box(holed, 1, 5, s).u[0] - 0.8) < 1e-6);
}

TEST_CASE("without decay and dark counts fidelity prefers the smallest squeezing") {
  ProtocolConfig cfg;
  cfg.hw.T_coh_s = std::numeric_limits<double>::infinity();
  cfg.hw.d = 0.0;
  OptimizeSettings s = quick(Objective::fidelity, {1});
  s.eps = {0.01, 0.02};
  s.filter = false;
  const PointOptimum p = optimize_point(cfg, s);
  REQUIRE(p.found);
  CHECK(p.config.eps == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p.config.filter.kind == FilterSchedule::Kind::none);
}

TEST_CASE("reported optimum re-evaluates to the reported value") {
  ProtocolConfig cfg;
  cfg.hw.T_coh_s = 0.05;
  const PointOptimum p = optimize_point(cfg, quick(Objective::key_rate, {0, 1, 2}));
  REQUIRE(p.found);
  CHECK(p.eval.value > 0.0);
  CHECK(std::abs(evaluate(p.config, Objective::key_rate).value - p.eval.value) <= 1e-9 * p.eval.value);
  CHECK(p.eval.chain.size() == static_cast<std::size_t>(p.config.levels + 1));
  CHECK(p.evaluations > 0);
}

TEST_CASE("filtered key-rate optimum is never below the unfiltered one") {
  ProtocolConfig cfg;
  cfg.hw.T_coh_s = 0.02;
  OptimizeSettings s = quick(Objective::key_rate, {1, 2});
  s.total_L_km = 80.0;
  s.filter = false;
  const double plain = optimize_point(cfg, s).eval.value;
  s.filter = true;
  const PointOptimum f = optimize_point(cfg, s);
  CHECK(f.eval.value >= plain);
  CHECK(f.config.hw.L0_km == doctest::Approx(80.0 / std::ldexp(1.0, f.config.levels)).epsilon(1e-15));
}

TEST_CASE("1x1 sweep equals optimize_point") {
  SweepSpec spec;
  spec.settings = quick(Objective::key_rate, {1});
  spec.L_km = {40.0};
  spec.T_coh_s = {0.05};
  spec.threads = 2;
  const auto rows = sweep(spec);
  REQUIRE(rows.size() == 1);
  ProtocolConfig cfg;
  cfg.hw.T_coh_s = 0.05;
  OptimizeSettings s = spec.settings;
  s.total_L_km = 40.0;
  const PointOptimum p = optimize_point(cfg, s);
  CHECK(rows[0].optimum.eval.value == p.eval.value);
  CHECK(rows[0].optimum.config.eps == p.config.eps);
}

TEST_CASE("key rate does not decrease with coherence time") {
  SweepSpec spec;
  spec.settings = quick(Objective::key_rate, {0, 1, 2});
  spec.L_km = {30.0, 60.0, 90.0};
  spec.T_coh_s = {0.01, 0.1, 1.0};
  const auto rows = sweep(spec);
  REQUIRE(rows.size() == 9);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 1; j < 3; ++j) {
      const double lo = rows[3 * i + j - 1].optimum.eval.value;
      const double hi = rows[3 * i + j].optimum.eval.value;
      CHECK(hi >= lo * (1.0 - 1e-6));
    }
  }
}

TEST_CASE("optimal depth does not decrease with distance at long coherence time") {
  SweepSpec spec;
  spec.settings = quick(Objective::key_rate, {0, 1, 2, 3});
  spec.L_km = {20.0, 100.0, 250.0, 400.0};
  spec.T_coh_s = {1.0};
  const auto rows = sweep(spec);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].optimum.config.levels >= rows[i - 1].optimum.config.levels);
  }
  CHECK(rows.back().optimum.config.levels > rows.front().optimum.config.levels);
}

TEST_CASE("rate-fidelity frontier with and without filtering") {
  ProtocolConfig cfg;
  cfg.hw.L0_km = 150.0;
  cfg.hw.T_coh_s = 0.1;
  const std::vector<double> eps{0.1, 0.2, 0.3, 0.4, 0.5};
  const double inf = std::numeric_limits<double>::infinity();
  const auto plain = rate_fidelity_frontier(cfg, eps, {inf});
  const auto filtered = rate_fidelity_frontier(cfg, eps, {inf, 10.0, 1.0, 0.1, 0.01, 0.001});
  REQUIRE(!plain.empty());
  REQUIRE(!filtered.empty());
  for (std::size_t i = 1; i < filtered.size(); ++i) {
    CHECK(filtered[i].T > filtered[i - 1].T);
    CHECK(filtered[i].fidelity > filtered[i - 1].fidelity);
  }
  CHECK(filtered.back().fidelity > plain.back().fidelity);
  CHECK(std::isfinite(filtered.back().nu_tau));
}

TEST_CASE("settings validation") {
  OptimizeSettings s;
  s.levels.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = OptimizeSettings{};
  s.eps = {0.1, 1.5};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_objective("speed"), std::invalid_argument);
  CHECK(parse_objective("key_rate") == Objective::key_rate);
}
