// repsim: command-line front end.
//
// Exit codes: 0 ok, 1 other failure, 2 invalid configuration or arguments,
// 3 numeric failure, 4 Monte Carlo time guard exceeded.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "repsim/config.hpp"
#include "repsim/errors.hpp"
#include "repsim/report.hpp"

using namespace repsim;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool dump_states = false;
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

json key_of(const ProtocolConfig& cfg, const LevelRecord& last) {
  try {
    if (cfg.geometry == Geometry::one_d) {
      const TwoLinkState two = two_link_state(last.result.rho, last.result.T);
      json k = key_json(key_rate(two.rho, two.T_pair, LogicalEncoding::two_link_1d(), cfg.hw.v));
      k["encoding"] = "two_link_1d";
      k["T_pair_s"] = two.T_pair;
      return k;
    }
    json k = key_json(key_rate(last.result.rho, last.result.T, LogicalEncoding::ghz_2d(), cfg.hw.v));
    k["encoding"] = "ghz_2d";
    return k;
  } catch (const DegenerateEncoding& e) {
    return {{"error", e.what()}};
  }
}

int cmd_simulate(const RunConfig& cfg, const Options& o) {
  const auto records = run_protocol(cfg.protocol);
  json j = {{"command", "simulate"},
            {"config", config_json(cfg.protocol)},
            {"levels", records_json(records, o.dump_states)},
            {"key", key_of(cfg.protocol, records.back())}};
  emit(o.out.empty() ? cfg.out_json : o.out, pretty(j));
  return 0;
}

int cmd_mc(const RunConfig& cfg, const Options& o) {
  McSettings mc = cfg.mc;
  if (o.seed_set) mc.seed = o.seed;
  if (o.threads > 0) mc.threads = o.threads;
  const ProtocolModel model(cfg.protocol);
  const auto records = run_protocol(model);
  const McEstimate est = estimate(model, mc);
  json j = mc_json(est, records.back(), o.dump_states);
  j["command"] = "mc";
  j["config"] = config_json(cfg.protocol);
  emit(o.out.empty() ? cfg.out_json : o.out, pretty(j));
  return 0;
}

int cmd_optimize(const RunConfig& cfg, const Options& o) {
  const PointOptimum p = optimize_point(cfg.protocol, cfg.optimize);
  for (const auto& line : p.log) std::cerr << "optimize: " << line << "\n";
  json j = optimum_json(p, o.dump_states);
  j["command"] = "optimize";
  j["objective"] = to_string(cfg.optimize.objective);
  emit(o.out.empty() ? cfg.out_json : o.out, pretty(j));
  return p.found ? 0 : 3;
}

int cmd_sweep(const RunConfig& cfg, const Options& o) {
  if (cfg.sweep_L_km.empty() || cfg.sweep_T_coh_s.empty()) {
    throw ConfigError(o.config, 0, 0, "sweep: needs both L_km and T_coh_ms");
  }
  SweepSpec spec{cfg.protocol, cfg.optimize, cfg.sweep_L_km, cfg.sweep_T_coh_s, o.threads};
  const auto rows = sweep(spec);
  for (const auto& r : rows) {
    for (const auto& line : r.optimum.log) {
      std::cerr << "sweep L=" << r.L_km << " km T_coh=" << r.T_coh_s << " s: " << line << "\n";
    }
  }
  const std::string path = o.out.empty() ? (cfg.out_csv.empty() ? cfg.out_json : cfg.out_csv) : o.out;
  if (ends_with(path, ".json")) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back({{"L_km", r.L_km}, {"T_coh_s", r.T_coh_s}, {"optimum", optimum_json(r.optimum, false)}});
    emit(path, pretty({{"command", "sweep"}, {"objective", to_string(cfg.optimize.objective)}, {"points", arr}}));
  } else {
    emit(path, to_csv(sweep_table(rows)));
  }
  return 0;
}

int cmd_pdf(const RunConfig& cfg, const Options& o) {
  if (cfg.protocol.geometry != Geometry::one_d) throw ConfigError(o.config, 0, 0, "pdf: needs geometry 1d");
  // Level-1 time density from its merge success probability and input rate.
  ProtocolConfig one = cfg.protocol;
  one.levels = 1;
  const ProtocolModel model(one);
  const LevelRecord rec = run_protocol(model).back();
  const double P = rec.result.P, nu = model.nu0();
  const double t_stop = cfg.pdf.t_stop_s > 0.0 ? cfg.pdf.t_stop_s : 10.0 * 3.0 / (2.0 * P * nu);
  std::vector<double> t(cfg.pdf.points);
  for (int i = 0; i < cfg.pdf.points; ++i) t[i] = t_stop * i / (cfg.pdf.points - 1);
  const GenerationPdf pdf = generation_pdf_1d(P, nu, t);
  const std::string path = o.out.empty() ? (cfg.out_csv.empty() ? cfg.out_json : cfg.out_csv) : o.out;
  if (ends_with(path, ".json")) {
    emit(path, pretty({{"command", "pdf"}, {"P", P}, {"nu_per_s", nu}, {"T_s", pdf.T}, {"a", pdf.a}, {"b", pdf.b},
                       {"t_s", pdf.t}, {"density_per_s", pdf.r}, {"poisson_per_s", pdf.poisson}}));
  } else {
    emit(path, to_csv(pdf_table(pdf)));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeater network simulator: semi-analytic engine, Monte Carlo and optimizer"};
  app.require_subcommand(1);
  Options o;
  int (*run)(const RunConfig&, const Options&) = nullptr;

  auto add = [&](const std::string& name, const std::string& help, int (*fn)(const RunConfig&, const Options&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "YAML configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output file (default: output section of the config, else stdout)");
    sub->add_option("--threads", o.threads, "worker threads (default: REPSIM_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--dump-states", o.dump_states, "include density matrices in JSON output");
    sub->callback([&run, fn] { run = fn; });
    return sub;
  };
  add("simulate", "run the level recursion and report every level", cmd_simulate);
  CLI::App* mc = add("mc", "Monte Carlo estimate next to the engine result", cmd_mc);
  mc->add_option("--seed", o.seed, "master seed")->each([&](const std::string&) { o.seed_set = true; });
  add("sweep", "optimize over an (L, T_coh) grid and write a table", cmd_sweep);
  add("optimize", "optimize depth, squeezing and filter at one point", cmd_optimize);
  add("pdf", "level-1 completion-time density and its Poisson approximation", cmd_pdf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = load_config(o.config);
    return run(cfg, o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const McTimeout& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateProtocol& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DegenerateEncoding& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
