#include "repsim/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace repsim {

namespace {

std::string position(const std::string& source, int line, int column) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(column);
}

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    const YAML::Mark m = n.Mark();
    throw ConfigError(source_, m.line + 1, m.column + 1, msg);
  }

  // Every key of `n` must be in `allowed`.
  void keys(const YAML::Node& n, const std::string& path, const std::set<std::string>& allowed) const {
    if (!n.IsMap()) fail(n, path + ": expected a mapping");
    for (const auto& kv : n) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(kv.first, path + ": unknown key '" + key + "' (allowed: " + list + ")");
      }
    }
  }

  double number(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path + ": expected a number");
    try {
      return n.as<double>();
    } catch (const YAML::BadConversion&) {
      fail(n, path + ": expected a number, got '" + n.Scalar() + "'");
    }
  }

  double positive(const YAML::Node& n, const std::string& path) const {
    const double x = number(n, path);
    if (!(x > 0.0)) fail(n, path + ": must be > 0");
    return x;
  }

  long long integer(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path + ": expected an integer");
    try {
      return n.as<long long>();
    } catch (const YAML::BadConversion&) {
      fail(n, path + ": expected an integer, got '" + n.Scalar() + "'");
    }
  }

  bool boolean(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path + ": expected true or false");
    try {
      return n.as<bool>();
    } catch (const YAML::BadConversion&) {
      fail(n, path + ": expected true or false, got '" + n.Scalar() + "'");
    }
  }

  std::string text(const YAML::Node& n, const std::string& path) const {
    if (!n.IsScalar()) fail(n, path + ": expected a string");
    return n.Scalar();
  }

  // A scalar or a sequence of numbers.
  std::vector<double> numbers(const YAML::Node& n, const std::string& path) const {
    if (n.IsScalar()) return {number(n, path)};
    if (!n.IsSequence() || n.size() == 0) fail(n, path + ": expected a number or a non-empty list");
    std::vector<double> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(number(n[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  Bounds bounds(const YAML::Node& n, const std::string& path, bool log) const {
    if (!n.IsSequence() || n.size() != 2) fail(n, path + ": expected [lo, hi]");
    Bounds b{number(n[0], path + "[0]"), number(n[1], path + "[1]"), log};
    guard(n, path, [&] { b.validate(); });
    return b;
  }

  // Runs a validator and reports its message at n.
  template <class F>
  void guard(const YAML::Node& n, const std::string& path, F&& f) const {
    try {
      f();
    } catch (const std::invalid_argument& e) {
      fail(n, path + ": " + e.what());
    }
  }

 private:
  std::string source_;
};

void read_hardware(const Reader& r, const YAML::Node& n, HardwareParams& hw) {
  r.keys(n, "hardware", {"L0_km", "L_att_km", "f", "d", "v", "eta", "T_coh_ms", "t_s_us", "t_swap_us",
                         "v_c_us_per_km", "n_max"});
  if (n["L0_km"]) hw.L0_km = r.number(n["L0_km"], "hardware.L0_km");
  if (n["L_att_km"]) hw.L_att_km = r.number(n["L_att_km"], "hardware.L_att_km");
  if (n["f"]) hw.f = r.number(n["f"], "hardware.f");
  if (n["d"]) hw.d = r.number(n["d"], "hardware.d");
  if (n["v"]) hw.v = r.number(n["v"], "hardware.v");
  if (n["eta"]) hw.eta = r.number(n["eta"], "hardware.eta");
  if (n["T_coh_ms"]) hw.T_coh_s = r.number(n["T_coh_ms"], "hardware.T_coh_ms") / 1e3;
  if (n["t_s_us"]) hw.t_s = r.number(n["t_s_us"], "hardware.t_s_us") / 1e6;
  if (n["t_swap_us"]) hw.t_swap = r.number(n["t_swap_us"], "hardware.t_swap_us") / 1e6;
  if (n["v_c_us_per_km"]) hw.v_c_s_per_km = r.number(n["v_c_us_per_km"], "hardware.v_c_us_per_km") / 1e6;
  if (n["n_max"]) hw.n_max = static_cast<int>(r.integer(n["n_max"], "hardware.n_max"));
  r.guard(n, "hardware", [&] { hw.validate(); });
}

void read_filter(const Reader& r, const YAML::Node& n, FilterSchedule& f) {
  r.keys(n, "filter", {"tau_ms", "tau2_ms", "nu_tau", "nu_tau2"});
  const bool absolute = n["tau_ms"] || n["tau2_ms"];
  const bool relative = n["nu_tau"] || n["nu_tau2"];
  if (absolute && relative) r.fail(n, "filter: use either tau_ms/tau2_ms or nu_tau/nu_tau2, not both");
  f = FilterSchedule{};
  if (absolute) {
    f.kind = FilterSchedule::Kind::absolute;
    for (const char* key : {"tau_ms", "tau2_ms"}) {
      if (!n[key]) continue;
      auto& dst = std::string(key) == "tau_ms" ? f.tau_s : f.tau2_s;
      for (double t : r.numbers(n[key], std::string("filter.") + key)) dst.push_back(t / 1e3);
    }
  } else if (relative) {
    f.kind = FilterSchedule::Kind::relative;
    if (n["nu_tau"]) f.nu_tau = r.number(n["nu_tau"], "filter.nu_tau");
    if (n["nu_tau2"]) f.nu_tau2 = r.number(n["nu_tau2"], "filter.nu_tau2");
  }
  r.guard(n, "filter", [&] { f.validate(); });
}

void read_optimize(const Reader& r, const YAML::Node& n, OptimizeSettings& s) {
  r.keys(n, "optimize", {"levels", "eps", "filter", "nu_tau", "starts_per_dim", "max_evals", "x_tol", "f_tol", "L_km"});
  if (const auto l = n["levels"]) {
    if (!l.IsSequence() || l.size() == 0) r.fail(l, "optimize.levels: expected a non-empty list");
    s.levels.clear();
    for (std::size_t i = 0; i < l.size(); ++i) {
      s.levels.push_back(static_cast<int>(r.integer(l[i], "optimize.levels[" + std::to_string(i) + "]")));
    }
  }
  if (n["eps"]) s.eps = r.bounds(n["eps"], "optimize.eps", false);
  if (n["filter"]) s.filter = r.boolean(n["filter"], "optimize.filter");
  if (n["nu_tau"]) s.nu_tau = r.bounds(n["nu_tau"], "optimize.nu_tau", true);
  if (n["starts_per_dim"]) s.starts_per_dim = static_cast<int>(r.integer(n["starts_per_dim"], "optimize.starts_per_dim"));
  if (n["max_evals"]) s.nm.max_evals = static_cast<int>(r.integer(n["max_evals"], "optimize.max_evals"));
  if (n["x_tol"]) s.nm.x_tol = r.positive(n["x_tol"], "optimize.x_tol");
  if (n["f_tol"]) s.nm.f_tol = r.positive(n["f_tol"], "optimize.f_tol");
  if (n["L_km"]) s.total_L_km = r.positive(n["L_km"], "optimize.L_km");
  r.guard(n, "optimize", [&] { s.validate(); });
}

void read_sweep(const Reader& r, const YAML::Node& n, RunConfig& cfg) {
  r.keys(n, "sweep", {"L_km", "T_coh_ms"});
  if (n["L_km"]) {
    for (double l : r.numbers(n["L_km"], "sweep.L_km")) {
      if (!(l > 0.0)) r.fail(n["L_km"], "sweep.L_km: distances must be > 0");
      cfg.sweep_L_km.push_back(l);
    }
  }
  if (n["T_coh_ms"]) {
    for (double t : r.numbers(n["T_coh_ms"], "sweep.T_coh_ms")) {
      if (!(t > 0.0)) r.fail(n["T_coh_ms"], "sweep.T_coh_ms: coherence times must be > 0");
      cfg.sweep_T_coh_s.push_back(t / 1e3);
    }
  }
}

void read_montecarlo(const Reader& r, const YAML::Node& n, McSettings& mc) {
  r.keys(n, "montecarlo", {"n_traj", "seed", "max_time_s", "threads"});
  if (n["n_traj"]) {
    const long long k = r.integer(n["n_traj"], "montecarlo.n_traj");
    if (k < 2) r.fail(n["n_traj"], "montecarlo.n_traj: must be >= 2");
    mc.n_traj = static_cast<std::size_t>(k);
  }
  if (n["seed"]) {
    try {
      mc.seed = n["seed"].as<std::uint64_t>();
    } catch (const YAML::BadConversion&) {
      r.fail(n["seed"], "montecarlo.seed: expected a non-negative integer");
    }
  }
  if (n["max_time_s"]) mc.max_time_s = r.positive(n["max_time_s"], "montecarlo.max_time_s");
  if (n["threads"]) {
    const long long t = r.integer(n["threads"], "montecarlo.threads");
    if (t < 0) r.fail(n["threads"], "montecarlo.threads: must be >= 0");
    mc.threads = static_cast<int>(t);
  }
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, int column, const std::string& what)
    : std::runtime_error(position(source, line, column) + ": " + what), line_(line), column_(column) {}

RunConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.mark.column + 1, e.msg);
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  const Reader r(source);
  r.keys(root, "config", {"geometry", "levels", "hardware", "squeezing", "tc_rule", "filter", "objective", "optimize",
                          "sweep", "montecarlo", "pdf", "output"});
  ProtocolConfig& p = cfg.protocol;
  if (const auto g = root["geometry"]) {
    const std::string s = r.text(g, "geometry");
    if (s == "1d") {
      p.geometry = Geometry::one_d;
    } else if (s == "2d") {
      p.geometry = Geometry::two_d;
    } else {
      r.fail(g, "geometry: expected '1d' or '2d', got '" + s + "'");
    }
  }
  if (const auto l = root["levels"]) {
    const long long n = r.integer(l, "levels");
    if (n < 0) r.fail(l, "levels: must be >= 0");
    p.levels = static_cast<int>(n);
  }
  if (root["hardware"]) read_hardware(r, root["hardware"], p.hw);
  if (const auto sq = root["squeezing"]) {
    r.keys(sq, "squeezing", {"eps", "eps_a", "eps_b"});
    for (auto [key, dst] : {std::pair{"eps", &p.eps}, std::pair{"eps_a", &p.eps_a}, std::pair{"eps_b", &p.eps_b}}) {
      if (!sq[key]) continue;
      *dst = r.number(sq[key], std::string("squeezing.") + key);
      if (!(*dst > 0.0 && *dst < 1.0)) r.fail(sq[key], std::string("squeezing.") + key + ": must lie in (0, 1)");
    }
  }
  if (const auto t = root["tc_rule"]) {
    const std::string s = r.text(t, "tc_rule");
    if (s == "doubling") {
      p.tc_rule = TcRule::doubling;
    } else if (s == "none") {
      p.tc_rule = TcRule::none;
    } else {
      r.fail(t, "tc_rule: expected 'doubling' or 'none', got '" + s + "'");
    }
  }
  if (root["filter"]) read_filter(r, root["filter"], p.filter);
  if (const auto o = root["objective"]) {
    r.guard(o, "objective", [&] { cfg.optimize.objective = parse_objective(r.text(o, "objective")); });
  }
  if (root["optimize"]) read_optimize(r, root["optimize"], cfg.optimize);
  if (root["sweep"]) read_sweep(r, root["sweep"], cfg);
  if (root["montecarlo"]) read_montecarlo(r, root["montecarlo"], cfg.mc);
  if (const auto pdf = root["pdf"]) {
    r.keys(pdf, "pdf", {"t_stop_ms", "points"});
    if (pdf["t_stop_ms"]) cfg.pdf.t_stop_s = r.positive(pdf["t_stop_ms"], "pdf.t_stop_ms") / 1e3;
    if (pdf["points"]) {
      const long long k = r.integer(pdf["points"], "pdf.points");
      if (k < 2) r.fail(pdf["points"], "pdf.points: must be >= 2");
      cfg.pdf.points = static_cast<int>(k);
    }
  }
  if (const auto out = root["output"]) {
    r.keys(out, "output", {"json", "csv"});
    if (out["json"]) cfg.out_json = r.text(out["json"], "output.json");
    if (out["csv"]) cfg.out_csv = r.text(out["csv"], "output.csv");
  }
  r.guard(root, "config", [&] { p.validate(); });
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, 0, "cannot read file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace repsim
