#include "repsim/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace repsim {

using nlohmann::json;

namespace {

// Non-finite values (no filter, infinite coherence) become null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

const char* geometry_name(Geometry g) { return g == Geometry::one_d ? "1d" : "2d"; }

}  // namespace

json state_json(const DensityState& rho) {
  json re = json::array(), im = json::array();
  const CMatrix& m = rho.matrix();
  for (Index i = 0; i < m.rows(); ++i) {
    json rr = json::array(), ri = json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ri.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  return {{"modes", rho.space().labels()}, {"n_max", rho.space().n_max()}, {"dim", m.rows()}, {"real", re}, {"imag", im}};
}

DensityState state_from_json(const json& j) {
  const ModeSpace sp = memory_space(j.at("n_max").get<int>(), j.at("modes").get<std::vector<std::string>>());
  const Index d = j.at("dim").get<Index>();
  if (d != sp.dim()) throw std::invalid_argument("state dimension does not match its modes");
  CMatrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index k = 0; k < d; ++k) m(i, k) = cplx(j.at("real").at(i).at(k).get<double>(), j.at("imag").at(i).at(k).get<double>());
  return DensityState(sp, m);
}

json config_json(const ProtocolConfig& cfg) {
  const HardwareParams& hw = cfg.hw;
  json filter = {{"kind", cfg.filter.kind == FilterSchedule::Kind::none       ? "none"
                          : cfg.filter.kind == FilterSchedule::Kind::absolute ? "absolute"
                                                                               : "relative"}};
  if (cfg.filter.kind == FilterSchedule::Kind::absolute) {
    filter["tau_s"] = cfg.filter.tau_s;
    filter["tau2_s"] = cfg.filter.tau2_s;
  } else if (cfg.filter.kind == FilterSchedule::Kind::relative) {
    filter["nu_tau"] = num(cfg.filter.nu_tau);
    filter["nu_tau2"] = num(cfg.filter.nu_tau2);
  }
  return {{"geometry", geometry_name(cfg.geometry)},
          {"levels", cfg.levels},
          {"eps", cfg.eps},
          {"eps_a", cfg.eps_a},
          {"eps_b", cfg.eps_b},
          {"tc_rule", cfg.tc_rule == TcRule::doubling ? "doubling" : "none"},
          {"filter", filter},
          {"hardware",
           {{"L0_km", hw.L0_km},
            {"L_att_km", hw.L_att_km},
            {"f", hw.f},
            {"d", hw.d},
            {"v", hw.v},
            {"eta", hw.eta},
            {"T_coh_s", num(hw.T_coh_s)},
            {"t_s_s", hw.t_s},
            {"t_swap_s", hw.t_swap},
            {"v_c_s_per_km", hw.v_c_s_per_km},
            {"n_max", hw.n_max}}}};
}

json record_json(const LevelRecord& r, bool dump_state) {
  json j = {{"level", r.level},
            {"fidelity", r.fidelity},
            {"T_s", r.result.T},
            {"rate_per_s", 1.0 / r.result.T},
            {"P", r.result.P},
            {"P_nf", r.result.P_nf},
            {"nu_in_per_s", r.nu_in},
            {"t_c_s", r.t_c},
            {"tau_s", num(r.tau)},
            {"tau2_s", num(r.tau2)},
            {"diagnostics", json::object()}};
  for (const auto& [k, v] : r.result.diagnostics) j["diagnostics"][k] = num(v);
  if (dump_state) j["state"] = state_json(r.result.rho);
  return j;
}

json records_json(const std::vector<LevelRecord>& records, bool dump_states) {
  json out = json::array();
  for (const auto& r : records) out.push_back(record_json(r, dump_states));
  return out;
}

json key_json(const KeyRateReport& k) {
  json lambda = {{"plus", k.lambda.plus}, {"minus", k.lambda.minus}};
  return {{"P_Pi", k.P_Pi},
          {"lambda", lambda},
          {"Q_Z", k.errors.Q_Z},
          {"Q_X", k.errors.Q_X},
          {"Q_AB", k.errors.Q_AB},
          {"r_inf", k.r_inf},
          {"K_bits_per_s", k.K}};
}

json optimum_json(const PointOptimum& p, bool dump_states) {
  json j = {{"found", p.found}, {"evaluations", p.evaluations}, {"log", p.log}};
  if (!p.found) return j;
  j["config"] = config_json(p.config);
  j["value"] = p.eval.value;
  j["fidelity"] = p.eval.fidelity;
  j["T_s"] = p.eval.T;
  j["key_rate_bits_per_s"] = p.eval.key_rate;
  j["levels"] = records_json(p.eval.chain, dump_states);
  return j;
}

json mc_json(const McEstimate& mc, const LevelRecord& engine, bool dump_states) {
  json log = json::array();
  for (std::size_t l = 0; l < mc.log.size(); ++l) {
    log.push_back({{"level", l},
                   {"attempts", mc.log[l].attempts},
                   {"filtrations", mc.log[l].filtrations},
                   {"merge_failures", mc.log[l].merge_failures}});
  }
  auto z = [](double a, double b, double se) { return se > 0.0 ? num((a - b) / se) : json(nullptr); };
  json j = {{"n_traj", mc.n_traj},
            {"seed", mc.seed},
            {"fidelity", mc.fidelity},
            {"fidelity_stderr", mc.fidelity_stderr},
            {"T_s", mc.T},
            {"T_stderr_s", mc.T_stderr},
            {"rate_per_s", mc.rate},
            {"rate_stderr_per_s", mc.rate_stderr},
            {"events", log},
            {"engine", record_json(engine, false)},
            {"z_fidelity", z(engine.fidelity, mc.fidelity, mc.fidelity_stderr)},
            {"z_rate", z(1.0 / engine.result.T, mc.rate, mc.rate_stderr)}};
  if (dump_states) j["state"] = state_json(mc.rho);
  return j;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string to_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += '\n';
  }
  return out;
}

CsvTable sweep_table(const std::vector<SweepRow>& rows) {
  CsvTable t{{"L_km", "T_coh_s", "found", "levels", "eps", "eps_a", "eps_b", "nu_tau", "nu_tau2", "value", "fidelity",
              "T_s", "key_rate_bits_per_s"},
             {}};
  const double nan = std::nan("");
  for (const auto& r : rows) {
    const PointOptimum& p = r.optimum;
    if (!p.found) {
      t.rows.push_back({r.L_km, r.T_coh_s, 0.0, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan});
      continue;
    }
    const FilterSchedule& f = p.config.filter;
    const bool rel = f.kind == FilterSchedule::Kind::relative;
    t.rows.push_back({r.L_km, r.T_coh_s, 1.0, static_cast<double>(p.config.levels), p.config.eps, p.config.eps_a,
                      p.config.eps_b, rel ? f.nu_tau : kNoFilter, rel ? f.nu_tau2 : kNoFilter, p.eval.value,
                      p.eval.fidelity, p.eval.T, p.eval.key_rate});
  }
  return t;
}

CsvTable pdf_table(const GenerationPdf& pdf) {
  CsvTable t{{"t_s", "density_per_s", "poisson_per_s"}, {}};
  for (std::size_t i = 0; i < pdf.t.size(); ++i) t.rows.push_back({pdf.t[i], pdf.r[i], pdf.poisson[i]});
  return t;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace repsim
