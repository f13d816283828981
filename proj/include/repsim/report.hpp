#pragma once

// Machine-readable results: JSON records and CSV tables.
//
// Density matrices are written as
//   {"modes": [labels], "n_max": n, "dim": d, "real": [[...]], "imag": [[...]]}
// with "real"/"imag" row-major (one inner array per row) in the basis where
// the last mode's occupation varies fastest.

#include <string>
#include <vector>

#include "json.hpp"
#include "repsim/engine.hpp"
#include "repsim/keyrate.hpp"
#include "repsim/montecarlo.hpp"
#include "repsim/optimize.hpp"
#include "repsim/protocol.hpp"

namespace repsim {

nlohmann::json state_json(const DensityState& rho);
DensityState state_from_json(const nlohmann::json& j);

nlohmann::json config_json(const ProtocolConfig& cfg);
nlohmann::json record_json(const LevelRecord& r, bool dump_state);
nlohmann::json records_json(const std::vector<LevelRecord>& records, bool dump_states);
nlohmann::json key_json(const KeyRateReport& k);
nlohmann::json optimum_json(const PointOptimum& p, bool dump_states);

// Monte Carlo estimate next to the engine's last level, with z-scores
// (engine - MC) / SE for fidelity and rate.
nlohmann::json mc_json(const McEstimate& mc, const LevelRecord& engine, bool dump_states);

// Shortest round-trip decimal form.
std::string format_number(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
std::string to_csv(const CsvTable& t);

CsvTable sweep_table(const std::vector<SweepRow>& rows);
CsvTable pdf_table(const GenerationPdf& pdf);

void write_text(const std::string& path, const std::string& text);  // std::runtime_error on I/O failure

}  // namespace repsim
