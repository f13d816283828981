#pragma once

// Run configuration read from a YAML file. Physical quantities carry their
// unit in the key name; unknown keys are rejected. See docs/config_schema.yaml.

#include <stdexcept>
#include <string>
#include <vector>

#include "repsim/montecarlo.hpp"
#include "repsim/optimize.hpp"
#include "repsim/protocol.hpp"

namespace repsim {

// Schema violation, with 1-based position in the source.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct PdfSettings {
  double t_stop_s = 0.0;  // 0: ten mean times
  int points = 200;
};

struct RunConfig {
  ProtocolConfig protocol;
  OptimizeSettings optimize;  // objective lives here
  std::vector<double> sweep_L_km;
  std::vector<double> sweep_T_coh_s;
  McSettings mc;
  PdfSettings pdf;
  std::string out_json;
  std::string out_csv;
};

RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);  // ConfigError, also for unreadable files

}  // namespace repsim
