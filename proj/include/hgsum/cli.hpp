#pragma once

#include "hgsum/config.hpp"
#include "hgsum/training.hpp"

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgsum {

// Parses `argv` (config file first, then flag overrides), runs the command and
// maps errors to exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Thrown by parse_run_config for -h/--help; what() is the help text.
struct HelpRequested : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags layered over an optional --config file; exposed for tests.
RunConfig parse_run_config(int argc, const char* const* argv);

struct TrainArtifacts {
  std::string checkpoint;
  std::string metrics;
  std::string config;
};
TrainArtifacts cmd_train(const RunConfig& cfg, std::ostream& out);

struct SummaryRecord {
  std::string id;
  std::string summary;
};
std::vector<SummaryRecord> cmd_summarize(const RunConfig& cfg, std::ostream& out);

struct EvalReport {
  RougeTriple mean;  // F1 in [0, 1]
  double mean_length = 0.0;
  std::size_t clusters = 0;
};
EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out);

struct KSweepRow {
  double k = 0.0;
  double mean_length = 0.0;
  RougeTriple rouge;
};
std::vector<KSweepRow> cmd_ksweep(const RunConfig& cfg, std::ostream& out);

struct GraphDumpReport {
  std::size_t clusters = 0;
  std::size_t violations = 0;
};
GraphDumpReport cmd_graph(const RunConfig& cfg, std::ostream& out);

}  // namespace hgsum
