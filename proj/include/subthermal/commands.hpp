#pragma once

// Batch commands behind the `subthermal` executable. Each command writes
// CSV (or trace) files and returns a process exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "subthermal/distributions.hpp"
#include "subthermal/pipeline.hpp"
#include "subthermal/simulator.hpp"

namespace subthermal::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInvalidArguments = 2,
  kInputFormat = 3,
  kStatisticalFailure = 4,
};

struct PmfOptions {
  SubtractionConfig cfg;
  double muD = 0.0;  // total dark-count mean over the observed modes
  double tail_tol = 1e-12;
  std::filesystem::path out;
};

struct FiguresOptions {
  std::string fig_id;
  double mu0 = 0.24;
  double muD_per_mode = 0.0015;
  std::filesystem::path out_dir;
};

struct SimulateOptions {
  SimConfig sim;
  std::filesystem::path out;
  std::filesystem::path summary;  // empty: <out stem>_summary.csv
};

struct SynthOptions {
  TraceConfig trace;
  std::filesystem::path out;
};

struct AnalyzeOptions {
  std::filesystem::path trace_path;
  unsigned M = 1;
  unsigned m = 1;
  std::vector<unsigned> K_list{0, 1, 2, 3, 4, 5};
  double mu0 = 0.24;
  double muD_per_mode = 0.0015;
  unsigned thin_period = 48;
  std::int64_t tau_ns = 10'000;  // for raw event files only
  bool fit_mu0 = false;
  unsigned bootstrap_reps = 200;
  double min_expected = 5.0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool fail_on_reject = false;
  std::filesystem::path report;
  std::filesystem::path histogram;  // empty: <report stem>_hist.csv
};

struct MomentsOptions {
  SubtractionConfig cfg;
  double muD = 0.0;
  std::filesystem::path out;
};

/// One row of the analysis report.
struct AnalyzeRow {
  unsigned K = 0;
  std::size_t samples = 0;
  bool sufficient = false;
  bool rejected = false;
  double mu0 = 0.0;
  GofReport gof;
  EstimateReport estimate;
  Moments theory;  // includes the dark-count shift
};

/// Runs the grouping/conditioning/testing chain on an already binned trace.
std::vector<AnalyzeRow> analyze_trace(const BinnedTrace& trace, const AnalyzeOptions& options);

int cmd_pmf(const PmfOptions& options, std::ostream& err);
int cmd_figures(const FiguresOptions& options, std::ostream& err);
int cmd_simulate(const SimulateOptions& options, std::ostream& err);
int cmd_synth(const SynthOptions& options, std::ostream& err);
int cmd_analyze(const AnalyzeOptions& options, std::ostream& err);
int cmd_moments(const MomentsOptions& options, std::ostream& err);

/// Parses argv (args[0] is the program name) and dispatches.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace subthermal::cli
