#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedmra/config.hpp"
#include "fedmra/report.hpp"
#include "fedmra/server.hpp"

namespace fedmra {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(const std::vector<double>& xs);

struct ModeSummary {
  AllocationMode mode = AllocationMode::dynamic;
  std::size_t runs = 0;
  MeanStd a_avg;
  MeanStd a_last;
};

struct RunOutcome {
  std::vector<ExperimentReport> reports;
  std::vector<ReportPaths> files;
  std::vector<ModeSummary> summaries;  // one per mode that ran
  std::filesystem::path summary_file;
  std::optional<std::filesystem::path> delta_file;  // compare runs only
};

struct RunRequest {
  std::optional<AllocationMode> mode_override;
  bool compare = false;  // run dynamic and fixed_equal for every seed
};

// Runs seeds config.seed .. config.seed + num_seeds - 1, writes
// report_seed<S>_<mode>.{json,csv} per run into config.output_dir, and a
// summary.csv (plus delta.csv when comparing). Every written report is
// read back and checked against the schema and the in-memory result.
RunOutcome run(const RunConfig& config, const RunRequest& request = {}, const ExecOptions& exec = {});

// Keys accepted by sweep().
const std::vector<std::string>& sweepable_keys();

struct SweepRow {
  std::vector<std::pair<std::string, std::string>> settings;  // key -> value
  ModeSummary summary;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::filesystem::path file;
};

// One summary row per value; runs land under output_dir/sweep_<key>_<value>.
SweepTable sweep(const RunConfig& config, const std::string& key, const std::vector<std::string>& values,
                 const RunRequest& request = {}, const ExecOptions& exec = {});

// Cartesian product of several sweeps, first axis outermost.
SweepTable sweep_grid(const RunConfig& config,
                      const std::vector<std::pair<std::string, std::vector<std::string>>>& axes,
                      const RunRequest& request = {}, const ExecOptions& exec = {});

}  // namespace fedmra
