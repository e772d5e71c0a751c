#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedmra/allocator.hpp"
#include "fedmra/config.hpp"
#include "fedmra/data.hpp"
#include "fedmra/mlp.hpp"

namespace fedmra {

inline constexpr int kReportSchemaVersion = 1;

// Operand values of the big-O cost expressions, with unit per-sample cost.
struct CostEstimate {
  std::uint64_t comm = 0;            // R (C P + 2 |Y|)
  std::uint64_t client_compute = 0;  // 2 R e sum_c |D_c|
  std::uint64_t server_compute = 0;  // R (C + 1) P + |Y|
  std::uint64_t total = 0;           // R ((2C + 1) P + 2 |Y| + 2 e sum_c |D_c|) + |Y|

  friend bool operator==(const CostEstimate&, const CostEstimate&) = default;
};

CostEstimate estimate_costs(std::uint64_t clients, std::uint64_t rounds, std::uint64_t info_iters,
                            std::uint64_t param_count, std::uint64_t total_client_samples, std::uint64_t num_classes);

// Accuracy of the global model after finishing task `task`.
struct TaskAccuracy {
  std::size_t task = 0;
  double overall = 0.0;             // on the union of test splits 0..task
  std::vector<double> per_subset;   // per_subset[tau]: on task tau's test split

  friend bool operator==(const TaskAccuracy&, const TaskAccuracy&) = default;
};

// The allocation made at the boundary after `task`.
struct AllocationRecord {
  std::size_t task = 0;
  std::vector<std::uint64_t> per_client;
  std::vector<ClassQuotas> per_class;
  std::vector<std::uint64_t> shortfall;
  std::vector<double> b;  // empty in fixed_equal mode
  std::vector<double> d;

  static AllocationRecord from_plan(std::size_t task, const MemoryPlan& plan);
  friend bool operator==(const AllocationRecord&, const AllocationRecord&) = default;
};

struct ExperimentReport {
  RunConfig config;  // resolved config of this single run (num_seeds = 1)
  std::uint64_t seed = 0;
  ScenarioKind scenario = ScenarioKind::fcil;
  std::vector<TaskAccuracy> per_task;
  double a_avg = 0.0;
  double a_last = 0.0;
  std::vector<AllocationRecord> allocation_trace;
  CostEstimate cost_estimate;
  std::optional<double> wall_clock_seconds;

  // accuracy_matrix(t, tau) for tau <= t.
  double accuracy(std::size_t t, std::size_t tau) const { return per_task.at(t).per_subset.at(tau); }

  friend bool operator==(const ExperimentReport& a, const ExperimentReport& b);
};

// Top-1 accuracy of the model on `test_set`.
double evaluate(const ModelParams& params, const MlpSpec& spec, const Dataset& test_set);

// Number of test samples classified correctly.
std::size_t count_correct(const ModelParams& params, const MlpSpec& spec, std::span<const LabeledSample> samples);

struct Summary {
  double a_avg = 0.0;
  double a_last = 0.0;
};
Summary summarize(std::span<const double> per_task_acc);

struct ReportPaths {
  std::filesystem::path json;
  std::filesystem::path csv;
};

// Writes <dir>/<stem>.json (the structured report) and <dir>/<stem>.csv
// (eval_after_task, subset_task, accuracy). Creates `dir` if needed.
ReportPaths emit_report(const ExperimentReport& report, const std::filesystem::path& dir, const std::string& stem);

std::string report_to_json(const ExperimentReport& report);
std::string report_to_csv(const ExperimentReport& report);

// Parses and schema-checks a structured report. Throws ValidationError
// (schema) or IoError (file access).
ExperimentReport parse_report_json(const std::string& text);
ExperimentReport load_report(const std::filesystem::path& path);

// Checks a structured report's keys, types and internal consistency
// (matrix shape, a_avg/a_last against per-task accuracies).
void validate_report_json(const std::string& text);

}  // namespace fedmra
