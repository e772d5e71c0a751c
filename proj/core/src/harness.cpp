#include "fedmra/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fedmra/error.hpp"

namespace fedmra {

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string mode_tag(AllocationMode m) { return m == AllocationMode::dynamic ? "dynamic" : "fixed"; }

ModeSummary summarise_mode(AllocationMode mode, const std::vector<ExperimentReport>& reports) {
  std::vector<double> avg, last;
  for (const auto& r : reports) {
    if (r.config.fed.allocation_mode != mode) continue;
    avg.push_back(r.a_avg);
    last.push_back(r.a_last);
  }
  return {mode, avg.size(), mean_std(avg), mean_std(last)};
}

std::string summary_header() { return "mode,runs,a_avg_mean,a_avg_std,a_last_mean,a_last_std\n"; }

std::string summary_line(const ModeSummary& s) {
  return std::string(to_string(s.mode)) + "," + std::to_string(s.runs) + "," + format_double(s.a_avg.mean) + "," +
         format_double(s.a_avg.std) + "," + format_double(s.a_last.mean) + "," + format_double(s.a_last.std) + "\n";
}

}  // namespace

RunOutcome run(const RunConfig& config, const RunRequest& request, const ExecOptions& exec) {
  config.validate();
  std::vector<AllocationMode> modes;
  if (request.compare) {
    modes = {AllocationMode::dynamic, AllocationMode::fixed_equal};
  } else {
    modes = {request.mode_override.value_or(config.fed.allocation_mode)};
  }

  const std::filesystem::path out_dir = config.output_dir;
  RunOutcome outcome;
  for (std::size_t k = 0; k < config.num_seeds; ++k) {
    for (auto mode : modes) {
      RunConfig single = config;
      single.fed.seed = config.fed.seed + k;
      single.fed.allocation_mode = mode;
      single.num_seeds = 1;
      auto report = run_experiment(single, exec);
      const std::string stem = "report_seed" + std::to_string(single.fed.seed) + "_" + mode_tag(mode);
      auto paths = emit_report(report, out_dir, stem);
      ExperimentReport reread = load_report(paths.json);
      if (!(reread == report)) throw ValidationError("report " + paths.json.string() + " does not round-trip");
      outcome.files.push_back(std::move(paths));
      outcome.reports.push_back(std::move(report));
    }
  }

  std::string summary = summary_header();
  for (auto mode : modes) {
    outcome.summaries.push_back(summarise_mode(mode, outcome.reports));
    summary += summary_line(outcome.summaries.back());
  }
  outcome.summary_file = out_dir / "summary.csv";
  write_text(outcome.summary_file, summary);

  if (request.compare) {
    std::string delta = "seed,a_avg_dynamic,a_avg_fixed,a_last_dynamic,a_last_fixed,delta_a_avg,delta_a_last\n";
    std::vector<double> d_avg, d_last;
    for (std::size_t i = 0; i + 1 < outcome.reports.size(); i += 2) {
      const auto& dyn = outcome.reports[i];
      const auto& fix = outcome.reports[i + 1];
      d_avg.push_back(dyn.a_avg - fix.a_avg);
      d_last.push_back(dyn.a_last - fix.a_last);
      delta += std::to_string(dyn.seed) + "," + format_double(dyn.a_avg) + "," + format_double(fix.a_avg) + "," +
               format_double(dyn.a_last) + "," + format_double(fix.a_last) + "," + format_double(d_avg.back()) + "," +
               format_double(d_last.back()) + "\n";
    }
    const auto ma = mean_std(d_avg), ml = mean_std(d_last);
    delta += "mean,,,,," + format_double(ma.mean) + "," + format_double(ml.mean) + "\n";
    delta += "std,,,,," + format_double(ma.std) + "," + format_double(ml.std) + "\n";
    outcome.delta_file = out_dir / "delta.csv";
    write_text(*outcome.delta_file, delta);
  }
  return outcome;
}

const std::vector<std::string>& sweepable_keys() {
  static const std::vector<std::string> keys = {"a", "lambda", "delta", "m_max", "dirichlet_alpha", "M"};
  return keys;
}

SweepTable sweep_grid(const RunConfig& config,
                      const std::vector<std::pair<std::string, std::vector<std::string>>>& axes,
                      const RunRequest& request, const ExecOptions& exec) {
  if (axes.empty()) throw ValidationError("sweep: no sweep axes given");
  std::string name = "sweep";
  for (const auto& [key, values] : axes) {
    const auto& allowed = sweepable_keys();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (const auto& k : allowed) list += (list.empty() ? "" : ", ") + k;
      throw ValidationError("cannot sweep '" + key + "'; sweepable keys: " + list);
    }
    if (values.empty()) throw ValidationError("sweep: no values for '" + key + "'");
    name += "_" + key;
  }
  if (request.compare) throw ValidationError("sweep: --compare cannot be combined with a sweep");

  // Validate every point before running anything.
  std::vector<std::vector<std::pair<std::string, std::string>>> points{{}};
  for (const auto& [key, values] : axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        auto q = p;
        q.emplace_back(key, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  std::vector<RunConfig> configs;
  for (const auto& p : points) {
    RunConfig c = config;
    std::string dir = "sweep";
    for (const auto& [k, v] : p) {
      set_config_value(c, k, v);
      dir += "_" + k + "_" + v;
    }
    c.output_dir = (std::filesystem::path(config.output_dir) / dir).string();
    c.validate();
    configs.push_back(std::move(c));
  }

  SweepTable table;
  std::string csv;
  for (const auto& [key, values] : axes) csv += key + ",";
  csv += "mode,runs,a_avg_mean,a_avg_std,a_last_mean,a_last_std\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto outcome = run(configs[i], request, exec);
    SweepRow row{points[i], outcome.summaries.front()};
    for (const auto& [k, v] : row.settings) csv += v + ",";
    csv += summary_line(row.summary);
    table.rows.push_back(std::move(row));
  }
  table.file = std::filesystem::path(config.output_dir) / (name + ".csv");
  write_text(table.file, csv);
  return table;
}

SweepTable sweep(const RunConfig& config, const std::string& key, const std::vector<std::string>& values,
                 const RunRequest& request, const ExecOptions& exec) {
  return sweep_grid(config, {{key, values}}, request, exec);
}

}  // namespace fedmra
