// Command-line driver: single runs, dynamic-vs-fixed comparisons and
// hyperparameter sweeps over synthetic continual-learning scenarios.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedmra/error.hpp"
#include "fedmra/harness.hpp"

namespace {

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void print_summary(const fedmra::ModeSummary& s) {
  std::cout << to_string(s.mode) << ": runs=" << s.runs << " A_avg=" << s.a_avg.mean << " (sd " << s.a_avg.std
            << ") A_last=" << s.a_last.mean << " (sd " << s.a_last.std << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated continual learning with dynamic exemplar-memory allocation"};

  std::string config_path;
  std::string mode;
  bool compare = false;
  std::vector<std::string> sweep_keys;
  std::vector<std::string> sweep_values;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds;
  std::optional<std::string> out_dir;
  std::size_t threads = 1;
  bool wall_clock = false;
  bool print_config = false;

  app.add_option("--config", config_path, "Key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--mode", mode, "Allocation mode override")
      ->check(CLI::IsMember({"dynamic", "fixed", "fixed_equal"}));
  app.add_flag("--compare", compare, "Run dynamic and fixed allocation for every seed and report deltas");
  app.add_option("--sweep", sweep_keys, "Hyperparameter to sweep (repeat for a grid): a, lambda, delta, m_max, "
                                        "dirichlet_alpha, M");
  app.add_option("--values", sweep_values, "Comma-separated values, one list per --sweep");
  app.add_option("--seed", seed, "First seed");
  app.add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory (overrides FEDMRA_OUTPUT_DIR and the config file)");
  app.add_option("--threads", threads, "Clients trained concurrently within a round")->check(CLI::PositiveNumber);
  app.add_flag("--wall-clock", wall_clock, "Record wall-clock seconds in reports (makes them non-reproducible)");
  app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    fedmra::RunConfig cfg = config_path.empty() ? fedmra::RunConfig{} : fedmra::load_config(config_path);
    if (const char* env = std::getenv("FEDMRA_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    if (out_dir) cfg.output_dir = *out_dir;
    if (seed) cfg.fed.seed = *seed;
    if (seeds) cfg.num_seeds = *seeds;
    cfg.validate();

    if (print_config) {
      std::cout << fedmra::to_config_text(cfg) << "output_dir = " << cfg.output_dir << "\n";
      return 0;
    }

    fedmra::RunRequest request;
    request.compare = compare;
    if (!mode.empty()) {
      request.mode_override = mode == "dynamic" ? fedmra::AllocationMode::dynamic : fedmra::AllocationMode::fixed_equal;
    }
    fedmra::ExecOptions exec{threads, wall_clock};

    if (!sweep_keys.empty()) {
      if (sweep_keys.size() != sweep_values.size()) {
        std::cerr << "error: every --sweep needs a matching --values list\n";
        return 2;
      }
      std::vector<std::pair<std::string, std::vector<std::string>>> axes;
      for (std::size_t i = 0; i < sweep_keys.size(); ++i) axes.emplace_back(sweep_keys[i], split_values(sweep_values[i]));
      const auto table = fedmra::sweep_grid(cfg, axes, request, exec);
      for (const auto& row : table.rows) {
        for (const auto& [k, v] : row.settings) std::cout << k << "=" << v << " ";
        print_summary(row.summary);
      }
      std::cout << "sweep table: " << table.file.string() << "\n";
      return 0;
    }
    if (!sweep_values.empty()) {
      std::cerr << "error: --values given without --sweep\n";
      return 2;
    }

    const auto outcome = fedmra::run(cfg, request, exec);
    for (const auto& s : outcome.summaries) print_summary(s);
    std::cout << "summary: " << outcome.summary_file.string() << "\n";
    if (outcome.delta_file) std::cout << "deltas: " << outcome.delta_file->string() << "\n";
    return 0;
  } catch (const fedmra::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
