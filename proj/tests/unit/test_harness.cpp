#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "doctest.h"
#include "fedmra/error.hpp"
#include "fedmra/harness.hpp"

using namespace fedmra;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("fedmra_harness_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig quick(const fs::path& out) {
  RunConfig cfg;
  cfg.per_class_samples = 30;
  cfg.class_counts = {3, 2};
  cfg.fed.rounds_per_task = 1;
  cfg.fed.local_epochs = 1;
  cfg.fed.pool = 200;
  cfg.fed.m_max = 60;
  cfg.output_dir = out.string();
  return cfg;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("mean_std") {
  const auto one = mean_std({0.5});
  CHECK(one.mean == 0.5);
  CHECK(one.std == 0.0);
  const auto two = mean_std({1.0, 3.0});
  CHECK(two.mean == 2.0);
  CHECK(two.std == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("a single seed writes one report pair") {
  const auto dir = scratch("single");
  const auto out = run(quick(dir));
  CHECK(out.reports.size() == 1);
  CHECK(count_files(dir, ".json") == 1);
  CHECK(fs::exists(dir / "report_seed0_dynamic.json"));
  CHECK(fs::exists(dir / "report_seed0_dynamic.csv"));
  CHECK(count_lines(out.summary_file) == 2);
  CHECK_FALSE(out.delta_file.has_value());
  fs::remove_all(dir);
}

TEST_CASE("mode override") {
  const auto dir = scratch("override");
  const auto out = run(quick(dir), RunRequest{AllocationMode::fixed_equal, false});
  REQUIRE(out.reports.size() == 1);
  CHECK(fs::exists(dir / "report_seed0_fixed.json"));
  for (const auto& rec : out.reports[0].allocation_trace) CHECK(rec.per_client == std::vector<std::uint64_t>(5, 40));
  fs::remove_all(dir);
}

TEST_CASE("compare runs pair every seed") {
  const auto dir = scratch("compare");
  auto cfg = quick(dir);
  cfg.num_seeds = 2;
  cfg.fed.seed = 7;
  const auto out = run(cfg, RunRequest{std::nullopt, true});
  CHECK(out.reports.size() == 4);
  for (const char* f : {"report_seed7_dynamic.json", "report_seed7_fixed.json", "report_seed8_dynamic.json",
                        "report_seed8_fixed.json"}) {
    CHECK(fs::exists(dir / f));
  }
  REQUIRE(out.delta_file.has_value());
  CHECK(count_lines(*out.delta_file) == 1 + 2 + 2);
  CHECK(count_lines(out.summary_file) == 3);
  CHECK(out.summaries.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("the config echo reproduces the run") {
  const auto dir = scratch("replay");
  auto cfg = quick(dir);
  cfg.fed.seed = 21;
  const auto first = run(cfg);
  const auto echo = load_report(first.files[0].json).config;
  auto again = echo;
  again.output_dir = (dir / "again").string();
  const auto second = run(again);
  CHECK(slurp(first.files[0].json) == slurp(second.files[0].json));
  CHECK(slurp(first.files[0].csv) == slurp(second.files[0].csv));
  fs::remove_all(dir);
}

TEST_CASE("sweeps") {
  const auto dir = scratch("sweep");
  const auto cfg = quick(dir);

  const auto table = sweep(cfg, "delta", {"0", "0.1", "0.5"});
  CHECK(table.rows.size() == 3);
  CHECK(count_lines(table.file) == 4);
  CHECK(fs::exists(dir / "sweep_delta_0.5" / "report_seed0_dynamic.json"));

  const auto grid = sweep_grid(cfg, {{"a", {"0.4", "0.8"}}, {"lambda", {"0.4", "0.8"}}});
  REQUIRE(grid.rows.size() == 4);
  CHECK(grid.rows[1].settings == std::vector<std::pair<std::string, std::string>>{{"a", "0.4"}, {"lambda", "0.8"}});

  CHECK_THROWS_WITH_AS(sweep(cfg, "hidden", {"8"}), doctest::Contains("sweepable keys: a, lambda"), ValidationError);
  CHECK_THROWS_AS(sweep(cfg, "m_max", {"0"}), ValidationError);
  CHECK_THROWS_AS(sweep(cfg, "delta", {}), ValidationError);
  fs::remove_all(dir);
}

#ifdef FEDMRA_CLI_PATH
namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(FEDMRA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  const auto cfg_path = dir / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << "class_counts = 3, 2\nper_class_samples = 30\nrounds_per_task = 1\nlocal_epochs = 1\n"
        << "M = 200\nm_max = 60\nnum_seeds = 1\n";
  }
  const std::string base = "--config " + cfg_path.string() + " --out ";

  CHECK(cli(base + (dir / "one").string()) == 0);
  CHECK(count_files(dir / "one", ".json") == 1);
  CHECK(count_files(dir / "one", ".csv") == 2);

  CHECK(cli(base + (dir / "cmp").string() + " --compare --seeds 2 --threads 3") == 0);
  CHECK(count_files(dir / "cmp", ".json") == 4);
  CHECK(fs::exists(dir / "cmp" / "delta.csv"));

  CHECK(cli(base + (dir / "sw").string() + " --sweep m_max --values 40,50,60") == 0);
  CHECK(count_lines(dir / "sw" / "sweep_m_max.csv") == 4);

  CHECK(cli(base + (dir / "bad").string() + " --sweep hidden --values 8") == 1);
  CHECK(cli(base + (dir / "bad").string() + " --sweep delta") == 2);
  CHECK(cli("--mode sideways") == 2);
  CHECK(cli("--no-such-flag") == 2);
  CHECK(cli("--config " + (dir / "missing.cfg").string()) == 2);

  {
    std::ofstream out(dir / "broken.cfg");
    out << "m_min = 500\n";
  }
  CHECK(cli("--config " + (dir / "broken.cfg").string() + " --out " + (dir / "bad").string()) == 1);
  CHECK(cli("--print-config") == 0);
  fs::remove_all(dir);
}
#endif
