#include "fedmra/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedmra/error.hpp"

namespace fedmra {

using Json = nlohmann::ordered_json;

CostEstimate estimate_costs(std::uint64_t clients, std::uint64_t rounds, std::uint64_t info_iters,
                            std::uint64_t param_count, std::uint64_t total_client_samples, std::uint64_t num_classes) {
  CostEstimate c;
  c.comm = rounds * (clients * param_count + 2 * num_classes);
  c.client_compute = 2 * rounds * info_iters * total_client_samples;
  c.server_compute = rounds * (clients + 1) * param_count + num_classes;
  c.total = rounds * ((2 * clients + 1) * param_count + 2 * num_classes + 2 * info_iters * total_client_samples) +
            num_classes;
  return c;
}

AllocationRecord AllocationRecord::from_plan(std::size_t task, const MemoryPlan& plan) {
  AllocationRecord r;
  r.task = task;
  r.per_client = plan.per_client;
  r.per_class = plan.per_class;
  r.shortfall = plan.shortfall;
  if (plan.indices) {
    r.b = plan.indices->b;
    r.d = plan.indices->d;
  }
  return r;
}

bool operator==(const ExperimentReport& a, const ExperimentReport& b) {
  return to_kv(a.config) == to_kv(b.config) && a.seed == b.seed && a.scenario == b.scenario &&
         a.per_task == b.per_task && a.a_avg == b.a_avg && a.a_last == b.a_last &&
         a.allocation_trace == b.allocation_trace && a.cost_estimate == b.cost_estimate &&
         a.wall_clock_seconds == b.wall_clock_seconds;
}

std::size_t count_correct(const ModelParams& params, const MlpSpec& spec, std::span<const LabeledSample> samples) {
  if (samples.empty()) return 0;
  Matrix x = features_of(samples);
  x.cols = spec.feature_dim;
  const Matrix logits = forward(params, spec, x);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.cols; ++k) {
      if (logits(r, k) > logits(r, best)) best = k;
    }
    if (best == samples[r].label) ++correct;
  }
  return correct;
}

double evaluate(const ModelParams& params, const MlpSpec& spec, const Dataset& test_set) {
  if (test_set.is_empty()) throw ValidationError("evaluate: empty test set");
  for (const auto& s : test_set.samples()) {
    if (s.label >= spec.num_classes) {
      throw ValidationError("evaluate: test label " + std::to_string(s.label) + " outside head of " +
                            std::to_string(spec.num_classes));
    }
  }
  return static_cast<double>(count_correct(params, spec, test_set.samples())) /
         static_cast<double>(test_set.size());
}

Summary summarize(std::span<const double> per_task_acc) {
  if (per_task_acc.empty()) throw ValidationError("summarize: no task accuracies");
  double sum = 0.0;
  for (double a : per_task_acc) sum += a;
  return {sum / static_cast<double>(per_task_acc.size()), per_task_acc.back()};
}

namespace {

Json to_json(const ExperimentReport& r) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  Json cfg = Json::object();
  for (const auto& [k, v] : to_kv(r.config)) cfg[k] = v;
  j["config"] = std::move(cfg);
  j["seed"] = r.seed;
  j["scenario"] = std::string(to_string(r.scenario));

  Json tasks = Json::array();
  for (const auto& t : r.per_task) {
    tasks.push_back({{"task", t.task}, {"overall_acc", t.overall}, {"per_subset", t.per_subset}});
  }
  j["per_task"] = std::move(tasks);
  j["a_avg"] = r.a_avg;
  j["a_last"] = r.a_last;

  Json trace = Json::array();
  for (const auto& a : r.allocation_trace) {
    Json per_class = Json::array();
    for (const auto& q : a.per_class) {
      Json obj = Json::object();
      for (const auto& [y, n] : q) obj[std::to_string(y)] = n;
      per_class.push_back(std::move(obj));
    }
    trace.push_back({{"task", a.task},
                     {"per_client", a.per_client},
                     {"per_class", std::move(per_class)},
                     {"shortfall", a.shortfall},
                     {"b", a.b},
                     {"d", a.d}});
  }
  j["allocation_trace"] = std::move(trace);
  j["cost_estimate"] = {{"comm", r.cost_estimate.comm},
                        {"client_compute", r.cost_estimate.client_compute},
                        {"server_compute", r.cost_estimate.server_compute},
                        {"total", r.cost_estimate.total}};
  j["wall_clock_seconds"] = r.wall_clock_seconds ? Json(*r.wall_clock_seconds) : Json(nullptr);
  return j;
}

[[noreturn]] void schema_fail(const std::string& msg) { throw ValidationError("report schema: " + msg); }

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) schema_fail(std::string("missing key '") + key + "'");
  return j.at(key);
}

const Json& require_array(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_array()) schema_fail(std::string("'") + key + "' must be an array");
  return v;
}

double require_number(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_number()) schema_fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t require_uint(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    schema_fail(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

template <typename T>
std::vector<T> number_list(const Json& j, const char* key) {
  const Json& v = require_array(j, key);
  std::vector<T> out;
  for (const auto& e : v) {
    if (!e.is_number()) schema_fail(std::string("'") + key + "' must hold numbers");
    out.push_back(e.get<T>());
  }
  return out;
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    schema_fail(std::string("not valid JSON: ") + e.what());
  }
}

void check_consistency(const ExperimentReport& r) {
  if (r.per_task.empty()) schema_fail("per_task is empty");
  std::vector<double> overall;
  for (std::size_t t = 0; t < r.per_task.size(); ++t) {
    const auto& row = r.per_task[t];
    if (row.task != t) schema_fail("per_task entries must be in task order");
    if (row.per_subset.size() != t + 1) schema_fail("per_task[" + std::to_string(t) + "] must hold t+1 subset accuracies");
    if (!(row.overall >= 0.0 && row.overall <= 1.0)) schema_fail("overall_acc outside [0, 1]");
    for (double a : row.per_subset) {
      if (!(a >= 0.0 && a <= 1.0)) schema_fail("subset accuracy outside [0, 1]");
    }
    overall.push_back(row.overall);
  }
  const auto s = summarize(overall);
  if (std::abs(s.a_avg - r.a_avg) > 1e-12) schema_fail("a_avg disagrees with per-task accuracies");
  if (s.a_last != r.a_last) schema_fail("a_last disagrees with the final task accuracy");
  for (const auto& a : r.allocation_trace) {
    if (a.per_class.size() != a.per_client.size() || a.shortfall.size() != a.per_client.size()) {
      schema_fail("allocation_trace entry has mismatched client counts");
    }
    for (std::size_t c = 0; c < a.per_client.size(); ++c) {
      std::uint64_t sum = a.shortfall[c];
      for (const auto& [y, n] : a.per_class[c]) sum += n;
      if (sum != a.per_client[c]) schema_fail("per-class quotas plus shortfall must equal the client share");
    }
  }
}

ExperimentReport from_json(const Json& j) {
  if (!j.is_object()) schema_fail("top level must be an object");
  if (require_uint(j, "schema_version") != static_cast<std::uint64_t>(kReportSchemaVersion)) {
    schema_fail("unsupported schema_version");
  }
  ExperimentReport r;
  const Json& cfg = require(j, "config");
  if (!cfg.is_object()) schema_fail("'config' must be an object");
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& [k, v] : cfg.items()) {
    if (!v.is_string()) schema_fail("config values must be strings");
    kv.emplace_back(k, v.get<std::string>());
  }
  try {
    r.config = from_kv(kv);
  } catch (const ValidationError& e) {
    schema_fail(std::string("config echo: ") + e.what());
  }
  r.seed = require_uint(j, "seed");
  const Json& sc = require(j, "scenario");
  if (!sc.is_string()) schema_fail("'scenario' must be a string");
  RunConfig tmp;
  try {
    set_config_value(tmp, "scenario", sc.get<std::string>());
  } catch (const ValidationError&) {
    schema_fail("unknown scenario");
  }
  r.scenario = tmp.scenario;

  for (const auto& t : require_array(j, "per_task")) {
    TaskAccuracy row;
    row.task = require_uint(t, "task");
    row.overall = require_number(t, "overall_acc");
    row.per_subset = number_list<double>(t, "per_subset");
    r.per_task.push_back(std::move(row));
  }
  r.a_avg = require_number(j, "a_avg");
  r.a_last = require_number(j, "a_last");

  for (const auto& a : require_array(j, "allocation_trace")) {
    AllocationRecord rec;
    rec.task = require_uint(a, "task");
    rec.per_client = number_list<std::uint64_t>(a, "per_client");
    rec.shortfall = number_list<std::uint64_t>(a, "shortfall");
    rec.b = number_list<double>(a, "b");
    rec.d = number_list<double>(a, "d");
    for (const auto& q : require_array(a, "per_class")) {
      if (!q.is_object()) schema_fail("per_class entries must be objects");
      ClassQuotas quotas;
      for (const auto& [y, n] : q.items()) {
        if (!n.is_number_unsigned() && !n.is_number_integer()) schema_fail("per_class quotas must be integers");
        quotas[static_cast<ClassId>(std::stoul(y))] = n.get<std::uint64_t>();
      }
      rec.per_class.push_back(std::move(quotas));
    }
    r.allocation_trace.push_back(std::move(rec));
  }

  const Json& cost = require(j, "cost_estimate");
  r.cost_estimate.comm = require_uint(cost, "comm");
  r.cost_estimate.client_compute = require_uint(cost, "client_compute");
  r.cost_estimate.server_compute = require_uint(cost, "server_compute");
  r.cost_estimate.total = require_uint(cost, "total");

  const Json& wall = require(j, "wall_clock_seconds");
  if (wall.is_number()) {
    r.wall_clock_seconds = wall.get<double>();
  } else if (!wall.is_null()) {
    schema_fail("'wall_clock_seconds' must be a number or null");
  }
  check_consistency(r);
  return r;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) { return to_json(report).dump(2) + "\n"; }

std::string report_to_csv(const ExperimentReport& report) {
  std::string out = "eval_after_task,subset_task,accuracy\n";
  for (const auto& row : report.per_task) {
    for (std::size_t tau = 0; tau < row.per_subset.size(); ++tau) {
      out += std::to_string(row.task) + "," + std::to_string(tau) + "," + format_double(row.per_subset[tau]) + "\n";
    }
  }
  return out;
}

ReportPaths emit_report(const ExperimentReport& report, const std::filesystem::path& dir, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  ReportPaths paths{dir / (stem + ".json"), dir / (stem + ".csv")};
  write_file(paths.json, report_to_json(report));
  write_file(paths.csv, report_to_csv(report));
  return paths;
}

ExperimentReport parse_report_json(const std::string& text) { return from_json(parse_json(text)); }

ExperimentReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_report_json(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void validate_report_json(const std::string& text) { (void)parse_report_json(text); }

}  // namespace fedmra
