#include "fedmra/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fedmra/error.hpp"

namespace fedmra {

std::string_view to_string(AllocationMode m) {
  return m == AllocationMode::dynamic ? "dynamic" : "fixed_equal";
}

std::string_view to_string(ScenarioKind s) {
  switch (s) {
    case ScenarioKind::fcil: return "FCIL";
    case ScenarioKind::fdil: return "FDIL";
    case ScenarioKind::fcdil: return "FCDIL";
  }
  return "?";
}

std::string_view to_string(DiffMetric d) { return d == DiffMetric::l2 ? "l2" : "cosine"; }

void FederationConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (num_clients == 0) fail("num_clients must be positive");
  if (rounds_per_task == 0) fail("rounds_per_task must be positive");
  if (local_epochs == 0) fail("local_epochs must be positive");
  if (info_model_iters == 0) fail("info_model_iters must be positive");
  if (m_max == 0) fail("m_max must be positive");
  if (m_min > m_max) {
    fail("m_min (" + std::to_string(m_min) + ") must not exceed m_max (" + std::to_string(m_max) +
         ")");
  }
  if (num_clients * m_min > pool) {
    fail("num_clients * m_min (" + std::to_string(num_clients * m_min) + ") exceeds M (" +
         std::to_string(pool) + ")");
  }
  if (!(mix_a >= 0.0 && mix_a <= 1.0)) fail("a must lie in [0, 1]");
  if (!(momentum_lambda > 0.0 && momentum_lambda < 1.0)) fail("lambda must lie strictly inside (0, 1)");
  if (!(info_lr > 0.0) || !std::isfinite(info_lr)) fail("info_lr must be positive");
  if (!(mg_weight >= 0.0) || !std::isfinite(mg_weight)) fail("delta must be non-negative");
  if (!(train_lr > 0.0) || !std::isfinite(train_lr)) fail("train_lr must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
}

void RunConfig::validate() const {
  fed.validate();
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (class_counts.empty()) fail("class_counts must not be empty");
  for (auto n : class_counts) {
    if (n == 0) fail("class_counts entries must be positive");
  }
  if (num_domains == 0) fail("num_domains must be positive");
  if (scenario == ScenarioKind::fcil && num_domains != 1) fail("FCIL requires num_domains = 1");
  if (scenario == ScenarioKind::fdil && class_counts.size() != 1) {
    fail("FDIL takes a single class_counts entry (the shared class universe)");
  }
  if (scenario == ScenarioKind::fcdil && num_domains > class_counts.size()) {
    fail("FCDIL needs at least one task per domain");
  }
  if (per_class_samples < 2) fail("per_class_samples must be at least 2");
  if (feature_dim < 2) fail("feature_dim must be at least 2");
  if (hidden.empty()) fail("hidden must list at least one layer width");
  for (auto w : hidden) {
    if (w == 0) fail("hidden layer widths must be positive");
  }
  if (!(dirichlet_alpha > 0.0) || !std::isfinite(dirichlet_alpha)) fail("dirichlet_alpha must be positive");
  if (!(class_separation > 0.0) || !std::isfinite(class_separation)) fail("class_separation must be positive");
  if (!std::isfinite(domain_shift)) fail("domain_shift must be finite");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) fail("test_fraction must lie in [0, 1)");
  if (num_seeds == 0) fail("num_seeds must be at least 1");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError("key '" + std::string(key) + "': expected a non-negative integer, got '" +
                          std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ValidationError("key '" + std::string(key) + "': expected a real number, got '" +
                          std::string(v) + "'");
  }
  return out;
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_unsigned<std::size_t>(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ValidationError("key '" + std::string(key) + "': empty list");
  return out;
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

struct KeyDef {
  std::string name;
  void (*set)(RunConfig&, std::string_view key, std::string_view value);
  std::string (*get)(const RunConfig&);
};

#define FEDMRA_UINT_KEY(NAME, FIELD, TYPE)                                                 \
  KeyDef {                                                                                 \
    NAME, [](RunConfig& c, std::string_view k, std::string_view v) {                       \
      c.FIELD = parse_unsigned<TYPE>(k, v);                                                \
    },                                                                                     \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                         \
  }
#define FEDMRA_REAL_KEY(NAME, FIELD)                                                         \
  KeyDef {                                                                                   \
    NAME, [](RunConfig& c, std::string_view k, std::string_view v) { c.FIELD = parse_real(k, v); }, \
        [](const RunConfig& c) { return format_double(c.FIELD); }                            \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      FEDMRA_UINT_KEY("seed", fed.seed, std::uint64_t),
      KeyDef{"scenario",
             [](RunConfig& c, std::string_view k, std::string_view v) {
               if (v == "FCIL" || v == "fcil") c.scenario = ScenarioKind::fcil;
               else if (v == "FDIL" || v == "fdil") c.scenario = ScenarioKind::fdil;
               else if (v == "FCDIL" || v == "fcdil") c.scenario = ScenarioKind::fcdil;
               else throw ValidationError("key '" + std::string(k) + "': unknown scenario '" + std::string(v) + "'");
             },
             [](const RunConfig& c) { return std::string(to_string(c.scenario)); }},
      KeyDef{"class_counts",
             [](RunConfig& c, std::string_view k, std::string_view v) { c.class_counts = parse_list(k, v); },
             [](const RunConfig& c) { return join(c.class_counts); }},
      FEDMRA_UINT_KEY("num_domains", num_domains, std::size_t),
      FEDMRA_UINT_KEY("per_class_samples", per_class_samples, std::size_t),
      FEDMRA_UINT_KEY("feature_dim", feature_dim, std::size_t),
      KeyDef{"hidden",
             [](RunConfig& c, std::string_view k, std::string_view v) { c.hidden = parse_list(k, v); },
             [](const RunConfig& c) { return join(c.hidden); }},
      FEDMRA_REAL_KEY("dirichlet_alpha", dirichlet_alpha),
      FEDMRA_REAL_KEY("class_separation", class_separation),
      FEDMRA_REAL_KEY("domain_shift", domain_shift),
      FEDMRA_REAL_KEY("test_fraction", test_fraction),
      FEDMRA_UINT_KEY("num_clients", fed.num_clients, std::size_t),
      FEDMRA_UINT_KEY("rounds_per_task", fed.rounds_per_task, std::size_t),
      FEDMRA_UINT_KEY("local_epochs", fed.local_epochs, std::size_t),
      FEDMRA_UINT_KEY("info_model_iters", fed.info_model_iters, std::size_t),
      FEDMRA_UINT_KEY("M", fed.pool, std::uint64_t),
      FEDMRA_UINT_KEY("m_min", fed.m_min, std::uint64_t),
      FEDMRA_UINT_KEY("m_max", fed.m_max, std::uint64_t),
      FEDMRA_REAL_KEY("a", fed.mix_a),
      FEDMRA_REAL_KEY("lambda", fed.momentum_lambda),
      FEDMRA_REAL_KEY("info_lr", fed.info_lr),
      FEDMRA_REAL_KEY("delta", fed.mg_weight),
      FEDMRA_REAL_KEY("train_lr", fed.train_lr),
      FEDMRA_UINT_KEY("batch_size", fed.batch_size, std::size_t),
      KeyDef{"allocation_mode",
             [](RunConfig& c, std::string_view k, std::string_view v) {
               if (v == "dynamic") c.fed.allocation_mode = AllocationMode::dynamic;
               else if (v == "fixed_equal" || v == "fixed") c.fed.allocation_mode = AllocationMode::fixed_equal;
               else throw ValidationError("key '" + std::string(k) + "': unknown allocation mode '" + std::string(v) + "'");
             },
             [](const RunConfig& c) { return std::string(to_string(c.fed.allocation_mode)); }},
      KeyDef{"diff_metric",
             [](RunConfig& c, std::string_view k, std::string_view v) {
               if (v == "l2") c.fed.diff_metric = DiffMetric::l2;
               else if (v == "cosine") c.fed.diff_metric = DiffMetric::cosine;
               else throw ValidationError("key '" + std::string(k) + "': unknown diff metric '" + std::string(v) + "'");
             },
             [](const RunConfig& c) { return std::string(to_string(c.fed.diff_metric)); }},
      FEDMRA_UINT_KEY("num_seeds", num_seeds, std::size_t),
      KeyDef{"output_dir",
             [](RunConfig& c, std::string_view, std::string_view v) { c.output_dir = std::string(v); },
             [](const RunConfig& c) { return c.output_dir; }},
  };
  return table;
}

#undef FEDMRA_UINT_KEY
#undef FEDMRA_REAL_KEY

const KeyDef* find_key(std::string_view key) {
  for (const auto& def : key_table()) {
    if (def.name == key) return &def;
  }
  return nullptr;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& def : key_table()) out.push_back(def.name);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const KeyDef* def = find_key(key);
  if (!def) throw ValidationError("unknown config key '" + std::string(key) + "'");
  def->set(cfg, key, trim(value));
}

RunConfig parse_config_text(std::string_view text, std::string_view source) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(where + ": expected 'key = value', got '" + std::string(line) + "'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) {
      throw ValidationError(where + ": key '" + std::string(key) + "' given twice");
    }
    try {
      set_config_value(cfg, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

std::vector<std::pair<std::string, std::string>> to_kv(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& def : key_table()) {
    if (def.name == "output_dir") continue;
    out.emplace_back(def.name, def.get(cfg));
  }
  return out;
}

RunConfig from_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
  RunConfig cfg;
  for (const auto& [k, v] : kv) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_kv(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace fedmra
