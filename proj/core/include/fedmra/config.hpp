#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedmra {

enum class AllocationMode { dynamic, fixed_equal };
enum class ScenarioKind { fcil, fdil, fcdil };
// How the server reduces a local-vs-global parameter delta to a scalar.
enum class DiffMetric { l2, cosine };

std::string_view to_string(AllocationMode m);
std::string_view to_string(ScenarioKind s);
std::string_view to_string(DiffMetric d);

// Protocol knobs shared by the server and the clients.
struct FederationConfig {
  std::size_t num_clients = 5;
  std::size_t rounds_per_task = 5;
  std::size_t local_epochs = 2;
  std::size_t info_model_iters = 3;
  std::uint64_t pool = 1200;  // exemplar slots shared by all clients
  std::uint64_t m_min = 0;
  std::uint64_t m_max = 400;
  double mix_a = 0.4;            // global-vs-local weight in the class split
  double momentum_lambda = 0.4;  // info-model coefficient, q = (1-l)/(2l)
  double info_lr = 0.001;
  double mg_weight = 0.1;  // weight of the output-magnitude penalty
  double train_lr = 0.05;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  AllocationMode allocation_mode = AllocationMode::dynamic;
  DiffMetric diff_metric = DiffMetric::l2;

  // Throws ValidationError naming the offending key(s).
  void validate() const;
};

// Everything needed to reproduce one experiment from scratch.
struct RunConfig {
  FederationConfig fed;
  ScenarioKind scenario = ScenarioKind::fcil;
  std::vector<std::size_t> class_counts{4, 3, 3, 3};
  std::size_t num_domains = 1;
  std::size_t per_class_samples = 200;
  std::size_t feature_dim = 16;
  std::vector<std::size_t> hidden{32, 16};
  double dirichlet_alpha = 1.0;
  double class_separation = 3.0;  // lattice spacing between class means
  double domain_shift = 2.0;      // mean translation per domain step
  double test_fraction = 0.2;
  std::size_t num_seeds = 1;
  std::string output_dir = "results";

  void validate() const;
};

// Assign one key from its textual value. Throws ValidationError for an
// unknown key or an unparsable value.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

// All recognised keys, in echo order.
const std::vector<std::string>& config_keys();

// Parses `key = value` lines; `#` starts a comment. Unknown keys, repeated
// keys and malformed lines are errors that name the line. The result is
// validated.
RunConfig parse_config_text(std::string_view text, std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// Fully resolved key/value view. output_dir is omitted: it says where
// results go, not what they are.
std::vector<std::pair<std::string, std::string>> to_kv(const RunConfig& cfg);
RunConfig from_kv(const std::vector<std::pair<std::string, std::string>>& kv);
std::string to_config_text(const RunConfig& cfg);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace fedmra
