#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqr/dynamics.hpp"

namespace uqr::cli {

inline const std::vector<std::string> kExperiments{"entropy-top",    "entropy-measure", "balanced-measure",
                                                   "chain-volume",   "ahlfors-scan",    "bihari-selftest",
                                                   "audit-all"};

struct MapSpec {
  std::string family = "toral";  // toral | sphere_power | sheared | identity
  std::vector<std::vector<long long>> matrix{{2, 0}, {0, 2}};
  int degree = 2;
  double shear = 0.1;
  std::string profile = "sine";
  int dim = 2;
};

/// Numeric budgets. Unset optionals are filled per manifold by resolve().
struct Budgets {
  std::optional<int> grid;
  std::optional<long long> random_samples;
  std::vector<int> k_range{1, 2, 3, 4, 5, 6};
  std::vector<double> eps_schedule{0.2, 0.1, 0.05};
  long long mc_samples = 20'000;
  long long centers = 10;
  long long local_samples = 4000;
  std::optional<int> balanced_k;
  std::optional<long long> balanced_samples;
  long long atom_cap = 10'000'000;
  int ks_depth = 4;
  int ks_k = 4;
  long long ks_atoms = 1'000'000;
  std::optional<std::string> ks_measure;  // uniform | balanced
  std::optional<int> ahlfors_k;
  long long ahlfors_centers = 4;
  long long ahlfors_samples = 4000;
  std::vector<double> radii{0.3, 0.2, 0.1, 0.05, 0.02, 0.01};
  std::vector<int> distortion_ks{1, 2, 3, 4, 5, 6};
  long long distortion_samples = 2000;
  long long pointwise_samples = 10'000;
  std::vector<int> pointwise_powers{1, 2, 3};
  long long bihari_instances = 100;
  long long bihari_points = 200;
  bool write_atoms = false;
};

struct Tolerances {
  std::optional<double> entropy;  // |h - log deg|; unset: by anisotropy
  double audit = 0.1;
  double ks = 0.1;
  double balanced_residual = 0.02;
  double box_mass = 0.01;
  double equator_band = 0.95;
  double pole_cap = 1e-3;
  double ahlfors_slope = 0.2;
  double ahlfors_spread = 4.0;
};

struct RunConfig {
  std::string experiment = "audit-all";
  MapSpec map;
  std::uint64_t seed = 1;
  std::string output_dir = "uqr_out";
  Budgets budgets;
  Tolerances tolerances;
};

/// JSON Schema (draft 2020-12 subset) of the run configuration.
const nlohmann::json& config_schema();

/// Throws ConfigError naming the offending path. Supports the keywords used by
/// config_schema(): type, properties, required, additionalProperties, enum,
/// items, minItems, minimum, exclusiveMinimum, maximum.
void validate_against(const nlohmann::json& value, const nlohmann::json& schema, const std::string& path = "$");

/// Validates, then parses. Map construction errors (e.g. a singular matrix)
/// become ConfigError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

dynamics::MapHandle build_map(const MapSpec& spec);

/// Fills manifold-dependent defaults so the resolved config reproduces the run.
RunConfig resolve(RunConfig c);
nlohmann::json to_json(const RunConfig& c);

}  // namespace uqr::cli
