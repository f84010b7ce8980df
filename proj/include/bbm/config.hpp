#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bbm/process.hpp"

namespace bbm {

enum class ExperimentName { Ergodic, Survival, Phase, Martingale, WindowTail, BridgeCheck, Wave };

std::string_view to_string(ExperimentName name);
/// Accepts the CLI spelling (ergodic, window-tail, ...); throws InvalidConfig.
ExperimentName parse_experiment_name(std::string_view text);

struct ExperimentConfig {
  ExperimentName name = ExperimentName::Ergodic;
  SimConfig sim;
  std::uint64_t replicas = 64;
  std::vector<double> z_grid;
  /// Truncation time added to the window-tail sweep.
  std::optional<double> truncation_time;
  double burn_in_fraction = 0.2;
  std::string output_dir = "out";

  /// Martingale observation times.
  std::vector<double> times;
  /// Window-tail start times s.
  std::vector<double> sweep;
  /// Window-tail level z in {M > z}.
  double level = 0.0;
  /// Barrier slopes of the phase scan.
  std::vector<double> slopes;
  /// Single-lineage trials (survival) or bridges per parameter set
  /// (bridge-check).
  std::uint64_t trials = 100'000;
  double lineage_horizon = 50.0;
  double lineage_step = 0.5;
  double fine_step = 1e-4;
  std::uint64_t bootstrap = 200;
  double wave_step = 0.01;
  double wave_tol = 1e-6;
  double free_z_min = -20.0;
  double free_z_max = 20.0;

  /// Throws InvalidConfig.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Defaults for each experiment (horizon, barrier, grid, replica count).
ExperimentConfig default_config(ExperimentName name);

/// Overlays a TOML file with sections [sim], [barrier] and [experiment] on cfg.
/// Unknown sections or keys, wrong types and a name that differs from
/// cfg.name raise InvalidConfig; unreadable files raise IoError.
void apply_toml_file(ExperimentConfig& cfg, const std::filesystem::path& path);
void apply_toml_text(ExperimentConfig& cfg, std::string_view text);

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Inverse of to_json; throws InvalidConfig.
ExperimentConfig config_from_json(const nlohmann::ordered_json& json);

}  // namespace bbm
