#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ttsim/backend.hpp"
#include "ttsim/config_file.hpp"
#include "ttsim/metrics.hpp"
#include "ttsim/simulator.hpp"

namespace ttsim {

// The five compared systems.
enum class SystemPreset { Beam, Vanilla, Pe, PeNe, PeNeBoost };

struct PresetFlags {
  SystemKind system = SystemKind::Mcts;
  bool positive_exit = false;
  bool negative_exit = false;
  bool boosting = false;
};

constexpr PresetFlags preset_flags(SystemPreset preset) noexcept {
  switch (preset) {
    case SystemPreset::Beam: return {SystemKind::Beam, true, false, false};
    case SystemPreset::Vanilla: return {SystemKind::Mcts, false, false, false};
    case SystemPreset::Pe: return {SystemKind::Mcts, true, false, false};
    case SystemPreset::PeNe: return {SystemKind::Mcts, true, true, false};
    case SystemPreset::PeNeBoost: return {SystemKind::Mcts, true, true, true};
  }
  return {};
}

struct WorkloadConfig {
  int count = 500;
  WorkloadMixture mixture;
  WorkloadProfile profile;
  // When set, problems are read from this JSON file instead of generated.
  std::string file;
};

struct ExperimentConfig {
  SystemPreset preset = SystemPreset::PeNeBoost;
  std::uint64_t seed = 7;
  std::vector<double> arrival_rates{0.5, 1.0, 2.0};
  std::filesystem::path output_dir = "results";
  bool trace = false;
  WorkloadConfig workload;
  // Module settings. Exit, boosting and system flags are overwritten by the
  // preset in effective_simulation().
  SimulationConfig sim;

  void validate() const;
};

// Applies every entry of `file` on top of `base`. Unknown sections or keys and
// out-of-range values raise ConfigError naming the offending line.
ExperimentConfig apply_config_file(const ConfigFile& file, ExperimentConfig base = {});

SimulationConfig effective_simulation(const ExperimentConfig& config);

// Effective configuration in the config-file format, preset flags included.
std::string format_config(const ExperimentConfig& config);

std::vector<SyntheticProblemSpec> build_workload(const ExperimentConfig& config);

struct RateRun {
  double rate = 0.0;
  SimulationResult result;
  SummaryStats summary;
  std::string trace;  // empty unless config.trace
};

// One simulation per arrival rate; rates run concurrently on independent state.
std::vector<RateRun> run_sweep(const ExperimentConfig& config);

std::string sweep_table_csv(SystemPreset preset, const std::vector<RateRun>& runs);

// Runs the sweep and writes <preset>_<rate>.csv, <preset>_<rate>.json and
// <preset>_sweep.csv (plus <preset>_<rate>.trace.jsonl with tracing). Nothing
// is written unless every run succeeds. Returns the written paths.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config);

std::string rate_label(double rate);
std::string_view to_string(SystemPreset preset) noexcept;
SystemPreset parse_preset(std::string_view text);

}  // namespace ttsim
