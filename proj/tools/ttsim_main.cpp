// Experiment runner: simulates one system preset over an arrival-rate sweep
// and writes per-request CSV, summary JSON and a sweep table.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ttsim/config_file.hpp"
#include "ttsim/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive parallel MCTS serving simulator"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string rates;
  std::string out_dir;
  std::string save_workload;
  bool print_config = false;
  bool trace = false;
  app.add_option("--config", config_path, "Experiment config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for workload and arrivals (overrides the file)");
  app.add_option("--preset", preset, "beam | vanilla | pe | pe_ne | pe_ne_boost");
  app.add_option("--rates", rates, "Comma-separated arrival rates in requests/s");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--save-workload", save_workload, "Write the generated workload as JSON and exit");
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");
  app.add_flag("--trace", trace, "Write a JSON Lines event log per rate");
  CLI11_PARSE(app, argc, argv);

  try {
    ttsim::ExperimentConfig config;
    if (!config_path.empty()) {
      config = ttsim::apply_config_file(ttsim::ConfigFile::load(config_path));
    }
    if (seed) config.seed = *seed;
    if (!preset.empty()) config.preset = ttsim::parse_preset(preset);
    if (!rates.empty()) config.arrival_rates = ttsim::parse_double_list(rates);
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (trace) config.trace = true;
    config.validate();

    if (print_config) {
      std::cout << ttsim::format_config(config);
      return 0;
    }
    if (!save_workload.empty()) {
      const auto workload = ttsim::build_workload(config);
      std::ofstream out(save_workload, std::ios::binary);
      out << ttsim::workload_to_json(workload) << '\n';
      if (!out) throw ttsim::InvalidArgument("cannot write " + save_workload);
      return 0;
    }
    for (const auto& path : ttsim::run_experiment(config)) {
      std::cout << path.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "ttsim: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
