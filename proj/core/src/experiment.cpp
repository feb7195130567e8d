#include "ttsim/experiment.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ttsim/errors.hpp"

namespace ttsim {
namespace {

using Setter = std::function<void(const ConfigFile&, const ConfigEntry&, ExperimentConfig&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
  std::string section;
  std::string key;
  Setter set;
  Getter get;
};

std::string quote(std::string_view s) { return fmt::format("\"{}\"", s); }
std::string show(double v) { return fmt::format("{}", v); }
std::string show(bool v) { return v ? "true" : "false"; }

double positive(const ConfigFile& f, const ConfigEntry& e) {
  const double v = f.as_double(e);
  if (!(v > 0.0)) f.fail(e, fmt::format("'{}' must be positive", e.key));
  return v;
}

double non_negative(const ConfigFile& f, const ConfigEntry& e) {
  const double v = f.as_double(e);
  if (!(v >= 0.0)) f.fail(e, fmt::format("'{}' must be non-negative", e.key));
  return v;
}

double unit(const ConfigFile& f, const ConfigEntry& e) {
  const double v = f.as_double(e);
  if (!(v >= 0.0 && v <= 1.0)) f.fail(e, fmt::format("'{}' must lie in [0, 1]", e.key));
  return v;
}

int positive_int(const ConfigFile& f, const ConfigEntry& e) {
  const auto v = f.as_int(e);
  if (v < 1 || v > 1'000'000'000) f.fail(e, fmt::format("'{}' must be a positive integer", e.key));
  return static_cast<int>(v);
}

template <typename T>
auto parsed(const ConfigFile& f, const ConfigEntry& e, T (*parse)(std::string_view)) {
  try {
    return parse(f.as_string(e));
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& ex) {
    f.fail(e, ex.what());
  }
}

void add_difficulty_fields(std::vector<Field>& fields, const std::string& name,
                           DifficultyProfile WorkloadProfile::*member) {
  const std::string section = "workload." + name;
  auto prof = [member](ExperimentConfig& c) -> DifficultyProfile& { return c.workload.profile.*member; };
  auto cprof = [member](const ExperimentConfig& c) -> const DifficultyProfile& {
    return c.workload.profile.*member;
  };
  auto range_fields = [&](const std::string& prefix, RewardRange RewardProfile::*range) {
    fields.push_back({section, prefix + "_lo",
                      [=](const ConfigFile& f, const ConfigEntry& e, ExperimentConfig& c) {
                        (prof(c).rewards.*range).lo = unit(f, e);
                      },
                      [=](const ExperimentConfig& c) { return show((cprof(c).rewards.*range).lo); }});
    fields.push_back({section, prefix + "_hi",
                      [=](const ConfigFile& f, const ConfigEntry& e, ExperimentConfig& c) {
                        (prof(c).rewards.*range).hi = unit(f, e);
                      },
                      [=](const ExperimentConfig& c) { return show((cprof(c).rewards.*range).hi); }});
  };
  fields.push_back({section, "depth_min",
                    [=](const ConfigFile& f, const ConfigEntry& e, ExperimentConfig& c) {
                      prof(c).depth_range.min = positive_int(f, e);
                    },
                    [=](const ExperimentConfig& c) { return std::to_string(cprof(c).depth_range.min); }});
  fields.push_back({section, "depth_max",
                    [=](const ConfigFile& f, const ConfigEntry& e, ExperimentConfig& c) {
                      prof(c).depth_range.max = positive_int(f, e);
                    },
                    [=](const ExperimentConfig& c) { return std::to_string(cprof(c).depth_range.max); }});
  range_fields("golden", &RewardProfile::golden);
  range_fields("other", &RewardProfile::other);
  range_fields("lure", &RewardProfile::lure);
  fields.push_back({section, "lure_depth",
                    [=](const ConfigFile& f, const ConfigEntry& e, ExperimentConfig& c) {
                      const auto v = f.as_int(e);
                      if (v < 0 || v > 1000) f.fail(e, "'lure_depth' must lie in [0, 1000]");
                      prof(c).rewards.lure_depth = static_cast<int>(v);
                    },
                    [=](const ExperimentConfig& c) { return std::to_string(cprof(c).rewards.lure_depth); }});
  fields.push_back({section, "terminal_probability",
                    [=](const ConfigFile& f, const ConfigEntry& e, ExperimentConfig& c) {
                      prof(c).rewards.terminal_probability = unit(f, e);
                    },
                    [=](const ExperimentConfig& c) { return show(cprof(c).rewards.terminal_probability); }});
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    using C = ExperimentConfig;
    using F = ConfigFile;
    using E = ConfigEntry;

    t.push_back({"experiment", "preset",
                 [](const F& f, const E& e, C& c) { c.preset = parsed(f, e, parse_preset); },
                 [](const C& c) { return quote(to_string(c.preset)); }});
    t.push_back({"experiment", "seed", [](const F& f, const E& e, C& c) { c.seed = f.as_u64(e); },
                 [](const C& c) { return std::to_string(c.seed); }});
    t.push_back({"experiment", "arrival_rates",
                 [](const F& f, const E& e, C& c) {
                   c.arrival_rates = f.as_double_list(e);
                   if (c.arrival_rates.empty()) f.fail(e, "'arrival_rates' must not be empty");
                   for (double r : c.arrival_rates) {
                     if (!(r > 0.0) || !std::isfinite(r)) f.fail(e, "arrival rates must be positive");
                   }
                 },
                 [](const C& c) { return fmt::format("[{}]", fmt::join(c.arrival_rates, ", ")); }});
    t.push_back({"experiment", "output_dir",
                 [](const F& f, const E& e, C& c) { c.output_dir = f.as_string(e); },
                 [](const C& c) { return quote(c.output_dir.generic_string()); }});
    t.push_back({"experiment", "trace", [](const F& f, const E& e, C& c) { c.trace = f.as_bool(e); },
                 [](const C& c) { return show(c.trace); }});
    t.push_back({"experiment", "arrival_process",
                 [](const F& f, const E& e, C& c) {
                   c.sim.arrivals = parsed(f, e, parse_arrival_process);
                 },
                 [](const C& c) { return quote(to_string(c.sim.arrivals)); }});
    t.push_back({"experiment", "event_cap",
                 [](const F& f, const E& e, C& c) {
                   c.sim.event_cap = f.as_int(e);
                   if (c.sim.event_cap < 1) f.fail(e, "'event_cap' must be positive");
                 },
                 [](const C& c) { return std::to_string(c.sim.event_cap); }});

    t.push_back({"workload", "count", [](const F& f, const E& e, C& c) { c.workload.count = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.workload.count); }});
    t.push_back({"workload", "easy", [](const F& f, const E& e, C& c) { c.workload.mixture.easy = unit(f, e); },
                 [](const C& c) { return show(c.workload.mixture.easy); }});
    t.push_back({"workload", "hard", [](const F& f, const E& e, C& c) { c.workload.mixture.hard = unit(f, e); },
                 [](const C& c) { return show(c.workload.mixture.hard); }});
    t.push_back({"workload", "unsolvable",
                 [](const F& f, const E& e, C& c) { c.workload.mixture.unsolvable = unit(f, e); },
                 [](const C& c) { return show(c.workload.mixture.unsolvable); }});
    t.push_back({"workload", "file", [](const F& f, const E& e, C& c) { c.workload.file = f.as_string(e); },
                 [](const C& c) { return quote(c.workload.file); }});
    t.push_back({"workload", "branching",
                 [](const F& f, const E& e, C& c) { c.workload.profile.branching = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.workload.profile.branching); }});
    t.push_back({"workload", "token_min",
                 [](const F& f, const E& e, C& c) { c.workload.profile.tokens.min = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.workload.profile.tokens.min); }});
    t.push_back({"workload", "token_max",
                 [](const F& f, const E& e, C& c) { c.workload.profile.tokens.max = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.workload.profile.tokens.max); }});
    t.push_back({"workload", "golden_floor",
                 [](const F& f, const E& e, C& c) { c.workload.profile.golden_floor = unit(f, e); },
                 [](const C& c) { return show(c.workload.profile.golden_floor); }});
    add_difficulty_fields(t, "easy", &WorkloadProfile::easy);
    add_difficulty_fields(t, "hard", &WorkloadProfile::hard);
    add_difficulty_fields(t, "unsolvable", &WorkloadProfile::unsolvable);

    t.push_back({"search", "c_puct", [](const F& f, const E& e, C& c) { c.sim.search.selection.c_puct = positive(f, e); },
                 [](const C& c) { return show(c.sim.search.selection.c_puct); }});
    t.push_back({"search", "rollout_budget",
                 [](const F& f, const E& e, C& c) { c.sim.search.rollout_budget = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.search.rollout_budget); }});
    t.push_back({"search", "expand_width",
                 [](const F& f, const E& e, C& c) { c.sim.search.expand_width = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.search.expand_width); }});
    t.push_back({"search", "max_depth",
                 [](const F& f, const E& e, C& c) { c.sim.search.max_depth = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.search.max_depth); }});

    t.push_back({"scoring", "scheme",
                 [](const F& f, const E& e, C& c) { c.sim.scoring.scheme = parsed(f, e, parse_aggregation_scheme); },
                 [](const C& c) { return quote(to_string(c.sim.scoring.scheme)); }});
    t.push_back({"scoring", "accept_threshold",
                 [](const F& f, const E& e, C& c) { c.sim.scoring.accept_threshold = unit(f, e); },
                 [](const C& c) { return show(c.sim.scoring.accept_threshold); }});
    t.push_back({"scoring", "positive_exit_threshold",
                 [](const F& f, const E& e, C& c) { c.sim.scoring.positive_exit_threshold = unit(f, e); },
                 [](const C& c) { return show(c.sim.scoring.positive_exit_threshold); }});
    t.push_back({"scoring", "first_step_threshold",
                 [](const F& f, const E& e, C& c) { c.sim.scoring.first_step_threshold = unit(f, e); },
                 [](const C& c) { return show(c.sim.scoring.first_step_threshold); }});
    t.push_back({"scoring", "strict_negative_exit",
                 [](const F& f, const E& e, C& c) { c.sim.scoring.strict_negative_exit = f.as_bool(e); },
                 [](const C& c) { return show(c.sim.scoring.strict_negative_exit); }});
    t.push_back({"scoring", "futility_bound",
                 [](const F& f, const E& e, C& c) { c.sim.scoring.futility_bound = parsed(f, e, parse_futility_bound); },
                 [](const C& c) { return quote(to_string(c.sim.scoring.futility_bound)); }});

    t.push_back({"scheduler", "max_concurrency",
                 [](const F& f, const E& e, C& c) { c.sim.scheduler.max_concurrency = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.scheduler.max_concurrency); }});
    t.push_back({"scheduler", "beta", [](const F& f, const E& e, C& c) { c.sim.scheduler.beta = positive(f, e); },
                 [](const C& c) { return show(c.sim.scheduler.beta); }});
    t.push_back({"scheduler", "proximity",
                 [](const F& f, const E& e, C& c) { c.sim.scheduler.proximity = unit(f, e); },
                 [](const C& c) { return show(c.sim.scheduler.proximity); }});
    t.push_back({"scheduler", "obs_threshold",
                 [](const F& f, const E& e, C& c) { c.sim.scheduler.obs_threshold = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.scheduler.obs_threshold); }});
    t.push_back({"scheduler", "tick_interval",
                 [](const F& f, const E& e, C& c) { c.sim.scheduler.tick_interval = positive(f, e); },
                 [](const C& c) { return show(c.sim.scheduler.tick_interval); }});

    t.push_back({"beam", "beam_width", [](const F& f, const E& e, C& c) { c.sim.beam.beam_width = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.beam.beam_width); }});
    t.push_back({"beam", "candidates_per_beam",
                 [](const F& f, const E& e, C& c) { c.sim.beam.candidates_per_beam = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.beam.candidates_per_beam); }});
    t.push_back({"beam", "max_depth", [](const F& f, const E& e, C& c) { c.sim.beam.max_depth = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.beam.max_depth); }});

    t.push_back({"cost", "per_token_latency",
                 [](const F& f, const E& e, C& c) { c.sim.cost.per_token_latency = positive(f, e); },
                 [](const C& c) { return show(c.sim.cost.per_token_latency); }});
    t.push_back({"cost", "engine_capacity",
                 [](const F& f, const E& e, C& c) { c.sim.cost.engine_capacity = positive_int(f, e); },
                 [](const C& c) { return std::to_string(c.sim.cost.engine_capacity); }});
    t.push_back({"cost", "reward_latency",
                 [](const F& f, const E& e, C& c) { c.sim.cost.reward_latency = non_negative(f, e); },
                 [](const C& c) { return show(c.sim.cost.reward_latency); }});
    return t;
  }();
  return table;
}

void validate_profile(const DifficultyProfile& p, std::string_view name) {
  if (p.depth_range.min < 1 || p.depth_range.min > p.depth_range.max) {
    throw InvalidArgument(fmt::format("workload.{}: need 1 <= depth_min <= depth_max", name));
  }
  for (const RewardRange* r : {&p.rewards.golden, &p.rewards.other, &p.rewards.lure}) {
    if (r->lo > r->hi) throw InvalidArgument(fmt::format("workload.{}: reward range with lo > hi", name));
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw InvalidArgument(fmt::format("cannot write {}", path.string()));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (arrival_rates.empty()) throw InvalidArgument("no arrival rates given");
  for (double r : arrival_rates) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument(fmt::format("arrival rate {} is not positive", r));
  }
  if (workload.count < 1) throw InvalidArgument("workload count must be positive");
  const auto& m = workload.mixture;
  if (std::abs(m.easy + m.hard + m.unsolvable - 1.0) > 1e-9) {
    throw InvalidArgument(
        fmt::format("workload mixture sums to {}, expected 1", m.easy + m.hard + m.unsolvable));
  }
  const auto& p = workload.profile;
  if (p.tokens.min < 1 || p.tokens.min > p.tokens.max) {
    throw InvalidArgument("workload: need 1 <= token_min <= token_max");
  }
  validate_profile(p.easy, "easy");
  validate_profile(p.hard, "hard");
  validate_profile(p.unsolvable, "unsolvable");
  effective_simulation(*this).validate();
}

ExperimentConfig apply_config_file(const ConfigFile& file, ExperimentConfig base) {
  for (const ConfigEntry& entry : file.entries()) {
    const Field* match = nullptr;
    bool known_section = false;
    for (const Field& f : fields()) {
      if (f.section == entry.section) {
        known_section = true;
        if (f.key == entry.key) match = &f;
      }
    }
    if (!known_section) {
      file.fail(entry, entry.section.empty() ? fmt::format("key '{}' outside any section", entry.key)
                                             : fmt::format("unknown section [{}]", entry.section));
    }
    if (!match) file.fail(entry, fmt::format("unknown key '{}' in [{}]", entry.key, entry.section));
    match->set(file, entry, base);
  }
  try {
    base.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(file.source(), 0, e.what());
  }
  return base;
}

SimulationConfig effective_simulation(const ExperimentConfig& config) {
  const PresetFlags flags = preset_flags(config.preset);
  SimulationConfig sim = config.sim;
  sim.system = flags.system;
  sim.scoring.positive_exit_enabled = flags.positive_exit;
  sim.scoring.negative_exit_enabled = flags.negative_exit;
  sim.scheduler.boosting_enabled = flags.boosting;
  sim.beam.positive_exit_enabled = flags.system == SystemKind::Beam && flags.positive_exit;
  return sim;
}

std::string format_config(const ExperimentConfig& config) {
  const SimulationConfig sim = effective_simulation(config);
  std::string out = fmt::format(
      "# preset {}: system={} positive_exit={} negative_exit={} boosting={} beam_positive_exit={}\n",
      to_string(config.preset), to_string(sim.system), show(sim.scoring.positive_exit_enabled),
      show(sim.scoring.negative_exit_enabled), show(sim.scheduler.boosting_enabled),
      show(sim.beam.positive_exit_enabled));
  std::string section = "\x01";
  for (const Field& f : fields()) {
    if (f.section != section) {
      section = f.section;
      out += fmt::format("\n[{}]\n", section);
    }
    out += fmt::format("{} = {}\n", f.key, f.get(config));
  }
  return out;
}

std::vector<SyntheticProblemSpec> build_workload(const ExperimentConfig& config) {
  if (config.workload.file.empty()) {
    return make_workload(config.workload.count, config.workload.mixture, config.seed,
                         config.workload.profile);
  }
  std::ifstream in(config.workload.file, std::ios::binary);
  if (!in) throw InvalidArgument(fmt::format("cannot open workload file {}", config.workload.file));
  std::ostringstream buf;
  buf << in.rdbuf();
  return workload_from_json(buf.str());
}

std::vector<RateRun> run_sweep(const ExperimentConfig& config) {
  config.validate();
  const auto workload = build_workload(config);
  const SimulationConfig sim = effective_simulation(config);

  std::vector<std::future<RateRun>> pending;
  for (double rate : config.arrival_rates) {
    pending.push_back(std::async(std::launch::async, [&, rate] {
      RateRun run;
      run.rate = rate;
      std::ostringstream trace;
      Simulator simulator(workload, rate, sim, config.seed);
      if (config.trace) simulator.set_trace(&trace);
      run.result = simulator.run();
      run.summary = summarize(run.result.records);
      run.trace = trace.str();
      return run;
    }));
  }
  std::vector<RateRun> runs;
  for (auto& f : pending) runs.push_back(f.get());
  return runs;
}

std::string sweep_table_csv(SystemPreset preset, const std::vector<RateRun>& runs) {
  std::string out =
      "preset,rate,requests,p50_latency,p99_latency,throughput,total_tokens,positive,negative,"
      "budget_exhausted,beam_finished,solve_rate\n";
  for (const RateRun& r : runs) {
    const SummaryStats& s = r.summary;
    out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{},{},{},{},{},{:.6f}\n", to_string(preset),
                       rate_label(r.rate), s.requests, s.p50_latency, s.p99_latency, s.throughput,
                       s.total_tokens, s.exits(RequestExit::Positive), s.exits(RequestExit::Negative),
                       s.exits(RequestExit::BudgetExhausted), s.exits(RequestExit::BeamFinished),
                       s.solve_rate);
  }
  return out;
}

std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config) {
  const auto runs = run_sweep(config);
  const std::string prefix(to_string(config.preset));
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  for (const RateRun& r : runs) {
    const auto stem = config.output_dir / fmt::format("{}_{}", prefix, rate_label(r.rate));
    files.emplace_back(stem.string() + ".csv", records_to_csv(r.result.records));
    files.emplace_back(stem.string() + ".json", summary_to_json(r.summary));
    if (config.trace) files.emplace_back(stem.string() + ".trace.jsonl", r.trace);
  }
  files.emplace_back(config.output_dir / (prefix + "_sweep.csv"), sweep_table_csv(config.preset, runs));

  std::filesystem::create_directories(config.output_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [path, content] : files) {
    write_file(path, content);
    written.push_back(path);
  }
  return written;
}

std::string rate_label(double rate) { return fmt::format("{}", rate); }

std::string_view to_string(SystemPreset preset) noexcept {
  switch (preset) {
    case SystemPreset::Beam: return "beam";
    case SystemPreset::Vanilla: return "vanilla";
    case SystemPreset::Pe: return "pe";
    case SystemPreset::PeNe: return "pe_ne";
    case SystemPreset::PeNeBoost: return "pe_ne_boost";
  }
  return "?";
}

SystemPreset parse_preset(std::string_view text) {
  for (auto p : {SystemPreset::Beam, SystemPreset::Vanilla, SystemPreset::Pe, SystemPreset::PeNe,
                 SystemPreset::PeNeBoost}) {
    if (to_string(p) == text) return p;
  }
  throw InvalidArgument(
      fmt::format("unknown preset '{}' (expected beam, vanilla, pe, pe_ne or pe_ne_boost)", text));
}

}  // namespace ttsim
