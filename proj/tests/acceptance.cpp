// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Everything runs from fixed seeds.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "test_support.hpp"
#include "ttsim/experiment.hpp"
#include "ttsim/serial_search.hpp"
#include "ttsim/simulator.hpp"

namespace {

using namespace ttsim;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSeed = 7;
constexpr int kRequests = 500;
// Highest rate of configs/fig7_sweep.toml.
constexpr double kTopRate = 12.0;

int failures = 0;

void report(int id, bool pass, std::string_view name, const std::string& detail) {
  fmt::print("{} {:>2}  {:<34} {}\n", pass ? "PASS" : "FAIL", id, name, detail);
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SimulationConfig preset_config(SystemPreset preset) {
  ExperimentConfig e;
  e.preset = preset;
  return effective_simulation(e);
}

const std::vector<SyntheticProblemSpec>& workload() {
  static const auto w = make_workload(kRequests, {}, kSeed);
  return w;
}

// 1. With nothing in flight the WU-PUCT score is exactly plain PUCT.
void wu_puct_reduction() {
  const auto start = Clock::now();
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const double q = u(rng);
    const double p = u(rng);
    const auto n = static_cast<std::int64_t>(rng() % 1000);
    const auto nc = static_cast<std::int64_t>(rng() % 1000);
    const double c = 0.1 + 3.0 * u(rng);
    if (wu_puct_score(q, p, n, 0, nc, 0, {c}) != testing::reference_puct(q, p, n, nc, c)) ++mismatches;
  }
  const double t = seconds_since(start);
  report(1, mismatches == 0 && t < 1.0, "WU-PUCT reduces to PUCT",
         fmt::format("1000 tuples, {} mismatches, {:.3f} s (limit 1 s)", mismatches, t));
}

// 2. Strict negative exit never fires while an acceptable completion remains.
void negative_exit_soundness() {
  const auto start = Clock::now();
  int fired = 0;
  int violations = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const testing::ExplicitTree gen(seed, 4, 3);
    for (auto scheme : {AggregationScheme::Minimum, AggregationScheme::CumulativeProduct}) {
      ScoringConfig cfg;
      cfg.scheme = scheme;
      cfg.strict_negative_exit = true;
      SearchTree tree(gen.root_ref(), 1000);
      // Check after every rollout until the tree is exhausted.
      while (tree.has_expandable_leaf()) {
        testing::serial_rollout(tree, gen, scheme);
        if (!check_negative_exit(tree, cfg)) continue;
        ++fired;
        for (const StepNode& n : tree.nodes()) {
          if (!n.expandable()) continue;
          for (double s : gen.completions(static_cast<std::size_t>(n.step_ref), tree.rewards_to(n.id), scheme)) {
            if (s >= cfg.accept_threshold) ++violations;
          }
        }
      }
    }
  }
  const double t = seconds_since(start);
  report(2, violations == 0 && fired > 0 && t < 10.0, "negative-exit soundness",
         fmt::format("100 trees x 2 schemes, {} firings, {} violations, {:.2f} s (limit 10 s)", fired,
                     violations, t));
}

struct PresetRun {
  SimulationResult result;
  SummaryStats summary;
};

// 3 rides along on the boosted run of 6.
struct CapacityCheck {
  std::int64_t events = 0;
  std::int64_t over_capacity = 0;
  std::int64_t gate_violations = 0;
  int peak_active = 0;
};

PresetRun run_preset(SystemPreset preset, CapacityCheck* check = nullptr) {
  const SimulationConfig cfg = preset_config(preset);
  Simulator sim(workload(), kTopRate, cfg, kSeed);
  if (check) {
    sim.set_observer([check, &cfg](const Simulator& s, const Event&) {
      const SchedulerState& st = s.scheduler_state();
      ++check->events;
      const int active = st.total_active();
      check->peak_active = std::max(check->peak_active, active);
      if (active > cfg.scheduler.max_concurrency) ++check->over_capacity;
      for (std::uint32_t id : st.running) {
        const Job& j = st.jobs[id];
        if (j.completed_rollouts < cfg.scheduler.obs_threshold && j.active_rollouts.size() > 1) {
          ++check->gate_violations;
        }
      }
    });
  }
  PresetRun r;
  r.result = sim.run();
  r.summary = summarize(r.result.records);
  return r;
}

// 4. Reconcile picks the lowest-prefix victims.
void preemption_oracle() {
  std::mt19937_64 rng(kSeed);
  int mismatches = 0;
  for (int c = 0; c < 200; ++c) {
    SchedulerState s;
    Job job;
    job.state = JobState::Running;
    const int active = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < active; ++i) {
      ActiveRollout r;
      r.rollout_id = static_cast<std::uint64_t>(i);
      r.prefix_score = static_cast<double>(rng() % 1000) / 1000.0;
      r.launch_seq = static_cast<std::uint64_t>(i);
      job.active_rollouts.push_back(r);
    }
    s.jobs.push_back(job);
    s.running.push_back(0);
    const int target = 1 + static_cast<int>(rng() % 12);
    const std::vector<TargetAssignment> targets{{0, 0.0, target}};

    auto sorted = job.active_rollouts;
    std::sort(sorted.begin(), sorted.end(), [](const ActiveRollout& a, const ActiveRollout& b) {
      return std::tie(a.prefix_score, b.launch_seq) < std::tie(b.prefix_score, a.launch_seq);
    });
    std::vector<std::uint64_t> expected;
    for (int k = 0; k < active - target; ++k) expected.push_back(sorted[static_cast<std::size_t>(k)].rollout_id);
    std::vector<std::uint64_t> got;
    for (const auto& a : reconcile(s, targets)) {
      if (a.kind == ActionKind::Preempt) got.push_back(a.rollout_id);
    }
    if (got != expected) ++mismatches;
  }
  report(4, mismatches == 0, "preemption oracle",
         fmt::format("200 scenarios, {} mismatches", mismatches));
}

RequestExit request_exit(ExitKind kind) {
  if (kind == ExitKind::PositiveExit) return RequestExit::Positive;
  if (kind == ExitKind::NegativeExit) return RequestExit::Negative;
  return RequestExit::BudgetExhausted;
}

// 5. One slot, no boosting: every request evolves exactly like serial MCTS.
void vanilla_reduction() {
  int mismatches = 0;
  int compared = 0;
  for (SystemPreset preset : {SystemPreset::Vanilla, SystemPreset::PeNe}) {
    SimulationConfig cfg = preset_config(preset);
    cfg.scheduler.max_concurrency = 1;
    const std::vector<SyntheticProblemSpec> w(workload().begin(), workload().begin() + 100);
    Simulator sim(w, kTopRate, cfg, kSeed);
    const auto result = sim.run();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const SyntheticBackend backend(w[i]);
      const auto serial = run_serial_search(backend, cfg.search, cfg.scoring, cfg.cost);
      const RequestRecord& rec = result.records[i];
      const SearchTree& tree = *sim.tree(static_cast<std::uint32_t>(i));
      const auto& best = tree.best_trajectory();
      const bool same = tree.to_json() == serial.tree_json && best &&
                        tree.step_refs_to(best->node_path.back()) == serial.best_steps &&
                        rec.best_score == serial.decision.best_score &&
                        rec.tokens_generated == serial.tokens &&
                        rec.rollouts_completed == static_cast<std::int64_t>(serial.trajectories.size()) &&
                        rec.exit_kind == request_exit(serial.decision.kind);
      ++compared;
      if (!same) ++mismatches;
    }
  }
  report(5, mismatches == 0, "vanilla reduction (M=1)",
         fmt::format("{} requests (vanilla and pe_ne flags), {} mismatches", compared, mismatches));
}

// 9. Byte-identical outputs across reruns.
void determinism() {
  ExperimentConfig cfg = apply_config_file(ConfigFile::load(TTSIM_SOURCE_DIR "/configs/fig7_sweep.toml"));
  cfg.arrival_rates = {4.0, kTopRate};
  cfg.trace = true;
  const auto root = std::filesystem::temp_directory_path() / "ttsim_acceptance";
  std::filesystem::remove_all(root);
  std::vector<std::vector<std::filesystem::path>> written;
  for (const char* run : {"a", "b"}) {
    cfg.output_dir = root / run;
    written.push_back(run_experiment(cfg));
  }
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  int differing = 0;
  for (std::size_t i = 0; i < written[0].size(); ++i) {
    if (slurp(written[0][i]) != slurp(written[1][i])) ++differing;
  }
  const bool ok = written[0].size() == written[1].size() && !written[0].empty() && differing == 0;
  std::filesystem::remove_all(root);
  report(9, ok, "byte-identical reruns",
         fmt::format("{} files per run (csv, json, trace), {} differ", written[0].size(), differing));
}

}  // namespace

int main() {
  fmt::print("acceptance: seed {}, {} requests, top arrival rate {}/s\n", kSeed, kRequests, kTopRate);
  wu_puct_reduction();
  negative_exit_soundness();

  const auto sweep_start = Clock::now();
  CapacityCheck capacity;
  std::map<SystemPreset, PresetRun> runs;
  runs[SystemPreset::Beam] = run_preset(SystemPreset::Beam);
  runs[SystemPreset::Vanilla] = run_preset(SystemPreset::Vanilla);
  runs[SystemPreset::Pe] = run_preset(SystemPreset::Pe);
  runs[SystemPreset::PeNe] = run_preset(SystemPreset::PeNe);
  runs[SystemPreset::PeNeBoost] = run_preset(SystemPreset::PeNeBoost, &capacity);
  const double sweep_seconds = seconds_since(sweep_start);

  report(3, capacity.over_capacity == 0 && capacity.gate_violations == 0 && capacity.events > 0,
         "scheduler capacity and gate",
         fmt::format("{} events, peak active {} (M=16), {} over capacity, {} gate violations",
                     capacity.events, capacity.peak_active, capacity.over_capacity,
                     capacity.gate_violations));

  preemption_oracle();
  vanilla_reduction();

  {
    auto p99 = [&](SystemPreset p) { return runs[p].summary.p99_latency; };
    const double beam = p99(SystemPreset::Beam), vanilla = p99(SystemPreset::Vanilla),
                 pe = p99(SystemPreset::Pe), pe_ne = p99(SystemPreset::PeNe),
                 boost = p99(SystemPreset::PeNeBoost);
    const bool ok = pe < vanilla && pe_ne <= pe && boost <= pe_ne && vanilla < beam && sweep_seconds < 120.0;
    report(6, ok, "p99 ordering at top rate",
           fmt::format("p99 s: beam {:.2f} > vanilla {:.2f} > pe {:.2f} >= pe_ne {:.2f} >= boost {:.2f}; "
                       "5 runs in {:.1f} s (limit 120 s)",
                       beam, vanilla, pe, pe_ne, boost, sweep_seconds));
  }

  {
    SimulationConfig beam_no_pe = preset_config(SystemPreset::Beam);
    beam_no_pe.beam.positive_exit_enabled = false;
    const auto beam_full = summarize(simulate(workload(), kTopRate, beam_no_pe, kSeed).records).total_tokens;
    const auto beam_pe = runs[SystemPreset::Beam].summary.total_tokens;
    const auto mcts_full = runs[SystemPreset::Vanilla].summary.total_tokens;
    const auto mcts_pe = runs[SystemPreset::Pe].summary.total_tokens;
    const double mcts_cut = 1.0 - static_cast<double>(mcts_pe) / static_cast<double>(mcts_full);
    const double beam_cut = 1.0 - static_cast<double>(beam_pe) / static_cast<double>(beam_full);
    const bool ok = mcts_full < beam_full && mcts_pe < beam_pe && mcts_cut > beam_cut;
    report(7, ok, "token efficiency vs beam",
           fmt::format("tokens no-exit mcts {} < beam {}; with PE mcts {} < beam {}; PE saves {:.1f}% "
                       "(mcts) vs {:.1f}% (beam)",
                       mcts_full, beam_full, mcts_pe, beam_pe, 100.0 * mcts_cut, 100.0 * beam_cut));
  }

  {
    auto tput = [&](SystemPreset p) { return runs[p].summary.throughput; };
    const double vanilla = tput(SystemPreset::Vanilla), pe = tput(SystemPreset::Pe),
                 pe_ne = tput(SystemPreset::PeNe);
    report(8, pe > vanilla && pe_ne >= pe, "throughput ordering",
           fmt::format("req/s: vanilla {:.3f} < pe {:.3f} <= pe_ne {:.3f}", vanilla, pe, pe_ne));
  }

  determinism();

  {
    SimulationConfig strict = preset_config(SystemPreset::PeNe);
    strict.scoring.strict_negative_exit = true;
    const auto strict_run = simulate(workload(), kTopRate, strict, kSeed);
    const auto& ne = runs[SystemPreset::PeNe].result.records;
    const auto& no_ne = runs[SystemPreset::Pe].result.records;
    int unsolvable = 0, not_negative = 0, not_fewer = 0, selective_worse = 0;
    double ne_rollouts = 0, no_ne_rollouts = 0;
    for (std::size_t i = 0; i < workload().size(); ++i) {
      if (workload()[i].difficulty != Difficulty::Unsolvable) continue;
      ++unsolvable;
      if (ne[i].exit_kind != RequestExit::Negative) ++not_negative;
      if (ne[i].rollouts_completed >= no_ne[i].rollouts_completed) ++not_fewer;
      if (ne[i].rollouts_completed > strict_run.records[i].rollouts_completed) ++selective_worse;
      ne_rollouts += static_cast<double>(ne[i].rollouts_completed);
      no_ne_rollouts += static_cast<double>(no_ne[i].rollouts_completed);
    }
    const bool ok = unsolvable > 0 && not_negative == 0 && not_fewer == 0 && selective_worse == 0;
    report(10, ok, "negative exit on unsolvable",
           fmt::format("{} unsolvable: {} not Negative, {} without fewer rollouts, {} where selective "
                       "> strict; mean rollouts {:.2f} vs {:.2f} without NE",
                       unsolvable, not_negative, not_fewer, selective_worse, ne_rollouts / unsolvable,
                       no_ne_rollouts / unsolvable));
  }

  fmt::print("acceptance: {} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
