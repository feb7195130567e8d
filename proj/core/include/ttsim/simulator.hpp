#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string_view>
#include <vector>

#include "ttsim/backend.hpp"
#include "ttsim/beam_search.hpp"
#include "ttsim/metrics.hpp"
#include "ttsim/scheduler.hpp"
#include "ttsim/scoring.hpp"
#include "ttsim/search_tree.hpp"
#include "ttsim/serial_search.hpp"

namespace ttsim {

enum class SystemKind { Mcts, Beam };
enum class ArrivalProcess { Poisson, FixedInterval };

struct SimulationConfig {
  SystemKind system = SystemKind::Mcts;
  SearchConfig search;
  ScoringConfig scoring;
  SchedulerConfig scheduler;
  BeamConfig beam;
  CostModel cost;
  ArrivalProcess arrivals = ArrivalProcess::Poisson;
  std::int64_t event_cap = 10'000'000;

  void validate() const;
};

enum class EventKind { Arrival, StepComplete, SchedulerTick, JobFinished };

struct Event {
  double time = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::Arrival;
  std::uint32_t job_id = 0;
  // StepComplete: the MCTS rollout, or the beam round, that finished.
  std::uint64_t rollout_id = 0;
};

struct EventOrder {
  bool operator()(const Event& a, const Event& b) const noexcept {
    if (a.time != b.time) return a.time > b.time;
    return a.sequence > b.sequence;
  }
};

struct EngineState {
  // LLM completion requests currently being served.
  int inflight_requests = 0;
  double clock = 0.0;
  std::uint64_t rng_seed = 0;
  std::uint64_t next_sequence = 0;
  std::priority_queue<Event, std::vector<Event>, EventOrder> event_queue;
};

struct SimulationStats {
  std::int64_t events = 0;
  std::int64_t rollouts_launched = 0;
  std::int64_t rollouts_completed = 0;
  std::int64_t rollouts_preempted = 0;
  std::int64_t tokens = 0;
  std::int64_t expansions = 0;
};

struct SimulationResult {
  std::vector<RequestRecord> records;  // ordered by request id
  SimulationStats stats;
};

// Arrival times for `count` requests. Poisson draws use one keyed uniform per
// request, so every rate sees the same underlying sequence.
std::vector<double> arrival_times(std::size_t count, double rate, ArrivalProcess process,
                                  std::uint64_t seed);

// Discrete-event engine. Parallel rollouts are interleaved logical events on a
// single thread; every outcome is a pure function of (workload, config, seed).
class Simulator {
 public:
  using Observer = std::function<void(const Simulator&, const Event&)>;

  Simulator(std::vector<SyntheticProblemSpec> workload, double arrival_rate,
            const SimulationConfig& config, std::uint64_t seed);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  // Called after every processed event.
  void set_observer(Observer observer) { observer_ = std::move(observer); }
  // JSON Lines event and scheduler-decision log. The stream must outlive run().
  void set_trace(std::ostream* trace) { trace_ = trace; }

  // Applies one event and returns the events it schedules; the caller owns
  // queueing them. Throws SimulationError on time regression.
  std::vector<Event> step_event(const Event& event);

  // Pops and applies the next event. False once the queue is empty.
  bool step();
  SimulationResult run();

  const EngineState& engine() const noexcept { return engine_; }
  const SchedulerState& scheduler_state() const noexcept { return sched_; }
  const SimulationStats& stats() const noexcept { return stats_; }
  const SimulationConfig& config() const noexcept { return config_; }
  // Null for beam jobs.
  const SearchTree* tree(std::uint32_t job_id) const;
  std::span<const RequestRecord> finished_records() const noexcept { return records_; }

 private:
  struct JobRuntime;
  struct RolloutRuntime {
    std::uint32_t job_id = 0;
    NodeId cur{};
    std::vector<StepCandidate> pending;
    int requests = 0;
  };

  Event make_event(double time, EventKind kind, std::uint32_t job, std::uint64_t rollout = 0);
  void scheduler_pass(std::vector<Event>& out);
  bool launch(std::uint32_t job_id, std::vector<Event>& out);
  void advance(std::uint64_t rollout_id, std::vector<Event>& out);
  void complete_rollout(std::uint64_t rollout_id, std::vector<Event>& out);
  void preempt(const ActiveRollout& rollout);
  void finish(std::uint32_t job_id, ExitKind kind, std::vector<Event>& out);
  void issue_beam_round(std::uint32_t job_id, std::vector<Event>& out);
  void complete_beam_round(std::uint32_t job_id, std::uint64_t round, std::vector<Event>& out);
  ActiveRollout& active(std::uint32_t job_id, std::uint64_t rollout_id);
  void arm_tick(std::vector<Event>& out);
  void trace_event(const Event& event);

  SimulationConfig config_;
  EngineState engine_;
  SchedulerState sched_;
  SimulationStats stats_;
  std::vector<std::unique_ptr<JobRuntime>> runtime_;
  std::map<std::uint64_t, RolloutRuntime> rollouts_;
  std::vector<RequestRecord> records_;
  std::size_t finished_jobs_ = 0;
  std::uint64_t next_rollout_id_ = 0;
  bool tick_armed_ = false;
  Observer observer_;
  std::ostream* trace_ = nullptr;
};

SimulationResult simulate(std::vector<SyntheticProblemSpec> workload, double arrival_rate,
                          const SimulationConfig& config, std::uint64_t seed);

std::string_view to_string(EventKind kind) noexcept;
std::string_view to_string(SystemKind kind) noexcept;
std::string_view to_string(ArrivalProcess process) noexcept;
ArrivalProcess parse_arrival_process(std::string_view text);

}  // namespace ttsim
