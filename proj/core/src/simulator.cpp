#include "ttsim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ttsim/errors.hpp"
#include "ttsim/random.hpp"

namespace ttsim {
namespace {

constexpr std::uint64_t kArrivalSalt = 0x61727276ULL;

RequestExit to_request_exit(ExitKind kind) {
  switch (kind) {
    case ExitKind::PositiveExit: return RequestExit::Positive;
    case ExitKind::NegativeExit: return RequestExit::Negative;
    case ExitKind::BudgetExhausted: return RequestExit::BudgetExhausted;
    case ExitKind::Continue: break;
  }
  throw SimulationError("request finished without an exit decision");
}

}  // namespace

struct Simulator::JobRuntime {
  explicit JobRuntime(SyntheticProblemSpec spec) : backend(std::move(spec)) {}

  SyntheticBackend backend;
  std::optional<SearchTree> tree;
  std::unique_ptr<BeamSearch> beam;
  int beam_requests = 0;
  std::uint64_t beam_round = 0;
  std::int64_t tokens = 0;
  std::int64_t preempted = 0;
};

void SimulationConfig::validate() const {
  search.validate();
  scoring.validate();
  scheduler.validate();
  beam.validate();
  cost.validate();
  if (event_cap < 1) throw InvalidArgument("event_cap must be positive");
}

std::vector<double> arrival_times(std::size_t count, double rate, ArrivalProcess process,
                                  std::uint64_t seed) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw InvalidArgument(fmt::format("arrival rate must be positive, got {}", rate));
  }
  std::vector<double> times;
  times.reserve(count);
  double t = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    if (process == ArrivalProcess::Poisson) {
      const double u = unit_uniform(hash_combine(hash_combine(seed, kArrivalSalt), i));
      t += -std::log1p(-u) / rate;
    } else {
      t += 1.0 / rate;
    }
    times.push_back(t);
  }
  return times;
}

Simulator::Simulator(std::vector<SyntheticProblemSpec> workload, double arrival_rate,
                     const SimulationConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  engine_.rng_seed = seed;
  const auto times = arrival_times(workload.size(), arrival_rate, config_.arrivals, seed);
  runtime_.reserve(workload.size());
  sched_.jobs.reserve(workload.size());
  for (std::size_t i = 0; i < workload.size(); ++i) {
    Job job;
    job.job_id = static_cast<std::uint32_t>(i);
    job.arrival_time = times[i];
    job.rollout_budget = config_.search.rollout_budget;
    sched_.jobs.push_back(std::move(job));
    runtime_.push_back(std::make_unique<JobRuntime>(std::move(workload[i])));
    engine_.event_queue.push(make_event(times[i], EventKind::Arrival, static_cast<std::uint32_t>(i)));
  }
}

Simulator::~Simulator() = default;

const SearchTree* Simulator::tree(std::uint32_t job_id) const {
  const auto& rt = runtime_.at(job_id);
  return rt->tree ? &*rt->tree : nullptr;
}

Event Simulator::make_event(double time, EventKind kind, std::uint32_t job, std::uint64_t rollout) {
  return Event{time, engine_.next_sequence++, kind, job, rollout};
}

ActiveRollout& Simulator::active(std::uint32_t job_id, std::uint64_t rollout_id) {
  for (ActiveRollout& r : sched_.jobs[job_id].active_rollouts) {
    if (r.rollout_id == rollout_id) return r;
  }
  throw AccountingError(fmt::format("job {} has no active rollout {}", job_id, rollout_id));
}

std::vector<Event> Simulator::step_event(const Event& event) {
  if (event.time < engine_.clock) {
    throw SimulationError(fmt::format("event time {} precedes clock {}", event.time, engine_.clock));
  }
  engine_.clock = event.time;
  sched_.now = event.time;
  ++stats_.events;
  trace_event(event);

  std::vector<Event> out;
  switch (event.kind) {
    case EventKind::Arrival:
      sched_.pending.push_back(event.job_id);
      scheduler_pass(out);
      break;
    case EventKind::StepComplete:
      if (config_.system == SystemKind::Beam) {
        complete_beam_round(event.job_id, event.rollout_id, out);
        break;
      }
      if (auto it = rollouts_.find(event.rollout_id); it != rollouts_.end()) {
        RolloutRuntime& r = it->second;
        engine_.inflight_requests -= r.requests;
        r.requests = 0;
        SearchTree& tree = *runtime_[r.job_id]->tree;
        if (tree.node(r.cur).expandable()) tree.expand(r.cur, r.pending);
        r.pending.clear();
        const auto completed = stats_.rollouts_completed;
        advance(event.rollout_id, out);
        if (stats_.rollouts_completed != completed) scheduler_pass(out);
      }
      break;
    case EventKind::SchedulerTick:
      tick_armed_ = false;
      scheduler_pass(out);
      break;
    case EventKind::JobFinished:
      scheduler_pass(out);
      break;
  }
  arm_tick(out);
  return out;
}

bool Simulator::step() {
  if (engine_.event_queue.empty()) return false;
  if (stats_.events >= config_.event_cap) {
    throw SimulationError(fmt::format("event cap of {} reached with {} of {} requests finished",
                                      config_.event_cap, finished_jobs_, sched_.jobs.size()));
  }
  const Event event = engine_.event_queue.top();
  engine_.event_queue.pop();
  for (const Event& e : step_event(event)) engine_.event_queue.push(e);
  if (observer_) observer_(*this, event);
  return true;
}

SimulationResult Simulator::run() {
  while (step()) {
  }
  if (finished_jobs_ != sched_.jobs.size()) {
    throw SimulationError(fmt::format("event queue drained with {} of {} requests unfinished",
                                      sched_.jobs.size() - finished_jobs_, sched_.jobs.size()));
  }
  SimulationResult result;
  result.records = records_;
  std::sort(result.records.begin(), result.records.end(),
            [](const RequestRecord& a, const RequestRecord& b) { return a.request_id < b.request_id; });
  result.stats = stats_;
  return result;
}

void Simulator::arm_tick(std::vector<Event>& out) {
  if (tick_armed_ || !config_.scheduler.boosting_enabled || config_.system != SystemKind::Mcts) return;
  if (sched_.running.empty()) return;
  tick_armed_ = true;
  out.push_back(make_event(engine_.clock + config_.scheduler.tick_interval, EventKind::SchedulerTick, 0));
}

void Simulator::scheduler_pass(std::vector<Event>& out) {
  const auto admitted = admit_jobs(sched_, config_.scheduler);
  if (config_.system == SystemKind::Beam) {
    for (std::uint32_t id : admitted) {
      JobRuntime& rt = *runtime_[id];
      rt.beam = std::make_unique<BeamSearch>(rt.backend, config_.beam, config_.scoring);
      issue_beam_round(id, out);
    }
    return;
  }
  for (std::uint32_t id : admitted) {
    runtime_[id]->tree.emplace(runtime_[id]->backend.root_ref(), config_.search.rollout_budget);
  }
  if (sched_.running.empty()) return;

  const auto targets =
      compute_targets(sched_, config_.scheduler, config_.scoring.positive_exit_threshold);
  for (const TargetAssignment& t : targets) {
    Job& job = sched_.jobs[t.job_id];
    job.target_parallelism = t.target;
    if (trace_) {
      const auto a = static_cast<int>(job.active_rollouts.size());
      *trace_ << fmt::format(
          R"({{"time":{},"kind":"Decision","job_id":{},"S":{},"target":{},"active":{},"action":"{}"}})",
          engine_.clock, t.job_id, t.score, t.target, a,
          a > t.target ? "preempt" : a < t.target ? "launch" : "hold")
              << '\n';
    }
  }

  for (const SchedulerAction& action : reconcile(sched_, targets)) {
    if (action.kind == ActionKind::Preempt) {
      auto& list = sched_.jobs[action.job_id].active_rollouts;
      auto it = std::find_if(list.begin(), list.end(), [&](const ActiveRollout& r) {
        return r.rollout_id == action.rollout_id;
      });
      const ActiveRollout victim = *it;
      list.erase(it);
      preempt(victim);
    } else if (sched_.jobs[action.job_id].state == JobState::Running) {
      launch(action.job_id, out);
    }
  }

  const std::vector<std::uint32_t> running = sched_.running;
  for (std::uint32_t id : running) {
    const Job& job = sched_.jobs[id];
    if (job.active_rollouts.empty() && !runtime_[id]->tree->has_expandable_leaf()) {
      finish_job(sched_, id, exhausted_exit_kind(config_.scoring));
      finish(id, exhausted_exit_kind(config_.scoring), out);
    }
  }
}

bool Simulator::launch(std::uint32_t job_id, std::vector<Event>& out) {
  Job& job = sched_.jobs[job_id];
  SearchTree& tree = *runtime_[job_id]->tree;
  if (!tree.has_expandable_leaf()) return false;
  if (job.completed_rollouts + static_cast<std::int64_t>(job.active_rollouts.size()) >=
      job.rollout_budget) {
    return false;
  }
  const NodeId leaf = tree.select_leaf(config_.search.selection);
  const std::uint64_t id = next_rollout_id_++;
  ActiveRollout ar;
  ar.rollout_id = id;
  ar.path = tree.path_from_root(leaf);
  ar.launch_seq = id;
  if (leaf != tree.root()) {
    ar.prefix_score = aggregate_trajectory(tree.rewards_to(leaf), config_.scoring.scheme);
  }
  job.active_rollouts.push_back(std::move(ar));
  rollouts_[id] = RolloutRuntime{job_id, leaf, {}, 0};
  ++stats_.rollouts_launched;
  advance(id, out);
  return true;
}

void Simulator::advance(std::uint64_t rollout_id, std::vector<Event>& out) {
  RolloutRuntime& r = rollouts_.at(rollout_id);
  JobRuntime& rt = *runtime_[r.job_id];
  SearchTree& tree = *rt.tree;
  while (true) {
    const StepNode& n = tree.node(r.cur);
    if (n.is_terminal) break;
    if (n.depth >= config_.search.max_depth) {
      tree.force_terminate(r.cur);
      break;
    }
    if (n.is_leaf()) {
      r.pending = rt.backend.generate(tree.step_refs_to(r.cur), config_.search.expand_width);
      int longest = 1;
      for (const StepCandidate& c : r.pending) {
        rt.tokens += c.token_count;
        stats_.tokens += c.token_count;
        longest = std::max(longest, static_cast<int>(c.token_count));
      }
      r.requests = static_cast<int>(r.pending.size());
      engine_.inflight_requests += r.requests;
      ++stats_.expansions;
      const double duration = service_time(longest, config_.cost, engine_.inflight_requests) +
                              config_.cost.reward_latency;
      out.push_back(make_event(engine_.clock + duration, EventKind::StepComplete, r.job_id, rollout_id));
      return;
    }
    r.cur = greedy_child(tree, r.cur);
    tree.register_inflight(r.cur);
    ActiveRollout& ar = active(r.job_id, rollout_id);
    ar.path.push_back(r.cur);
    ar.prefix_score = aggregate_trajectory(tree.rewards_to(r.cur), config_.scoring.scheme);
  }
  complete_rollout(rollout_id, out);
}

void Simulator::complete_rollout(std::uint64_t rollout_id, std::vector<Event>& out) {
  const RolloutRuntime r = rollouts_.at(rollout_id);
  rollouts_.erase(rollout_id);
  SearchTree& tree = *runtime_[r.job_id]->tree;
  const ActiveRollout& ar = active(r.job_id, rollout_id);

  Trajectory t;
  t.node_path.assign(ar.path.begin() + 1, ar.path.end());
  t.aggregate_score = aggregate_trajectory(tree.rewards_to(r.cur), config_.scoring.scheme);
  t.rollout_index = tree.completed_rollouts();
  t.force_terminated = tree.node(r.cur).force_terminated;
  tree.backpropagate(t);
  ++stats_.rollouts_completed;

  ExitDecision decision = decide_exit(tree, config_.scoring);
  if (decision.kind == ExitKind::Continue && !tree.has_expandable_leaf() &&
      sched_.jobs[r.job_id].active_rollouts.size() == 1) {
    decision.kind = exhausted_exit_kind(config_.scoring);
  }
  for (const ActiveRollout& rest : on_rollout_complete(sched_, r.job_id, rollout_id, decision)) {
    preempt(rest);
  }
  if (decision.kind != ExitKind::Continue) finish(r.job_id, decision.kind, out);
}

void Simulator::preempt(const ActiveRollout& rollout) {
  auto it = rollouts_.find(rollout.rollout_id);
  if (it == rollouts_.end()) {
    throw AccountingError(fmt::format("preempting unknown rollout {}", rollout.rollout_id));
  }
  JobRuntime& rt = *runtime_[it->second.job_id];
  rt.tree->cancel_inflight(rollout.path);
  engine_.inflight_requests -= it->second.requests;
  ++rt.preempted;
  ++stats_.rollouts_preempted;
  rollouts_.erase(it);
}

void Simulator::finish(std::uint32_t job_id, ExitKind kind, std::vector<Event>& out) {
  const Job& job = sched_.jobs[job_id];
  JobRuntime& rt = *runtime_[job_id];
  RequestRecord rec;
  rec.request_id = job_id;
  rec.arrival_time = job.arrival_time;
  rec.completion_time = engine_.clock;
  rec.latency = rec.completion_time - rec.arrival_time;
  rec.tokens_generated = rt.tokens;
  rec.rollouts_preempted = rt.preempted;
  if (rt.beam) {
    const BeamOutcome outcome = rt.beam->outcome();
    rec.exit_kind = outcome.positive_exit ? RequestExit::Positive : RequestExit::BeamFinished;
    rec.rollouts_completed = static_cast<std::int64_t>(rt.beam->finished().size());
    rec.best_score = outcome.best.score;
    rec.solved = outcome.complete && rt.backend.is_golden_trajectory(outcome.best.steps);
  } else {
    const SearchTree& tree = *rt.tree;
    rec.exit_kind = to_request_exit(kind);
    rec.rollouts_completed = tree.completed_rollouts();
    if (const auto& best = tree.best_trajectory()) {
      rec.best_score = best->aggregate_score;
      rec.solved = rt.backend.is_golden_trajectory(tree.step_refs_to(best->node_path.back()));
    }
  }
  records_.push_back(rec);
  ++finished_jobs_;
  out.push_back(make_event(engine_.clock, EventKind::JobFinished, job_id));
}

void Simulator::issue_beam_round(std::uint32_t job_id, std::vector<Event>& out) {
  JobRuntime& rt = *runtime_[job_id];
  const BeamStepResult& round = rt.beam->step();
  rt.tokens += round.tokens;
  stats_.tokens += round.tokens;
  stats_.expansions += round.requests;
  rt.beam_requests = round.requests;
  engine_.inflight_requests += round.requests;
  const double duration =
      service_time(std::max(1, round.longest_candidate), config_.cost, engine_.inflight_requests) +
      config_.cost.reward_latency;
  ++rt.beam_round;
  out.push_back(make_event(engine_.clock + duration, EventKind::StepComplete, job_id, rt.beam_round));
}

void Simulator::complete_beam_round(std::uint32_t job_id, std::uint64_t round,
                                    std::vector<Event>& out) {
  JobRuntime& rt = *runtime_[job_id];
  if (round != rt.beam_round) throw SimulationError("beam round completed out of order");
  engine_.inflight_requests -= rt.beam_requests;
  rt.beam_requests = 0;
  if (!rt.beam->done()) {
    issue_beam_round(job_id, out);
    return;
  }
  const ExitKind kind = rt.beam->outcome().positive_exit ? ExitKind::PositiveExit
                                                         : ExitKind::BudgetExhausted;
  finish_job(sched_, job_id, kind);
  finish(job_id, kind, out);
}

void Simulator::trace_event(const Event& event) {
  if (!trace_) return;
  *trace_ << fmt::format(R"({{"time":{},"seq":{},"kind":"{}","job_id":{},"rollout":{},"inflight":{}}})",
                         event.time, event.sequence, to_string(event.kind), event.job_id,
                         event.rollout_id, engine_.inflight_requests)
          << '\n';
}

SimulationResult simulate(std::vector<SyntheticProblemSpec> workload, double arrival_rate,
                          const SimulationConfig& config, std::uint64_t seed) {
  Simulator sim(std::move(workload), arrival_rate, config, seed);
  return sim.run();
}

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::Arrival: return "Arrival";
    case EventKind::StepComplete: return "StepComplete";
    case EventKind::SchedulerTick: return "SchedulerTick";
    case EventKind::JobFinished: return "JobFinished";
  }
  return "?";
}

std::string_view to_string(SystemKind kind) noexcept {
  return kind == SystemKind::Mcts ? "mcts" : "beam";
}

std::string_view to_string(ArrivalProcess process) noexcept {
  return process == ArrivalProcess::Poisson ? "poisson" : "fixed_interval";
}

ArrivalProcess parse_arrival_process(std::string_view text) {
  if (text == "poisson") return ArrivalProcess::Poisson;
  if (text == "fixed_interval") return ArrivalProcess::FixedInterval;
  throw InvalidArgument(fmt::format("unknown arrival process '{}'", text));
}

}  // namespace ttsim
