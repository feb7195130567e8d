#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "ttsim/scoring.hpp"
#include "ttsim/search_tree.hpp"

namespace ttsim {

struct SchedulerConfig {
  int max_concurrency = 16;  // M
  double beta = 2.0;
  double proximity = 0.9;
  // Completed rollouts a job needs before it may run more than one at a time.
  int obs_threshold = 2;
  bool boosting_enabled = true;
  double tick_interval = 0.05;  // simulated seconds between periodic passes

  void validate() const;
};

enum class JobState { Pending, Running, Finished };

struct ActiveRollout {
  std::uint64_t rollout_id = 0;
  // Nodes holding this rollout's in-flight registration, root first.
  std::vector<NodeId> path;
  // Aggregate of the rewards on `path` below the root; 1 before the first step.
  double prefix_score = 1.0;
  // Global launch order, used to break preemption ties.
  std::uint64_t launch_seq = 0;
};

// Scheduling view of one reasoning request. The search tree itself lives with
// the simulator; the scheduler only needs these counters.
struct Job {
  std::uint32_t job_id = 0;
  double arrival_time = 0.0;
  std::int64_t rollout_budget = 32;
  std::int64_t completed_rollouts = 0;
  double best_score = 0.0;
  int target_parallelism = 1;
  std::vector<ActiveRollout> active_rollouts;
  JobState state = JobState::Pending;
  ExitKind exit_kind = ExitKind::Continue;
};

struct SchedulerState {
  // Indexed by job_id.
  std::vector<Job> jobs;
  // Pending job ids in arrival order.
  std::deque<std::uint32_t> pending;
  // Running job ids in admission order.
  std::vector<std::uint32_t> running;
  double now = 0.0;

  int total_active() const noexcept;
};

// ln(1 + (now - arrival)) + beta * [best_score / theta_pos > proximity].
double parallelism_score(const Job& job, double now, double positive_exit_threshold,
                         const SchedulerConfig& config);

// Moves pending jobs to the run queue in FIFO order while fewer than M run.
// Returns the admitted ids.
std::vector<std::uint32_t> admit_jobs(SchedulerState& state, const SchedulerConfig& config);

struct TargetAssignment {
  std::uint32_t job_id = 0;
  double score = 0.0;
  int target = 1;
};

// One entry per running job, in run-queue order.
//
// Gated jobs (fewer than obs_threshold completed rollouts) get 1. The others get
// max(1, floor(S_i / sum(S) * M)) with the sum taken over all running jobs,
// capped at the job's unspent rollout budget. If the max(1, .) floor pushes the
// total above M, the lowest-score boosted jobs give slots back; any residual is
// then handed out one slot at a time in descending score order (earlier
// arrival first on ties). With boosting disabled every job gets 1.
std::vector<TargetAssignment> compute_targets(const SchedulerState& state,
                                              const SchedulerConfig& config,
                                              double positive_exit_threshold);

enum class ActionKind { Preempt, Launch };

struct SchedulerAction {
  ActionKind kind = ActionKind::Launch;
  std::uint32_t job_id = 0;
  std::uint64_t rollout_id = 0;  // Preempt only
};

// Preempt actions for the A - P active rollouts with the lowest prefix score
// (most recently launched first on ties), then Launch actions for P - A new
// rollouts. All preemptions precede all launches. Does not modify `state`.
std::vector<SchedulerAction> reconcile(const SchedulerState& state,
                                       std::span<const TargetAssignment> targets);

// Releases `rollout_id`, counts the completion and records the best score. On a
// terminal decision the job is finished, dropped from the run queue and its
// other rollouts are returned so the caller can cancel them.
std::vector<ActiveRollout> on_rollout_complete(SchedulerState& state, std::uint32_t job_id,
                                               std::uint64_t rollout_id,
                                               const ExitDecision& decision);

// Finishes a running job outright (e.g. its tree ran out of leaves) and returns
// its remaining rollouts.
std::vector<ActiveRollout> finish_job(SchedulerState& state, std::uint32_t job_id, ExitKind kind);

}  // namespace ttsim
