#include "ttsim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ttsim/errors.hpp"

namespace ttsim {

void SchedulerConfig::validate() const {
  if (max_concurrency < 1) throw InvalidArgument("max_concurrency must be at least 1");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(proximity > 0.0 && proximity < 1.0)) throw InvalidArgument("proximity must lie in (0, 1)");
  if (obs_threshold < 1) throw InvalidArgument("obs_threshold must be at least 1");
  if (!(tick_interval > 0.0)) throw InvalidArgument("tick_interval must be positive");
}

int SchedulerState::total_active() const noexcept {
  int total = 0;
  for (std::uint32_t id : running) total += static_cast<int>(jobs[id].active_rollouts.size());
  return total;
}

double parallelism_score(const Job& job, double now, double positive_exit_threshold,
                         const SchedulerConfig& config) {
  if (now < job.arrival_time) {
    throw InvalidArgument(fmt::format("parallelism_score: now {} precedes arrival {} of job {}", now,
                                      job.arrival_time, job.job_id));
  }
  if (!(positive_exit_threshold > 0.0)) {
    throw InvalidArgument("parallelism_score: positive exit threshold must be positive");
  }
  const double seniority = std::log1p(now - job.arrival_time);
  const double rho = job.best_score / positive_exit_threshold;
  return seniority + (rho > config.proximity ? config.beta : 0.0);
}

std::vector<std::uint32_t> admit_jobs(SchedulerState& state, const SchedulerConfig& config) {
  std::vector<std::uint32_t> admitted;
  while (!state.pending.empty() &&
         state.running.size() < static_cast<std::size_t>(config.max_concurrency)) {
    const std::uint32_t id = state.pending.front();
    state.pending.pop_front();
    Job& job = state.jobs[id];
    job.state = JobState::Running;
    job.target_parallelism = 1;
    state.running.push_back(id);
    admitted.push_back(id);
  }
  return admitted;
}

std::vector<TargetAssignment> compute_targets(const SchedulerState& state,
                                              const SchedulerConfig& config,
                                              double positive_exit_threshold) {
  const std::size_t n = state.running.size();
  std::vector<TargetAssignment> out(n);
  std::vector<bool> boosted(n, false);
  std::vector<int> cap(n, 1);
  double score_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Job& job = state.jobs[state.running[i]];
    out[i].job_id = job.job_id;
    out[i].score = parallelism_score(job, state.now, positive_exit_threshold, config);
    out[i].target = 1;
    score_sum += out[i].score;
    boosted[i] = config.boosting_enabled && job.completed_rollouts >= config.obs_threshold;
    cap[i] = static_cast<int>(std::max<std::int64_t>(1, job.rollout_budget - job.completed_rollouts));
  }
  if (!config.boosting_enabled) return out;

  const int m = config.max_concurrency;
  if (score_sum > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!boosted[i]) continue;
      const auto share = static_cast<int>(std::floor(out[i].score / score_sum * m));
      out[i].target = std::min(cap[i], std::max(1, share));
    }
  }

  // Boosted jobs ordered by descending score, earlier arrival first on ties.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (boosted[i]) order.push_back(i);
  }
  auto by_priority = [&](std::size_t a, std::size_t b) {
    if (score_sum > 0.0 && out[a].score != out[b].score) return out[a].score > out[b].score;
    const Job& ja = state.jobs[out[a].job_id];
    const Job& jb = state.jobs[out[b].job_id];
    if (ja.arrival_time != jb.arrival_time) return ja.arrival_time < jb.arrival_time;
    return ja.job_id < jb.job_id;
  };
  std::stable_sort(order.begin(), order.end(), by_priority);

  int total = 0;
  for (const auto& t : out) total += t.target;
  for (auto it = order.rbegin(); total > m && it != order.rend();) {
    if (out[*it].target > 1) {
      --out[*it].target;
      --total;
    } else {
      ++it;
    }
  }

  int residual = m - total;
  while (residual > 0) {
    bool gave = false;
    for (std::size_t i : order) {
      if (residual == 0) break;
      if (out[i].target < cap[i]) {
        ++out[i].target;
        --residual;
        gave = true;
      }
    }
    if (!gave) break;
  }
  return out;
}

std::vector<SchedulerAction> reconcile(const SchedulerState& state,
                                       std::span<const TargetAssignment> targets) {
  std::vector<SchedulerAction> preempts;
  std::vector<SchedulerAction> launches;
  for (const TargetAssignment& t : targets) {
    const Job& job = state.jobs.at(t.job_id);
    const auto active = static_cast<int>(job.active_rollouts.size());
    if (active > t.target) {
      std::vector<const ActiveRollout*> victims;
      for (const ActiveRollout& r : job.active_rollouts) victims.push_back(&r);
      std::stable_sort(victims.begin(), victims.end(),
                       [](const ActiveRollout* a, const ActiveRollout* b) {
                         if (a->prefix_score != b->prefix_score) {
                           return a->prefix_score < b->prefix_score;
                         }
                         return a->launch_seq > b->launch_seq;
                       });
      for (int k = 0; k < active - t.target; ++k) {
        preempts.push_back({ActionKind::Preempt, t.job_id, victims[static_cast<std::size_t>(k)]->rollout_id});
      }
    }
    for (int k = active; k < t.target; ++k) {
      launches.push_back({ActionKind::Launch, t.job_id, 0});
    }
  }
  preempts.insert(preempts.end(), launches.begin(), launches.end());
  return preempts;
}

namespace {

std::vector<ActiveRollout> retire(SchedulerState& state, Job& job, ExitKind kind) {
  job.state = JobState::Finished;
  job.exit_kind = kind;
  std::vector<ActiveRollout> rest = std::move(job.active_rollouts);
  job.active_rollouts.clear();
  std::erase(state.running, job.job_id);
  return rest;
}

}  // namespace

std::vector<ActiveRollout> on_rollout_complete(SchedulerState& state, std::uint32_t job_id,
                                               std::uint64_t rollout_id,
                                               const ExitDecision& decision) {
  Job& job = state.jobs.at(job_id);
  if (job.state != JobState::Running) {
    throw AccountingError(fmt::format("rollout completed for job {} which is not running", job_id));
  }
  const auto removed = std::erase_if(job.active_rollouts, [&](const ActiveRollout& r) {
    return r.rollout_id == rollout_id;
  });
  if (removed != 1) {
    throw AccountingError(fmt::format("job {} has no active rollout {}", job_id, rollout_id));
  }
  ++job.completed_rollouts;
  job.best_score = std::max(job.best_score, decision.best_score);
  if (decision.kind == ExitKind::Continue) return {};
  return retire(state, job, decision.kind);
}

std::vector<ActiveRollout> finish_job(SchedulerState& state, std::uint32_t job_id, ExitKind kind) {
  Job& job = state.jobs.at(job_id);
  if (job.state != JobState::Running) {
    throw AccountingError(fmt::format("finish_job: job {} is not running", job_id));
  }
  return retire(state, job, kind);
}

}  // namespace ttsim
