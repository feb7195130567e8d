#include "ttsim/beam_search.hpp"

#include <algorithm>
#include <numeric>

#include "ttsim/errors.hpp"

namespace ttsim {

void BeamConfig::validate() const {
  if (beam_width < 1) throw InvalidArgument("beam_width must be at least 1");
  if (candidates_per_beam < 1) throw InvalidArgument("candidates_per_beam must be at least 1");
  if (max_depth < 1) throw InvalidArgument("beam max_depth must be at least 1");
}

BeamStepResult beam_step(std::span<const PartialTrajectory> beams, const BeamConfig& config,
                         AggregationScheme scheme, const StepGenerator& backend) {
  if (beams.empty() || beams.size() > static_cast<std::size_t>(config.beam_width)) {
    throw InvalidArgument("beam_step: need between 1 and beam_width beams");
  }
  BeamStepResult result;
  std::vector<PartialTrajectory> pool;
  pool.reserve(beams.size() * static_cast<std::size_t>(config.candidates_per_beam));
  for (const PartialTrajectory& beam : beams) {
    if (beam.terminal) throw InvalidArgument("beam_step: terminal beam cannot be expanded");
    for (const StepCandidate& c : backend.generate(beam.steps, config.candidates_per_beam)) {
      result.tokens += c.token_count;
      result.longest_candidate = std::max(result.longest_candidate, static_cast<int>(c.token_count));
      ++result.requests;
      PartialTrajectory next = beam;
      next.steps.push_back(c.step_ref);
      next.rewards.push_back(c.prm_reward);
      next.score = aggregate_trajectory(next.rewards, scheme);
      next.terminal = c.is_terminal;
      pool.push_back(std::move(next));
    }
  }

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pool[a].score > pool[b].score; });
  const auto keep = std::min(order.size(), static_cast<std::size_t>(config.beam_width));
  for (std::size_t i = 0; i < keep; ++i) {
    PartialTrajectory& p = pool[order[i]];
    (p.terminal ? result.finished : result.beams).push_back(std::move(p));
  }
  return result;
}

BeamSearch::BeamSearch(const StepGenerator& backend, const BeamConfig& config,
                       const ScoringConfig& scoring)
    : backend_(backend), config_(config), scoring_(scoring) {
  config_.validate();
  beams_.emplace_back();
}

bool BeamSearch::done() const noexcept {
  return positive_exit_ || beams_.empty() || steps_ >= config_.max_depth;
}

int BeamSearch::pending_requests() const noexcept {
  return done() ? 0 : static_cast<int>(beams_.size()) * config_.candidates_per_beam;
}

const BeamStepResult& BeamSearch::step() {
  if (done()) throw InvalidArgument("BeamSearch::step: search already finished");
  last_ = beam_step(beams_, config_, scoring_.scheme, backend_);
  ++steps_;
  tokens_ += last_.tokens;
  beams_ = last_.beams;
  finished_.insert(finished_.end(), last_.finished.begin(), last_.finished.end());
  if (config_.positive_exit_enabled) {
    for (const PartialTrajectory& f : last_.finished) {
      if (f.score >= scoring_.positive_exit_threshold) positive_exit_ = true;
    }
  }
  return last_;
}

BeamOutcome BeamSearch::outcome() const {
  BeamOutcome out;
  out.steps = steps_;
  out.tokens = tokens_;
  out.positive_exit = positive_exit_;
  auto pick = [](std::span<const PartialTrajectory> pool) {
    const PartialTrajectory* best = &pool.front();
    for (const PartialTrajectory& p : pool) {
      if (p.score > best->score) best = &p;
    }
    return *best;
  };
  if (!finished_.empty()) {
    out.best = pick(finished_);
    out.complete = true;
  } else if (!beams_.empty()) {
    out.best = pick(beams_);
  }
  return out;
}

BeamOutcome run_beam_search(const StepGenerator& backend, const BeamConfig& config,
                            const ScoringConfig& scoring) {
  BeamSearch search(backend, config, scoring);
  while (!search.done()) search.step();
  return search.outcome();
}

}  // namespace ttsim
