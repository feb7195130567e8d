#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ttsim/scoring.hpp"
#include "ttsim/step.hpp"

namespace ttsim {

struct BeamConfig {
  int beam_width = 8;           // k
  int candidates_per_beam = 8;  // n
  int max_depth = 16;           // T
  bool positive_exit_enabled = true;

  void validate() const;
};

struct PartialTrajectory {
  std::vector<StepRef> steps;
  std::vector<double> rewards;
  double score = 1.0;  // aggregate of `rewards`; 1 for the empty beam
  bool terminal = false;
};

struct BeamStepResult {
  // Non-terminal survivors, in rank order.
  std::vector<PartialTrajectory> beams;
  // Survivors that reached a terminal step this round, in rank order.
  std::vector<PartialTrajectory> finished;
  std::int64_t tokens = 0;
  int requests = 0;
  int longest_candidate = 0;
};

// Expands every beam into n candidates and keeps the k best by accumulated
// score over all of them; ties go to the lower candidate index
// (beam position * n + child position).
BeamStepResult beam_step(std::span<const PartialTrajectory> beams, const BeamConfig& config,
                         AggregationScheme scheme, const StepGenerator& backend);

struct BeamOutcome {
  PartialTrajectory best;
  bool complete = false;        // `best` ended at a terminal step
  bool positive_exit = false;
  int steps = 0;
  std::int64_t tokens = 0;
};

// Stepwise beam search so the simulator can charge each round separately.
class BeamSearch {
 public:
  BeamSearch(const StepGenerator& backend, const BeamConfig& config, const ScoringConfig& scoring);

  bool done() const noexcept;
  // One expansion-pruning round. Must not be called once done().
  const BeamStepResult& step();
  // Best finished trajectory, else the best partial one flagged incomplete.
  BeamOutcome outcome() const;

  std::span<const PartialTrajectory> beams() const noexcept { return beams_; }
  std::span<const PartialTrajectory> finished() const noexcept { return finished_; }
  // Requests the next step() will issue.
  int pending_requests() const noexcept;

 private:
  const StepGenerator& backend_;
  BeamConfig config_;
  ScoringConfig scoring_;
  std::vector<PartialTrajectory> beams_;
  std::vector<PartialTrajectory> finished_;
  BeamStepResult last_;
  int steps_ = 0;
  std::int64_t tokens_ = 0;
  bool positive_exit_ = false;
};

BeamOutcome run_beam_search(const StepGenerator& backend, const BeamConfig& config,
                            const ScoringConfig& scoring);

}  // namespace ttsim
