#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttsim/step.hpp"

namespace ttsim {

enum class Difficulty { Easy, HardSolvable, Unsolvable };

struct RewardRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct DepthRange {
  int min = 2;
  int max = 4;
};

struct TokenRange {
  int min = 40;
  int max = 120;
};

// Per-step reward distributions for one difficulty class.
//
// Steps on the golden path draw from `golden`; all other steps from `other`.
// While the golden path is shallower than `lure_depth`, one sibling of each
// golden step is a lure drawn from `lure`: it outscores the golden step, but
// everything below it is ordinary, so the golden branch only stands out once
// the search reaches `lure_depth`.
struct RewardProfile {
  RewardRange golden{0.90, 0.99};
  RewardRange other{0.3, 0.7};
  RewardRange lure{0.90, 0.99};
  int lure_depth = 0;
  // Chance that an off-golden step inside the depth range ends the trajectory.
  double terminal_probability = 0.35;
};

struct SyntheticProblemSpec {
  std::uint32_t problem_id = 0;
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::Easy;
  DepthRange depth_range;
  int branching = 4;
  RewardProfile reward_profile;
  TokenRange tokens;
  // Child index taken at each depth; its length is the golden trajectory's depth.
  // Empty for unsolvable problems.
  std::vector<int> golden_path;
};

// Candidates for the node reached by `context_path`. Rewards, priors, token
// counts and terminal flags are keyed on (seed, path, candidate index), so the
// result does not depend on call order. Priors of a sibling set sum to 1.
std::vector<StepCandidate> generate_steps(const SyntheticProblemSpec& problem,
                                          std::span<const StepRef> context_path, int width);

StepRef problem_root_ref(const SyntheticProblemSpec& problem) noexcept;

// Step refs of the golden trajectory, first step first.
std::vector<StepRef> golden_refs(const SyntheticProblemSpec& problem);

// Product of the golden trajectory's rewards (0 when there is none).
double golden_product(const SyntheticProblemSpec& problem);

class SyntheticBackend final : public StepGenerator {
 public:
  explicit SyntheticBackend(SyntheticProblemSpec problem);

  StepRef root_ref() const override { return root_; }
  std::vector<StepCandidate> generate(std::span<const StepRef> context_path,
                                      int width) const override;

  // True when `path` (first step first) is exactly the golden trajectory.
  bool is_golden_trajectory(std::span<const StepRef> path) const;
  const SyntheticProblemSpec& problem() const noexcept { return problem_; }

 private:
  SyntheticProblemSpec problem_;
  StepRef root_;
  std::vector<StepRef> golden_;
};

struct CostModel {
  double per_token_latency = 0.001;  // seconds per generated token
  int engine_capacity = 64;          // concurrent completions before slowdown
  double reward_latency = 0.01;      // seconds per reward query

  void validate() const;
};

// token_count * per_token_latency * max(1, inflight_load / engine_capacity).
double service_time(int token_count, const CostModel& model, int inflight_load);

struct WorkloadMixture {
  double easy = 0.60;
  double hard = 0.25;
  double unsolvable = 0.15;
};

struct DifficultyProfile {
  DepthRange depth_range;
  RewardProfile rewards;
};

// Shape of generated problems. `golden_floor` is the product aggregate every
// golden trajectory is constructed to exceed.
struct WorkloadProfile {
  int branching = 4;
  TokenRange tokens;
  double golden_floor = 0.5;
  DifficultyProfile easy{{2, 3}, {{0.90, 0.99}, {0.3, 0.7}, {0.90, 0.99}, 0, 0.35}};
  DifficultyProfile hard{{3, 4}, {{0.75, 0.90}, {0.3, 0.7}, {0.90, 0.99}, 3, 0.35}};
  DifficultyProfile unsolvable{{2, 4}, {{0.0, 0.0}, {0.05, 0.29}, {0.0, 0.0}, 0, 0.35}};
};

// Deterministic problem list with the requested mixture. Class counts are
// floor(count * fraction) with the remainder given to the largest fraction;
// problems are shuffled so classes interleave in arrival order.
std::vector<SyntheticProblemSpec> make_workload(int count, const WorkloadMixture& mixture,
                                                std::uint64_t seed,
                                                const WorkloadProfile& profile = {});

std::string workload_to_json(std::span<const SyntheticProblemSpec> workload);
std::vector<SyntheticProblemSpec> workload_from_json(std::string_view text);

std::string_view to_string(Difficulty difficulty) noexcept;
Difficulty parse_difficulty(std::string_view text);

}  // namespace ttsim
