#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttsim/backend.hpp"
#include "ttsim/scoring.hpp"
#include "ttsim/search_tree.hpp"

namespace ttsim {

struct SearchConfig {
  SelectionParams selection;
  std::int64_t rollout_budget = 32;
  int expand_width = 4;
  int max_depth = 16;

  void validate() const;
  SearchLimits limits() const noexcept { return {expand_width, max_depth}; }
};

struct SerialSearchResult {
  // Completed trajectories in completion order.
  std::vector<Trajectory> trajectories;
  ExitDecision decision;
  // Step refs of the best trajectory, first step first.
  std::vector<StepRef> best_steps;
  std::int64_t tokens = 0;
  std::int64_t expansions = 0;
  // Sum of per-expansion service times with the engine otherwise idle.
  double latency = 0.0;
  // Final tree in SearchTree::to_json form.
  std::string tree_json;
};

// One request, one rollout at a time: select, simulate, backpropagate, then
// consult the exit rules. A tree with no expandable leaf left ends the search
// with NegativeExit when negative exit is enabled, BudgetExhausted otherwise.
SerialSearchResult run_serial_search(const StepGenerator& backend, const SearchConfig& search,
                                     const ScoringConfig& scoring, const CostModel& cost);

// Exit kind for a tree whose leaves are all terminal.
ExitKind exhausted_exit_kind(const ScoringConfig& scoring) noexcept;

}  // namespace ttsim
