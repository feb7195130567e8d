#include "ttsim/serial_search.hpp"

#include <algorithm>

#include "ttsim/errors.hpp"

namespace ttsim {
namespace {

// Forwards to the real backend and charges every call as one expansion.
class MeteredGenerator final : public StepGenerator {
 public:
  MeteredGenerator(const StepGenerator& inner, const CostModel& cost, SerialSearchResult& out)
      : inner_(inner), cost_(cost), out_(out) {}

  StepRef root_ref() const override { return inner_.root_ref(); }

  std::vector<StepCandidate> generate(std::span<const StepRef> context_path,
                                      int width) const override {
    auto candidates = inner_.generate(context_path, width);
    int longest = 1;
    for (const auto& c : candidates) {
      out_.tokens += c.token_count;
      longest = std::max(longest, static_cast<int>(c.token_count));
    }
    out_.latency += service_time(longest, cost_, width) + cost_.reward_latency;
    ++out_.expansions;
    return candidates;
  }

 private:
  const StepGenerator& inner_;
  const CostModel& cost_;
  SerialSearchResult& out_;
};

}  // namespace

void SearchConfig::validate() const {
  if (!(selection.c_puct > 0.0)) throw InvalidArgument("c_puct must be positive");
  if (rollout_budget < 1) throw InvalidArgument("rollout_budget must be at least 1");
  if (expand_width < 1) throw InvalidArgument("expand_width must be at least 1");
  if (max_depth < 1) throw InvalidArgument("max_depth must be at least 1");
}

ExitKind exhausted_exit_kind(const ScoringConfig& scoring) noexcept {
  return scoring.negative_exit_enabled ? ExitKind::NegativeExit : ExitKind::BudgetExhausted;
}

SerialSearchResult run_serial_search(const StepGenerator& backend, const SearchConfig& search,
                                     const ScoringConfig& scoring, const CostModel& cost) {
  search.validate();
  SerialSearchResult result;
  MeteredGenerator metered(backend, cost, result);
  SearchTree tree(backend.root_ref(), search.rollout_budget);

  while (true) {
    if (!tree.has_expandable_leaf()) {
      result.decision.kind = exhausted_exit_kind(scoring);
      break;
    }
    const NodeId leaf = tree.select_leaf(search.selection);
    const NodeId end = simulate_to_terminal(tree, leaf, metered, search.limits());

    Trajectory t;
    t.node_path = tree.path_from_root(end);
    t.node_path.erase(t.node_path.begin());
    t.aggregate_score = aggregate_trajectory(tree.rewards_to(end), scoring.scheme);
    t.rollout_index = tree.completed_rollouts();
    t.force_terminated = tree.node(end).force_terminated;
    tree.backpropagate(t);
    result.trajectories.push_back(std::move(t));

    result.decision = decide_exit(tree, scoring);
    if (result.decision.kind != ExitKind::Continue) break;
  }
  if (const auto& best = tree.best_trajectory()) {
    result.decision.best_score = best->aggregate_score;
    result.best_steps = tree.step_refs_to(best->node_path.back());
  }
  result.tree_json = tree.to_json();
  return result;
}

}  // namespace ttsim
