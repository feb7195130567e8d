#include "ttsim/scoring.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "ttsim/errors.hpp"

namespace ttsim {

void ScoringConfig::validate() const {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!open_unit(accept_threshold)) {
    throw InvalidArgument(fmt::format("accept_threshold {} outside (0, 1)", accept_threshold));
  }
  if (!open_unit(positive_exit_threshold)) {
    throw InvalidArgument(
        fmt::format("positive_exit_threshold {} outside (0, 1)", positive_exit_threshold));
  }
  if (!(first_step_threshold >= 0.0 && first_step_threshold < 1.0)) {
    throw InvalidArgument(
        fmt::format("first_step_threshold {} outside [0, 1)", first_step_threshold));
  }
  if (negative_exit_enabled && !has_leaf_upper_bound(scheme)) {
    throw UnsupportedScheme(fmt::format(
        "negative exit requires minimum or cumulative_product aggregation, got {}",
        to_string(scheme)));
  }
}

double aggregate_trajectory(std::span<const double> rewards, AggregationScheme scheme) {
  if (rewards.empty()) {
    throw InvalidArgument("aggregate_trajectory: empty reward list");
  }
  switch (scheme) {
    case AggregationScheme::Minimum:
      return *std::min_element(rewards.begin(), rewards.end());
    case AggregationScheme::CumulativeProduct:
      return std::accumulate(rewards.begin(), rewards.end(), 1.0, std::multiplies<>());
    case AggregationScheme::CumulativeSum:
      return std::accumulate(rewards.begin(), rewards.end(), 0.0);
    case AggregationScheme::Average:
      return std::accumulate(rewards.begin(), rewards.end(), 0.0) /
             static_cast<double>(rewards.size());
  }
  throw InvalidArgument("aggregate_trajectory: unknown scheme");
}

LeafClass classify_leaf(double leaf_reward, double prefix_aggregate, const ScoringConfig& config) {
  if (!has_leaf_upper_bound(config.scheme)) {
    throw UnsupportedScheme(fmt::format("futility is undefined under {} aggregation",
                                        to_string(config.scheme)));
  }
  const double bound = config.futility_bound == FutilityBound::LeafReward
                           ? leaf_reward
                           : std::min(leaf_reward, prefix_aggregate);
  return bound < config.accept_threshold ? LeafClass::Futile : LeafClass::Viable;
}

bool check_negative_exit(const SearchTree& tree, const ScoringConfig& config) {
  if (!has_leaf_upper_bound(config.scheme)) {
    throw UnsupportedScheme(fmt::format("negative exit is unsound under {} aggregation",
                                        to_string(config.scheme)));
  }
  if (tree.node(tree.root()).is_leaf()) return false;

  for (const StepNode& n : tree.nodes()) {
    if (!n.expandable() || n.id == tree.root()) continue;
    const auto rewards = tree.rewards_to(n.id);
    if (!config.strict_negative_exit && rewards.front() < config.first_step_threshold) {
      continue;
    }
    const double prefix = aggregate_trajectory(rewards, config.scheme);
    if (classify_leaf(n.prm_reward, prefix, config) == LeafClass::Viable) return false;
  }
  return true;
}

bool check_positive_exit(const SearchTree& tree, const ScoringConfig& config) {
  const auto& best = tree.best_trajectory();
  return best && best->aggregate_score >= config.positive_exit_threshold;
}

ExitDecision decide_exit(const SearchTree& tree, const ScoringConfig& config) {
  ExitDecision d;
  if (const auto& best = tree.best_trajectory()) d.best_score = best->aggregate_score;
  if (config.positive_exit_enabled && check_positive_exit(tree, config)) {
    d.kind = ExitKind::PositiveExit;
  } else if (config.negative_exit_enabled && check_negative_exit(tree, config)) {
    d.kind = ExitKind::NegativeExit;
  } else if (tree.completed_rollouts() >= tree.rollout_budget()) {
    d.kind = ExitKind::BudgetExhausted;
  }
  return d;
}

std::string_view to_string(AggregationScheme scheme) noexcept {
  switch (scheme) {
    case AggregationScheme::Minimum: return "minimum";
    case AggregationScheme::CumulativeProduct: return "cumulative_product";
    case AggregationScheme::CumulativeSum: return "cumulative_sum";
    case AggregationScheme::Average: return "average";
  }
  return "?";
}

std::string_view to_string(FutilityBound bound) noexcept {
  return bound == FutilityBound::LeafReward ? "leaf_reward" : "prefix_aggregate";
}

std::string_view to_string(ExitKind kind) noexcept {
  switch (kind) {
    case ExitKind::Continue: return "Continue";
    case ExitKind::PositiveExit: return "PositiveExit";
    case ExitKind::NegativeExit: return "NegativeExit";
    case ExitKind::BudgetExhausted: return "BudgetExhausted";
  }
  return "?";
}

AggregationScheme parse_aggregation_scheme(std::string_view text) {
  for (auto s : {AggregationScheme::Minimum, AggregationScheme::CumulativeProduct,
                 AggregationScheme::CumulativeSum, AggregationScheme::Average}) {
    if (to_string(s) == text) return s;
  }
  throw InvalidArgument(fmt::format("unknown aggregation scheme '{}'", text));
}

FutilityBound parse_futility_bound(std::string_view text) {
  if (text == "leaf_reward") return FutilityBound::LeafReward;
  if (text == "prefix_aggregate") return FutilityBound::PrefixAggregate;
  throw InvalidArgument(fmt::format("unknown futility bound '{}'", text));
}

}  // namespace ttsim
