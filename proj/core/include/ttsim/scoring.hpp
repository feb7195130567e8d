#pragma once

#include <span>
#include <string>
#include <string_view>

#include "ttsim/search_tree.hpp"

namespace ttsim {

enum class AggregationScheme { Minimum, CumulativeProduct, CumulativeSum, Average };

// Which quantity is compared against the acceptance threshold when deciding
// futility. PrefixAggregate = min(leaf reward, aggregate of the path so far).
enum class FutilityBound { LeafReward, PrefixAggregate };

enum class LeafClass { Futile, Viable };

enum class ExitKind { Continue, PositiveExit, NegativeExit, BudgetExhausted };

struct ScoringConfig {
  AggregationScheme scheme = AggregationScheme::CumulativeProduct;
  double accept_threshold = 0.3;
  double positive_exit_threshold = 0.5;
  double first_step_threshold = 0.1;
  bool strict_negative_exit = false;
  FutilityBound futility_bound = FutilityBound::LeafReward;
  bool positive_exit_enabled = true;
  bool negative_exit_enabled = true;

  // Throws InvalidArgument / UnsupportedScheme.
  void validate() const;
};

struct ExitDecision {
  ExitKind kind = ExitKind::Continue;
  double best_score = 0.0;
};

double aggregate_trajectory(std::span<const double> rewards, AggregationScheme scheme);

// True for schemes whose trajectory score never exceeds its last step's reward.
constexpr bool has_leaf_upper_bound(AggregationScheme scheme) noexcept {
  return scheme == AggregationScheme::Minimum || scheme == AggregationScheme::CumulativeProduct;
}

LeafClass classify_leaf(double leaf_reward, double prefix_aggregate, const ScoringConfig& config);

// Fires when every expandable leaf left in the tree is futile. In selective
// mode, leaves under a first step scored below `first_step_threshold` are
// ignored. An unexpanded tree never fires.
bool check_negative_exit(const SearchTree& tree, const ScoringConfig& config);

bool check_positive_exit(const SearchTree& tree, const ScoringConfig& config);

// Positive > Negative > Budget. Disabled exits are skipped.
ExitDecision decide_exit(const SearchTree& tree, const ScoringConfig& config);

std::string_view to_string(AggregationScheme scheme) noexcept;
std::string_view to_string(FutilityBound bound) noexcept;
std::string_view to_string(ExitKind kind) noexcept;
AggregationScheme parse_aggregation_scheme(std::string_view text);
FutilityBound parse_futility_bound(std::string_view text);

}  // namespace ttsim
