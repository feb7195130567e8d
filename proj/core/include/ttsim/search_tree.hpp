#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttsim/step.hpp"

namespace ttsim {

enum class NodeId : std::uint32_t {};

constexpr std::size_t index_of(NodeId id) noexcept { return static_cast<std::size_t>(id); }

// One reasoning step. N = visit_count, O = inflight_count, W = value_sum,
// P = prior.
struct StepNode {
  NodeId id{};
  std::optional<NodeId> parent;
  StepRef step_ref = 0;
  double prm_reward = 0.0;
  double prior = 0.0;
  std::int64_t visit_count = 0;
  std::int64_t inflight_count = 0;
  double value_sum = 0.0;
  bool is_terminal = false;
  // Set when the depth cap, not the backend, ended the trajectory here.
  bool force_terminated = false;
  int depth = 0;
  std::vector<NodeId> children;

  bool is_leaf() const noexcept { return children.empty(); }
  bool expandable() const noexcept { return children.empty() && !is_terminal; }
};

struct Trajectory {
  // Root child first, terminal node last. The root itself is not listed.
  std::vector<NodeId> node_path;
  double aggregate_score = 0.0;
  std::int64_t rollout_index = 0;
  bool force_terminated = false;
};

struct SelectionParams {
  double c_puct = 1.0;
};

// Q + c * P * sqrt(N(s) + O(s)) / (1 + N(s,a) + O(s,a)).
// With both in-flight counts zero this is plain PUCT, computed along the same
// arithmetic path.
double wu_puct_score(double q_value, double prior, std::int64_t parent_visits,
                     std::int64_t parent_inflight, std::int64_t child_visits,
                     std::int64_t child_inflight, const SelectionParams& params);

// Node-reusing MCTS tree with unobserved-count bookkeeping for in-flight
// rollouts. Mutated by one execution context at a time.
class SearchTree {
 public:
  SearchTree(StepRef root_ref, std::int64_t rollout_budget);

  NodeId root() const noexcept { return NodeId{0}; }
  const StepNode& node(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const StepNode> nodes() const noexcept { return nodes_; }

  std::int64_t rollout_budget() const noexcept { return rollout_budget_; }
  std::int64_t completed_rollouts() const noexcept { return completed_rollouts_; }
  const std::optional<Trajectory>& best_trajectory() const noexcept { return best_; }

  // False once every leaf reachable from the root is terminal.
  bool has_expandable_leaf() const noexcept { return !nodes_[0].is_terminal && open_[0]; }

  // Descends by WU-PUCT from the root to a non-terminal leaf and registers
  // the rollout (O += 1) on every node of the descent, root included.
  // Unvisited children are valued at their parent's mean, or 0.5 when the
  // parent was never visited. Argmax ties go to the lowest child index.
  NodeId select_leaf(const SelectionParams& params);

  // Appends one child per candidate under `leaf`, in candidate order.
  std::vector<NodeId> expand(NodeId leaf, std::span<const StepCandidate> candidates);

  // O += 1 on a single node; used when a rollout moves below its selected leaf.
  void register_inflight(NodeId id);

  // Marks a non-terminal leaf at the depth cap as terminal.
  void force_terminate(NodeId leaf);

  // N += 1, W += score and O -= 1 on the root and every node of the path.
  void backpropagate(const Trajectory& trajectory);

  // O -= 1 along `rollout_path` (root included when the rollout registered it).
  void cancel_inflight(std::span<const NodeId> rollout_path);

  // Root first, `id` last.
  std::vector<NodeId> path_from_root(NodeId id) const;
  // Step refs of the path root-child .. id (empty for the root).
  std::vector<StepRef> step_refs_to(NodeId id) const;
  // PRM rewards of the path root-child .. id (empty for the root).
  std::vector<double> rewards_to(NodeId id) const;

  // Parent/child links, acyclicity, terminal-leaf and counter sanity.
  // Returns an empty string when consistent, otherwise a description.
  std::string check_consistency() const;

  // {"root":..,"nodes":[{id,parent,reward,prior,N,O,W,terminal,depth},...]}
  std::string to_json() const;

 private:
  StepNode& mutable_node(NodeId id);
  void refresh_open(NodeId from);

  std::vector<StepNode> nodes_;
  // open_[i]: the subtree under node i still holds a non-terminal leaf.
  std::vector<bool> open_;
  std::int64_t rollout_budget_;
  std::int64_t completed_rollouts_ = 0;
  std::optional<Trajectory> best_;
};

struct SearchLimits {
  int expand_width = 4;
  int max_depth = 16;
};

// Expands from `start` and follows the highest-reward child until a terminal
// node, keeping every generated sibling in the tree. Each node moved into is
// registered as in-flight. Returns `start` unchanged when it is terminal.
NodeId simulate_to_terminal(SearchTree& tree, NodeId start, const StepGenerator& backend,
                            const SearchLimits& limits);

// Index of the highest-reward child (lowest index on ties).
NodeId greedy_child(const SearchTree& tree, NodeId parent);

}  // namespace ttsim
