#include "ttsim/search_tree.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ttsim/errors.hpp"

namespace ttsim {

double wu_puct_score(double q_value, double prior, std::int64_t parent_visits,
                     std::int64_t parent_inflight, std::int64_t child_visits,
                     std::int64_t child_inflight, const SelectionParams& params) {
  if (parent_visits < 0 || parent_inflight < 0 || child_visits < 0 || child_inflight < 0) {
    throw InvalidArgument("wu_puct_score: visit and in-flight counts must be non-negative");
  }
  if (!(prior >= 0.0 && prior <= 1.0)) {
    throw InvalidArgument(fmt::format("wu_puct_score: prior {} outside [0, 1]", prior));
  }
  const auto parent_total = static_cast<double>(parent_visits + parent_inflight);
  const auto child_total = static_cast<double>(child_visits + child_inflight);
  return q_value + params.c_puct * prior * std::sqrt(parent_total) / (1.0 + child_total);
}

SearchTree::SearchTree(StepRef root_ref, std::int64_t rollout_budget)
    : rollout_budget_(rollout_budget) {
  if (rollout_budget <= 0) {
    throw InvalidArgument("SearchTree: rollout budget must be positive");
  }
  StepNode root;
  root.id = NodeId{0};
  root.step_ref = root_ref;
  nodes_.push_back(std::move(root));
  open_.push_back(true);
}

const StepNode& SearchTree::node(NodeId id) const {
  if (index_of(id) >= nodes_.size()) {
    throw InvalidArgument(fmt::format("unknown node id {}", index_of(id)));
  }
  return nodes_[index_of(id)];
}

StepNode& SearchTree::mutable_node(NodeId id) {
  if (index_of(id) >= nodes_.size()) {
    throw InvalidArgument(fmt::format("unknown node id {}", index_of(id)));
  }
  return nodes_[index_of(id)];
}

void SearchTree::refresh_open(NodeId from) {
  std::optional<NodeId> cur = from;
  while (cur) {
    const StepNode& n = nodes_[index_of(*cur)];
    bool open = false;
    if (n.is_leaf()) {
      open = !n.is_terminal;
    } else {
      for (NodeId c : n.children) {
        if (open_[index_of(c)]) {
          open = true;
          break;
        }
      }
    }
    if (open_[index_of(*cur)] == open && *cur != from) break;
    open_[index_of(*cur)] = open;
    cur = n.parent;
  }
}

NodeId SearchTree::select_leaf(const SelectionParams& params) {
  if (!has_expandable_leaf()) {
    throw NoExpandableLeaf("select_leaf: every leaf of the tree is terminal");
  }
  NodeId cur = root();
  while (!nodes_[index_of(cur)].is_leaf()) {
    const StepNode& parent = nodes_[index_of(cur)];
    const double parent_mean =
        parent.visit_count > 0 ? parent.value_sum / static_cast<double>(parent.visit_count) : 0.5;
    std::optional<NodeId> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (NodeId c : parent.children) {
      if (!open_[index_of(c)]) continue;
      const StepNode& child = nodes_[index_of(c)];
      const double q = child.visit_count > 0
                           ? child.value_sum / static_cast<double>(child.visit_count)
                           : parent_mean;
      const double score = wu_puct_score(q, child.prior, parent.visit_count,
                                         parent.inflight_count, child.visit_count,
                                         child.inflight_count, params);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    if (!best) {
      throw AccountingError("select_leaf: open node without an open child");
    }
    cur = *best;
  }
  for (NodeId id : path_from_root(cur)) {
    ++nodes_[index_of(id)].inflight_count;
  }
  return cur;
}

std::vector<NodeId> SearchTree::expand(NodeId leaf, std::span<const StepCandidate> candidates) {
  const StepNode& target = node(leaf);
  if (target.is_terminal) {
    throw StructuralError(fmt::format("expand: node {} is terminal", index_of(leaf)));
  }
  if (!target.is_leaf()) {
    throw StructuralError(fmt::format("expand: node {} already has children", index_of(leaf)));
  }
  if (candidates.empty()) {
    throw InvalidArgument("expand: candidate list is empty");
  }
  for (const StepCandidate& c : candidates) {
    if (!(c.prior >= 0.0 && c.prior <= 1.0) || !(c.prm_reward >= 0.0 && c.prm_reward <= 1.0)) {
      throw InvalidArgument("expand: candidate prior and reward must lie in [0, 1]");
    }
  }

  const int depth = target.depth + 1;
  std::vector<NodeId> ids;
  ids.reserve(candidates.size());
  for (const StepCandidate& c : candidates) {
    StepNode child;
    child.id = NodeId{static_cast<std::uint32_t>(nodes_.size())};
    child.parent = leaf;
    child.step_ref = c.step_ref;
    child.prm_reward = c.prm_reward;
    child.prior = c.prior;
    child.is_terminal = c.is_terminal;
    child.depth = depth;
    ids.push_back(child.id);
    open_.push_back(!c.is_terminal);
    nodes_.push_back(std::move(child));
  }
  nodes_[index_of(leaf)].children = ids;
  refresh_open(leaf);
  return ids;
}

void SearchTree::register_inflight(NodeId id) { ++mutable_node(id).inflight_count; }

void SearchTree::force_terminate(NodeId leaf) {
  StepNode& n = mutable_node(leaf);
  if (!n.is_leaf()) {
    throw StructuralError("force_terminate: node has children");
  }
  if (n.is_terminal) return;
  n.is_terminal = true;
  n.force_terminated = true;
  refresh_open(leaf);
}

void SearchTree::backpropagate(const Trajectory& trajectory) {
  if (trajectory.node_path.empty()) {
    throw InvalidArgument("backpropagate: empty trajectory");
  }
  NodeId expected_parent = root();
  for (NodeId id : trajectory.node_path) {
    const StepNode& n = node(id);
    if (!n.parent || *n.parent != expected_parent) {
      throw InvalidArgument("backpropagate: trajectory is not a root-to-leaf path");
    }
    expected_parent = id;
  }
  if (!node(trajectory.node_path.back()).is_terminal) {
    throw InvalidArgument("backpropagate: trajectory does not end at a terminal node");
  }
  if (completed_rollouts_ >= rollout_budget_) {
    throw AccountingError("backpropagate: rollout budget already spent");
  }
  if (nodes_[0].inflight_count < 1) {
    throw AccountingError("backpropagate: root has no registered rollout");
  }
  for (NodeId id : trajectory.node_path) {
    if (nodes_[index_of(id)].inflight_count < 1) {
      throw AccountingError(
          fmt::format("backpropagate: in-flight count of node {} would go negative", index_of(id)));
    }
  }

  auto apply = [&](StepNode& n) {
    n.value_sum += trajectory.aggregate_score;
    n.visit_count += 1;
    n.inflight_count -= 1;
  };
  apply(nodes_[0]);
  for (NodeId id : trajectory.node_path) apply(nodes_[index_of(id)]);

  ++completed_rollouts_;
  if (!best_ || trajectory.aggregate_score > best_->aggregate_score) {
    best_ = trajectory;
  }
}

void SearchTree::cancel_inflight(std::span<const NodeId> rollout_path) {
  for (NodeId id : rollout_path) {
    if (node(id).inflight_count < 1) {
      throw AccountingError(
          fmt::format("cancel_inflight: in-flight count of node {} would go negative", index_of(id)));
    }
  }
  for (NodeId id : rollout_path) --nodes_[index_of(id)].inflight_count;
}

std::vector<NodeId> SearchTree::path_from_root(NodeId id) const {
  std::vector<NodeId> path;
  std::optional<NodeId> cur = id;
  while (cur) {
    path.push_back(*cur);
    cur = node(*cur).parent;
  }
  return {path.rbegin(), path.rend()};
}

std::vector<StepRef> SearchTree::step_refs_to(NodeId id) const {
  std::vector<StepRef> refs;
  for (NodeId n : path_from_root(id)) {
    if (n != root()) refs.push_back(nodes_[index_of(n)].step_ref);
  }
  return refs;
}

std::vector<double> SearchTree::rewards_to(NodeId id) const {
  std::vector<double> rewards;
  for (NodeId n : path_from_root(id)) {
    if (n != root()) rewards.push_back(nodes_[index_of(n)].prm_reward);
  }
  return rewards;
}

std::string SearchTree::check_consistency() const {
  std::vector<int> seen(nodes_.size(), 0);
  for (const StepNode& n : nodes_) {
    if (n.inflight_count < 0) return fmt::format("node {}: negative in-flight count", index_of(n.id));
    if (n.visit_count < 0) return fmt::format("node {}: negative visit count", index_of(n.id));
    if (n.is_terminal && !n.children.empty()) {
      return fmt::format("node {}: terminal node with children", index_of(n.id));
    }
    if (n.id != root() && !n.parent) return fmt::format("node {}: missing parent", index_of(n.id));
    for (NodeId c : n.children) {
      if (index_of(c) >= nodes_.size()) return fmt::format("node {}: dangling child", index_of(n.id));
      const StepNode& child = nodes_[index_of(c)];
      if (!child.parent || *child.parent != n.id) {
        return fmt::format("node {}: child {} points elsewhere", index_of(n.id), index_of(c));
      }
      if (child.depth != n.depth + 1) return fmt::format("node {}: bad depth", index_of(c));
      if (++seen[index_of(c)] > 1) return fmt::format("node {}: listed twice", index_of(c));
    }
  }
  if (nodes_[0].parent) return "root has a parent";
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (seen[i] != 1) return fmt::format("node {}: unreachable from root", i);
  }
  return {};
}

std::string SearchTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const StepNode& n : nodes_) {
    nodes.push_back({
        {"id", index_of(n.id)},
        {"parent", n.parent ? nlohmann::json(index_of(*n.parent)) : nlohmann::json(nullptr)},
        {"reward", n.prm_reward},
        {"prior", n.prior},
        {"N", n.visit_count},
        {"O", n.inflight_count},
        {"W", n.value_sum},
        {"terminal", n.is_terminal},
        {"depth", n.depth},
    });
  }
  nlohmann::json doc = {{"root", 0}, {"nodes", std::move(nodes)}};
  return doc.dump();
}

NodeId greedy_child(const SearchTree& tree, NodeId parent) {
  const StepNode& p = tree.node(parent);
  if (p.children.empty()) {
    throw StructuralError("greedy_child: node has no children");
  }
  NodeId best = p.children.front();
  for (NodeId c : p.children) {
    if (tree.node(c).prm_reward > tree.node(best).prm_reward) best = c;
  }
  return best;
}

NodeId simulate_to_terminal(SearchTree& tree, NodeId start, const StepGenerator& backend,
                            const SearchLimits& limits) {
  NodeId cur = start;
  while (!tree.node(cur).is_terminal) {
    if (tree.node(cur).depth >= limits.max_depth) {
      tree.force_terminate(cur);
      break;
    }
    if (tree.node(cur).is_leaf()) {
      const auto context = tree.step_refs_to(cur);
      const auto candidates = backend.generate(context, limits.expand_width);
      tree.expand(cur, candidates);
    }
    cur = greedy_child(tree, cur);
    tree.register_inflight(cur);
  }
  return cur;
}

}  // namespace ttsim
