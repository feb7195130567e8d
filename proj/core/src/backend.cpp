#include "ttsim/backend.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ttsim/errors.hpp"
#include "ttsim/random.hpp"

namespace ttsim {
namespace {

constexpr std::uint64_t kRootSalt = 0x726f6f74ULL;
constexpr std::uint64_t kLureSalt = 0x6c757265ULL;
constexpr std::uint64_t kShuffleSalt = 0x73687566ULL;
constexpr double kPriorSharpness = 2.5;

std::vector<StepCandidate> generate_impl(const SyntheticProblemSpec& problem, StepRef root,
                                         std::span<const StepRef> golden,
                                         std::span<const StepRef> context, int width) {
  if (width < 1) {
    throw InvalidArgument("generate_steps: width must be at least 1");
  }
  const int depth = static_cast<int>(context.size()) + 1;
  if (depth > problem.depth_range.max) {
    throw InvalidArgument(fmt::format("generate_steps: context depth {} exceeds max depth {}",
                                      context.size(), problem.depth_range.max));
  }
  const StepRef parent = context.empty() ? root : context.back();
  const RewardProfile& profile = problem.reward_profile;

  const bool golden_parent = context.size() < golden.size() &&
                             std::equal(context.begin(), context.end(), golden.begin());
  int golden_child = -1;
  int lure_child = -1;
  if (golden_parent) {
    golden_child = problem.golden_path[context.size()];
    if (golden_child >= width) golden_child = -1;
    if (golden_child >= 0 && depth < profile.lure_depth && width >= 2) {
      const auto offset = mix64(hash_combine(parent, kLureSalt)) % static_cast<std::uint64_t>(width - 1);
      lure_child = (golden_child + 1 + static_cast<int>(offset)) % width;
    }
  }
  const int golden_depth = static_cast<int>(problem.golden_path.size());

  std::vector<StepCandidate> out;
  out.reserve(static_cast<std::size_t>(width));
  double weight_sum = 0.0;
  for (int i = 0; i < width; ++i) {
    StepCandidate c;
    c.step_ref = hash_combine(parent, static_cast<std::uint64_t>(i));
    CounterRng rng(hash_combine(problem.seed, c.step_ref));
    c.token_count = static_cast<std::int32_t>(rng.uniform_int(problem.tokens.min, problem.tokens.max));
    c.prior = std::exp(kPriorSharpness * rng.uniform());
    weight_sum += c.prior;

    const double u = rng.uniform();
    const RewardRange& range = i == golden_child ? profile.golden
                               : i == lure_child ? profile.lure
                                                 : profile.other;
    c.prm_reward = range.lo + (range.hi - range.lo) * u;

    const double stop = rng.uniform();
    if (i == golden_child) {
      c.is_terminal = depth == golden_depth;
    } else {
      c.is_terminal = depth >= problem.depth_range.max ||
                      (depth >= problem.depth_range.min && stop < profile.terminal_probability);
    }
    out.push_back(c);
  }
  for (StepCandidate& c : out) c.prior /= weight_sum;
  return out;
}

std::vector<StepRef> compute_golden_refs(const SyntheticProblemSpec& problem, StepRef root) {
  std::vector<StepRef> refs;
  StepRef cur = root;
  for (int idx : problem.golden_path) {
    cur = hash_combine(cur, static_cast<std::uint64_t>(idx));
    refs.push_back(cur);
  }
  return refs;
}

}  // namespace

StepRef problem_root_ref(const SyntheticProblemSpec& problem) noexcept {
  return hash_combine(problem.seed, kRootSalt);
}

std::vector<StepRef> golden_refs(const SyntheticProblemSpec& problem) {
  return compute_golden_refs(problem, problem_root_ref(problem));
}

std::vector<StepCandidate> generate_steps(const SyntheticProblemSpec& problem,
                                          std::span<const StepRef> context_path, int width) {
  const StepRef root = problem_root_ref(problem);
  return generate_impl(problem, root, compute_golden_refs(problem, root), context_path, width);
}

double golden_product(const SyntheticProblemSpec& problem) {
  if (problem.golden_path.empty()) return 0.0;
  const auto refs = golden_refs(problem);
  double product = 1.0;
  for (std::size_t d = 0; d < refs.size(); ++d) {
    const auto cands = generate_steps(problem, std::span(refs).first(d), problem.branching);
    product *= cands[static_cast<std::size_t>(problem.golden_path[d])].prm_reward;
  }
  return product;
}

SyntheticBackend::SyntheticBackend(SyntheticProblemSpec problem)
    : problem_(std::move(problem)),
      root_(problem_root_ref(problem_)),
      golden_(compute_golden_refs(problem_, root_)) {}

std::vector<StepCandidate> SyntheticBackend::generate(std::span<const StepRef> context_path,
                                                      int width) const {
  return generate_impl(problem_, root_, golden_, context_path, width);
}

bool SyntheticBackend::is_golden_trajectory(std::span<const StepRef> path) const {
  return !golden_.empty() && std::ranges::equal(path, golden_);
}

void CostModel::validate() const {
  if (!(per_token_latency > 0.0)) throw InvalidArgument("per_token_latency must be positive");
  if (engine_capacity < 1) throw InvalidArgument("engine_capacity must be positive");
  if (!(reward_latency >= 0.0)) throw InvalidArgument("reward_latency must be non-negative");
}

double service_time(int token_count, const CostModel& model, int inflight_load) {
  if (token_count < 1) throw InvalidArgument("service_time: token_count must be at least 1");
  if (inflight_load < 0) throw InvalidArgument("service_time: inflight_load must be non-negative");
  const double contention =
      std::max(1.0, static_cast<double>(inflight_load) / static_cast<double>(model.engine_capacity));
  return static_cast<double>(token_count) * model.per_token_latency * contention;
}

std::vector<SyntheticProblemSpec> make_workload(int count, const WorkloadMixture& mixture,
                                                std::uint64_t seed,
                                                const WorkloadProfile& profile) {
  if (count < 0) throw InvalidArgument("make_workload: count must be non-negative");
  const std::array<double, 3> fractions{mixture.easy, mixture.hard, mixture.unsolvable};
  for (double f : fractions) {
    if (!(f >= 0.0)) throw InvalidArgument("make_workload: mixture fractions must be non-negative");
  }
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument(fmt::format("make_workload: mixture sums to {}, expected 1", total));
  }

  std::array<int, 3> counts{};
  int assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    counts[i] = static_cast<int>(std::floor(count * fractions[i] + 1e-9));
    assigned += counts[i];
  }
  const auto largest = static_cast<std::size_t>(
      std::distance(fractions.begin(), std::max_element(fractions.begin(), fractions.end())));
  counts[largest] += count - assigned;

  std::vector<Difficulty> classes;
  classes.reserve(static_cast<std::size_t>(count));
  classes.insert(classes.end(), static_cast<std::size_t>(counts[0]), Difficulty::Easy);
  classes.insert(classes.end(), static_cast<std::size_t>(counts[1]), Difficulty::HardSolvable);
  classes.insert(classes.end(), static_cast<std::size_t>(counts[2]), Difficulty::Unsolvable);
  CounterRng shuffle(hash_combine(seed, kShuffleSalt));
  for (std::size_t i = classes.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(classes[i - 1], classes[j]);
  }

  std::vector<SyntheticProblemSpec> out;
  out.reserve(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const DifficultyProfile& dp = classes[i] == Difficulty::Easy           ? profile.easy
                                  : classes[i] == Difficulty::HardSolvable ? profile.hard
                                                                           : profile.unsolvable;
    SyntheticProblemSpec spec;
    spec.problem_id = static_cast<std::uint32_t>(i);
    spec.difficulty = classes[i];
    spec.depth_range = dp.depth_range;
    spec.branching = profile.branching;
    spec.reward_profile = dp.rewards;
    spec.tokens = profile.tokens;

    const std::uint64_t base = hash_combine(seed, i);
    constexpr int kMaxAttempts = 10000;
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt == kMaxAttempts) {
        throw InvalidArgument(fmt::format(
            "make_workload: no {} problem reaches golden floor {} after {} attempts",
            to_string(spec.difficulty), profile.golden_floor, kMaxAttempts));
      }
      spec.seed = hash_combine(base, static_cast<std::uint64_t>(attempt));
      spec.golden_path.clear();
      if (spec.difficulty == Difficulty::Unsolvable) break;
      CounterRng rng(hash_combine(spec.seed, 0x676f6c64ULL));
      const auto length = rng.uniform_int(dp.depth_range.min, dp.depth_range.max);
      for (std::int64_t d = 0; d < length; ++d) {
        spec.golden_path.push_back(static_cast<int>(rng.uniform_int(0, profile.branching - 1)));
      }
      if (golden_product(spec) > profile.golden_floor) break;
    }
    out.push_back(std::move(spec));
  }
  return out;
}

std::string_view to_string(Difficulty difficulty) noexcept {
  switch (difficulty) {
    case Difficulty::Easy: return "easy";
    case Difficulty::HardSolvable: return "hard_solvable";
    case Difficulty::Unsolvable: return "unsolvable";
  }
  return "?";
}

Difficulty parse_difficulty(std::string_view text) {
  for (auto d : {Difficulty::Easy, Difficulty::HardSolvable, Difficulty::Unsolvable}) {
    if (to_string(d) == text) return d;
  }
  throw InvalidArgument(fmt::format("unknown difficulty '{}'", text));
}

std::string workload_to_json(std::span<const SyntheticProblemSpec> workload) {
  nlohmann::json problems = nlohmann::json::array();
  for (const auto& p : workload) {
    const auto& r = p.reward_profile;
    problems.push_back({
        {"problem_id", p.problem_id},
        {"seed", p.seed},
        {"difficulty", to_string(p.difficulty)},
        {"depth_range", {p.depth_range.min, p.depth_range.max}},
        {"branching", p.branching},
        {"tokens", {p.tokens.min, p.tokens.max}},
        {"golden_path", p.golden_path},
        {"rewards",
         {{"golden", {r.golden.lo, r.golden.hi}},
          {"other", {r.other.lo, r.other.hi}},
          {"lure", {r.lure.lo, r.lure.hi}},
          {"lure_depth", r.lure_depth},
          {"terminal_probability", r.terminal_probability}}},
    });
  }
  return nlohmann::json{{"problems", std::move(problems)}}.dump(1);
}

std::vector<SyntheticProblemSpec> workload_from_json(std::string_view text) {
  std::vector<SyntheticProblemSpec> out;
  try {
    const auto doc = nlohmann::json::parse(text);
    auto range = [](const nlohmann::json& j) { return RewardRange{j.at(0), j.at(1)}; };
    for (const auto& j : doc.at("problems")) {
      SyntheticProblemSpec p;
      p.problem_id = j.at("problem_id");
      p.seed = j.at("seed");
      p.difficulty = parse_difficulty(j.at("difficulty").get<std::string>());
      p.depth_range = {j.at("depth_range").at(0), j.at("depth_range").at(1)};
      p.branching = j.at("branching");
      p.tokens = {j.at("tokens").at(0), j.at("tokens").at(1)};
      p.golden_path = j.at("golden_path").get<std::vector<int>>();
      const auto& r = j.at("rewards");
      p.reward_profile.golden = range(r.at("golden"));
      p.reward_profile.other = range(r.at("other"));
      p.reward_profile.lure = range(r.at("lure"));
      p.reward_profile.lure_depth = r.at("lure_depth");
      p.reward_profile.terminal_probability = r.at("terminal_probability");
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(fmt::format("workload JSON: {}", e.what()));
  }
  return out;
}

}  // namespace ttsim
