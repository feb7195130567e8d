#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ttsim {

// Opaque handle identifying a generated reasoning step in the backend.
using StepRef = std::uint64_t;

struct StepCandidate {
  StepRef step_ref = 0;
  std::int32_t token_count = 1;
  double prior = 0.0;
  double prm_reward = 0.0;
  bool is_terminal = false;
};

// Step-generation interface standing in for the LLM + PRM pair. Implementations
// must be pure: the same context and width always yield the same candidates.
class StepGenerator {
 public:
  virtual ~StepGenerator() = default;

  virtual StepRef root_ref() const = 0;

  // `context_path` lists the step refs from the first step down to the node
  // being expanded; it is empty when expanding the root.
  virtual std::vector<StepCandidate> generate(std::span<const StepRef> context_path,
                                              int width) const = 0;
};

}  // namespace ttsim
