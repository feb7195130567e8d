#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ttsim {

enum class RequestExit { Positive, Negative, BudgetExhausted, BeamFinished };

inline constexpr std::array<RequestExit, 4> kRequestExits{
    RequestExit::Positive, RequestExit::Negative, RequestExit::BudgetExhausted,
    RequestExit::BeamFinished};

struct RequestRecord {
  std::uint32_t request_id = 0;
  double arrival_time = 0.0;
  double completion_time = 0.0;
  double latency = 0.0;
  std::int64_t rollouts_completed = 0;
  std::int64_t rollouts_preempted = 0;
  std::int64_t tokens_generated = 0;
  RequestExit exit_kind = RequestExit::BudgetExhausted;
  double best_score = 0.0;
  bool solved = false;
};

struct SummaryStats {
  std::size_t requests = 0;
  double p50_latency = 0.0;
  double p99_latency = 0.0;
  double throughput = 0.0;
  std::int64_t total_tokens = 0;
  std::array<std::int64_t, 4> exit_histogram{};  // indexed like kRequestExits
  double solve_rate = 0.0;

  std::int64_t exits(RequestExit kind) const noexcept {
    return exit_histogram[static_cast<std::size_t>(kind)];
  }
};

// Nearest rank: sorted[ceil(p / 100 * n) - 1].
double percentile(std::span<const double> values, double p);

// Throughput is requests / (last completion - first arrival), 0 for a zero span.
SummaryStats summarize(std::span<const RequestRecord> records);

std::string records_to_csv(std::span<const RequestRecord> records);
std::string summary_to_json(const SummaryStats& stats);

std::string_view to_string(RequestExit kind) noexcept;

}  // namespace ttsim
