#include "ttsim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ttsim/errors.hpp"

namespace ttsim {

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile: empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw InvalidArgument(fmt::format("percentile: p={} outside (0, 100]", p));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

SummaryStats summarize(std::span<const RequestRecord> records) {
  if (records.empty()) throw InvalidArgument("summarize: no records");
  SummaryStats s;
  s.requests = records.size();
  std::vector<double> latencies;
  latencies.reserve(records.size());
  double first_arrival = records.front().arrival_time;
  double last_completion = records.front().completion_time;
  std::int64_t solved = 0;
  for (const RequestRecord& r : records) {
    latencies.push_back(r.latency);
    first_arrival = std::min(first_arrival, r.arrival_time);
    last_completion = std::max(last_completion, r.completion_time);
    s.total_tokens += r.tokens_generated;
    ++s.exit_histogram[static_cast<std::size_t>(r.exit_kind)];
    solved += r.solved ? 1 : 0;
  }
  s.p50_latency = percentile(latencies, 50.0);
  s.p99_latency = percentile(latencies, 99.0);
  const double span = last_completion - first_arrival;
  s.throughput = span > 0.0 ? static_cast<double>(records.size()) / span : 0.0;
  s.solve_rate = static_cast<double>(solved) / static_cast<double>(records.size());
  return s;
}

std::string records_to_csv(std::span<const RequestRecord> records) {
  std::string out = "request_id,arrival,completion,latency,rollouts,preempted,tokens,exit,best_score,solved\n";
  for (const RequestRecord& r : records) {
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{},{},{},{},{:.6f},{}\n", r.request_id,
                       r.arrival_time, r.completion_time, r.latency, r.rollouts_completed,
                       r.rollouts_preempted, r.tokens_generated, to_string(r.exit_kind),
                       r.best_score, r.solved ? 1 : 0);
  }
  return out;
}

std::string summary_to_json(const SummaryStats& stats) {
  nlohmann::ordered_json hist;
  for (RequestExit kind : kRequestExits) hist[std::string(to_string(kind))] = stats.exits(kind);
  nlohmann::ordered_json doc{
      {"requests", stats.requests},
      {"p50_latency", stats.p50_latency},
      {"p99_latency", stats.p99_latency},
      {"throughput", stats.throughput},
      {"total_tokens", stats.total_tokens},
      {"exit_histogram", hist},
      {"solve_rate", stats.solve_rate},
  };
  return doc.dump(2) + "\n";
}

std::string_view to_string(RequestExit kind) noexcept {
  switch (kind) {
    case RequestExit::Positive: return "Positive";
    case RequestExit::Negative: return "Negative";
    case RequestExit::BudgetExhausted: return "BudgetExhausted";
    case RequestExit::BeamFinished: return "BeamFinished";
  }
  return "?";
}

}  // namespace ttsim
