#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>

#include "ttsim/errors.hpp"
#include "ttsim/serial_search.hpp"
#include "ttsim/simulator.hpp"

namespace ttsim {
namespace {

SimulationConfig mcts(bool pe, bool ne, bool boost) {
  SimulationConfig c;
  c.scoring.positive_exit_enabled = pe;
  c.scoring.negative_exit_enabled = ne;
  c.scheduler.boosting_enabled = boost;
  return c;
}

TEST(ArrivalTimes, FixedInterval) {
  const auto t = arrival_times(4, 2.0, ArrivalProcess::FixedInterval, 1);
  EXPECT_EQ(t, (std::vector<double>{0.5, 1.0, 1.5, 2.0}));
}

TEST(ArrivalTimes, PoissonSharesOneSequenceAcrossRates) {
  const auto a = arrival_times(2000, 1.0, ArrivalProcess::Poisson, 3);
  const auto b = arrival_times(2000, 4.0, ArrivalProcess::Poisson, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], a[i] / 4.0, 1e-9);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_NEAR(a.back() / 2000.0, 1.0, 0.08);
  EXPECT_THROW(arrival_times(3, 0.0, ArrivalProcess::Poisson, 3), InvalidArgument);
}

TEST(Simulator, DeterministicAcrossRuns) {
  const auto w = make_workload(40, {}, 21);
  const auto a = simulate(w, 4.0, {}, 21);
  const auto b = simulate(w, 4.0, {}, 21);
  ASSERT_EQ(a.records.size(), 40u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].request_id, i);
    EXPECT_EQ(a.records[i].completion_time, b.records[i].completion_time);
    EXPECT_EQ(a.records[i].tokens_generated, b.records[i].tokens_generated);
    EXPECT_EQ(a.records[i].exit_kind, b.records[i].exit_kind);
  }
  EXPECT_EQ(a.stats.events, b.stats.events);
}

// With one slot and requests far apart, every request runs exactly as the
// serial search would on an idle engine.
class SerialEquivalence : public ::testing::TestWithParam<std::tuple<bool, bool>> {};

TEST_P(SerialEquivalence, MatchesSerialSearch) {
  const auto [pe, ne] = GetParam();
  SimulationConfig c = mcts(pe, ne, false);
  c.scheduler.max_concurrency = 1;
  c.arrivals = ArrivalProcess::FixedInterval;
  const auto w = make_workload(30, {}, 13);
  const auto r = simulate(w, 1e-3, c, 13);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const SyntheticBackend b(w[i]);
    const auto serial = run_serial_search(b, c.search, c.scoring, c.cost);
    const RequestRecord& rec = r.records[i];
    EXPECT_NEAR(rec.latency, serial.latency, 1e-9) << "request " << i;
    EXPECT_EQ(rec.tokens_generated, serial.tokens) << "request " << i;
    EXPECT_EQ(rec.rollouts_completed, static_cast<std::int64_t>(serial.trajectories.size()));
    EXPECT_EQ(rec.best_score, serial.decision.best_score);
    EXPECT_EQ(rec.rollouts_preempted, 0);
    EXPECT_EQ(rec.solved, b.is_golden_trajectory(serial.best_steps));
  }
}

INSTANTIATE_TEST_SUITE_P(ExitFlags, SerialEquivalence,
                         ::testing::Values(std::tuple{false, false}, std::tuple{true, false},
                                           std::tuple{true, true}));

TEST(Simulator, NegativeExitCutsUnsolvableWork) {
  const auto w = make_workload(60, {}, 4);
  const auto with = simulate(w, 2.0, mcts(true, true, false), 4);
  const auto without = simulate(w, 2.0, mcts(true, false, false), 4);
  std::int64_t tok_with = 0, tok_without = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i].difficulty != Difficulty::Unsolvable) continue;
    EXPECT_EQ(with.records[i].exit_kind, RequestExit::Negative);
    tok_with += with.records[i].tokens_generated;
    tok_without += without.records[i].tokens_generated;
  }
  EXPECT_LT(tok_with * 5, tok_without);
}

TEST(SimulatorProperty, InvariantsHoldAfterEveryEvent) {
  for (std::uint64_t seed : {1, 2, 3}) {
    for (bool boost : {false, true}) {
      SimulationConfig c = mcts(true, true, boost);
      c.scheduler.max_concurrency = 6;
      const auto w = make_workload(30, {}, seed);
      Simulator sim(w, 6.0, c, seed);
      double last = 0.0;
      int checked = 0;
      sim.set_observer([&](const Simulator& s, const Event& e) {
        ASSERT_GE(e.time, last);
        last = e.time;
        const auto& st = s.scheduler_state();
        ASSERT_LE(st.running.size(), 6u);
        ASSERT_LE(st.total_active(), 6);
        ASSERT_GE(s.engine().inflight_requests, 0);
        for (std::uint32_t id : st.running) {
          const SearchTree* tree = s.tree(id);
          ASSERT_NE(tree, nullptr);
          ASSERT_EQ(tree->check_consistency(), "");
          ASSERT_EQ(tree->node(tree->root()).inflight_count,
                    static_cast<std::int64_t>(st.jobs[id].active_rollouts.size()));
          ASSERT_LE(tree->completed_rollouts() +
                        static_cast<std::int64_t>(st.jobs[id].active_rollouts.size()),
                    tree->rollout_budget());
        }
        for (const Job& j : st.jobs) {
          if (j.state != JobState::Running) ASSERT_TRUE(j.active_rollouts.empty());
        }
        ++checked;
      });
      const auto r = sim.run();
      EXPECT_GT(checked, 100);
      EXPECT_EQ(sim.engine().inflight_requests, 0);
      EXPECT_EQ(r.stats.rollouts_launched, r.stats.rollouts_completed + r.stats.rollouts_preempted);
      std::int64_t tokens = 0;
      std::int64_t preempted = 0;
      std::set<std::uint32_t> ids;
      for (const auto& rec : r.records) {
        tokens += rec.tokens_generated;
        preempted += rec.rollouts_preempted;
        ids.insert(rec.request_id);
        EXPECT_GE(rec.completion_time, rec.arrival_time);
        EXPECT_LE(rec.rollouts_completed, c.search.rollout_budget);
      }
      EXPECT_EQ(tokens, r.stats.tokens);
      EXPECT_EQ(preempted, r.stats.rollouts_preempted);
      EXPECT_EQ(ids.size(), w.size());
    }
  }
}

TEST(Simulator, BoostingRunsParallelRollouts) {
  const auto w = make_workload(10, {}, 6);
  SimulationConfig c = mcts(false, false, true);
  Simulator sim(w, 0.05, c, 6);
  int widest = 0;
  sim.set_observer([&](const Simulator& s, const Event&) {
    for (const Job& j : s.scheduler_state().jobs) {
      widest = std::max(widest, static_cast<int>(j.active_rollouts.size()));
    }
  });
  sim.run();
  EXPECT_GT(widest, 1);
}

TEST(Simulator, BeamSystem) {
  SimulationConfig c;
  c.system = SystemKind::Beam;
  const auto w = make_workload(20, {}, 8);
  Simulator sim(w, 2.0, c, 8);
  const auto r = sim.run();
  for (const auto& rec : r.records) {
    EXPECT_TRUE(rec.exit_kind == RequestExit::Positive || rec.exit_kind == RequestExit::BeamFinished);
    EXPECT_GT(rec.tokens_generated, 0);
  }
  EXPECT_EQ(sim.tree(0), nullptr);
  EXPECT_EQ(sim.engine().inflight_requests, 0);
}

TEST(Simulator, TraceIsJsonLines) {
  const auto w = make_workload(8, {}, 2);
  std::ostringstream trace;
  Simulator sim(w, 2.0, {}, 2);
  sim.set_trace(&trace);
  sim.run();
  std::istringstream in(trace.str());
  std::string line;
  int decisions = 0, arrivals = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    ASSERT_TRUE(j.contains("time"));
    const auto kind = j.at("kind").get<std::string>();
    decisions += kind == "Decision" ? 1 : 0;
    arrivals += kind == "Arrival" ? 1 : 0;
  }
  EXPECT_EQ(arrivals, 8);
  EXPECT_GT(decisions, 0);
}

TEST(Simulator, EventCapStopsRunawayRuns) {
  SimulationConfig c;
  c.event_cap = 10;
  const auto w = make_workload(5, {}, 1);
  EXPECT_THROW(simulate(w, 1.0, c, 1), SimulationError);
}

TEST(Simulator, RejectsTimeRegression) {
  const auto w = make_workload(3, {}, 1);
  Simulator sim(w, 1.0, {}, 1);
  ASSERT_TRUE(sim.step());
  ASSERT_GT(sim.engine().clock, 0.0);
  EXPECT_THROW(sim.step_event(Event{0.0, 999, EventKind::SchedulerTick, 0, 0}), SimulationError);
}

TEST(Simulator, RejectsBadConfig) {
  SimulationConfig c;
  c.cost.per_token_latency = 0.0;
  EXPECT_THROW(simulate(make_workload(2, {}, 1), 1.0, c, 1), InvalidArgument);
  EXPECT_THROW(simulate(make_workload(2, {}, 1), -1.0, {}, 1), InvalidArgument);
}

TEST(SimulatorNames, RoundTrip) {
  EXPECT_EQ(parse_arrival_process(to_string(ArrivalProcess::Poisson)), ArrivalProcess::Poisson);
  EXPECT_EQ(parse_arrival_process("fixed_interval"), ArrivalProcess::FixedInterval);
  EXPECT_THROW(parse_arrival_process("bursty"), InvalidArgument);
}

}  // namespace
}  // namespace ttsim
