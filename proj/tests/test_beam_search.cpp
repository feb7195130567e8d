#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "test_support.hpp"
#include "ttsim/beam_search.hpp"
#include "ttsim/errors.hpp"

namespace ttsim {
namespace {

// Candidates keyed on the last step ref (0 for the root).
class TableGen final : public StepGenerator {
 public:
  std::map<StepRef, std::vector<StepCandidate>> table;

  StepRef root_ref() const override { return 0; }
  std::vector<StepCandidate> generate(std::span<const StepRef> ctx, int) const override {
    return table.at(ctx.empty() ? 0 : ctx.back());
  }
};

StepCandidate cand(StepRef ref, double reward, bool terminal = false, int tokens = 10) {
  return {ref, tokens, 0.5, reward, terminal};
}

BeamConfig small(int k, int n) {
  BeamConfig c;
  c.beam_width = k;
  c.candidates_per_beam = n;
  return c;
}

TEST(BeamStep, KeepsBestAcrossAllBeams) {
  TableGen g;
  g.table[1] = {cand(11, 0.9), cand(12, 0.2)};
  g.table[2] = {cand(21, 0.8), cand(22, 0.95)};
  std::vector<PartialTrajectory> beams{{{1}, {1.0}, 1.0, false}, {{2}, {0.5}, 0.5, false}};
  const auto r = beam_step(beams, small(2, 2), AggregationScheme::CumulativeProduct, g);
  ASSERT_EQ(r.beams.size(), 2u);
  EXPECT_EQ(r.beams[0].steps, (std::vector<StepRef>{1, 11}));
  EXPECT_NEAR(r.beams[0].score, 0.9, 1e-12);
  EXPECT_EQ(r.beams[1].steps, (std::vector<StepRef>{2, 22}));
  EXPECT_NEAR(r.beams[1].score, 0.475, 1e-12);
  EXPECT_EQ(r.requests, 4);
  EXPECT_EQ(r.tokens, 40);
}

TEST(BeamStep, TiesGoToLowerCandidateIndex) {
  TableGen g;
  g.table[0] = {cand(1, 0.5), cand(2, 0.7), cand(3, 0.5), cand(4, 0.5)};
  const std::vector<PartialTrajectory> root(1);
  const auto r = beam_step(root, small(2, 4), AggregationScheme::CumulativeProduct, g);
  ASSERT_EQ(r.beams.size(), 2u);
  EXPECT_EQ(r.beams[0].steps.back(), 2u);
  EXPECT_EQ(r.beams[1].steps.back(), 1u);
}

TEST(BeamStep, TerminalSurvivorsFinish) {
  TableGen g;
  g.table[0] = {cand(1, 0.9, true), cand(2, 0.8), cand(3, 0.1, true)};
  const std::vector<PartialTrajectory> root(1);
  const auto r = beam_step(root, small(2, 3), AggregationScheme::CumulativeProduct, g);
  ASSERT_EQ(r.finished.size(), 1u);
  EXPECT_EQ(r.finished[0].steps.back(), 1u);
  EXPECT_TRUE(r.finished[0].terminal);
  ASSERT_EQ(r.beams.size(), 1u);
  EXPECT_EQ(r.beams[0].steps.back(), 2u);
}

TEST(BeamStep, Errors) {
  TableGen g;
  g.table[0] = {cand(1, 0.5)};
  const std::vector<PartialTrajectory> none;
  EXPECT_THROW(beam_step(none, small(2, 1), AggregationScheme::Minimum, g), InvalidArgument);
  std::vector<PartialTrajectory> done(1);
  done[0].terminal = true;
  EXPECT_THROW(beam_step(done, small(2, 1), AggregationScheme::Minimum, g), InvalidArgument);
  const std::vector<PartialTrajectory> three(3);
  EXPECT_THROW(beam_step(three, small(2, 1), AggregationScheme::Minimum, g), InvalidArgument);
  EXPECT_THROW(small(0, 1).validate(), InvalidArgument);
}

TEST(BeamSearch, PositiveExitStopsEarly) {
  TableGen g;
  g.table[0] = {cand(1, 0.95, true), cand(2, 0.6)};
  g.table[2] = {cand(3, 0.99, true)};
  ScoringConfig s;
  BeamSearch search(g, small(2, 2), s);
  EXPECT_EQ(search.pending_requests(), 2);
  search.step();
  EXPECT_TRUE(search.done());
  EXPECT_EQ(search.pending_requests(), 0);
  const auto o = search.outcome();
  EXPECT_TRUE(o.positive_exit);
  EXPECT_TRUE(o.complete);
  EXPECT_EQ(o.steps, 1);
  EXPECT_THROW(search.step(), InvalidArgument);
}

TEST(BeamSearch, WithoutPositiveExitRunsToTheEnd) {
  TableGen g;
  g.table[0] = {cand(1, 0.95, true), cand(2, 0.6)};
  g.table[2] = {cand(3, 0.99, true)};
  BeamConfig c = small(2, 2);
  c.positive_exit_enabled = false;
  const auto o = run_beam_search(g, c, {});
  EXPECT_FALSE(o.positive_exit);
  EXPECT_EQ(o.steps, 2);
  EXPECT_EQ(o.best.steps, (std::vector<StepRef>{1}));
  EXPECT_EQ(o.tokens, 30);
}

TEST(BeamSearch, DepthCapLeavesIncompleteBest) {
  TableGen g;
  g.table[0] = {cand(1, 0.9)};
  g.table[1] = {cand(2, 0.8)};
  BeamConfig c = small(1, 1);
  c.max_depth = 2;
  const auto o = run_beam_search(g, c, {});
  EXPECT_FALSE(o.complete);
  EXPECT_EQ(o.best.steps, (std::vector<StepRef>{1, 2}));
  EXPECT_NEAR(o.best.score, 0.72, 1e-12);
}

// With a beam wide enough to hold every path the search is exhaustive, so its
// best finished score must equal the enumerated optimum.
TEST(BeamSearchProperty, WideBeamFindsEnumeratedOptimum) {
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    const testing::ExplicitTree tree(seed, 4, 3);
    for (auto scheme : {AggregationScheme::Minimum, AggregationScheme::CumulativeProduct}) {
      ScoringConfig s;
      s.scheme = scheme;
      BeamConfig c = small(1000, 3);
      c.positive_exit_enabled = false;
      const auto o = run_beam_search(tree, c, s);
      const auto all = tree.completions(0, {}, scheme);
      ASSERT_TRUE(o.complete);
      EXPECT_EQ(o.best.score, *std::max_element(all.begin(), all.end())) << "seed " << seed;
      EXPECT_EQ(o.best.score, testing::ExplicitTree::aggregate(o.best.rewards, scheme));
    }
  }
}

TEST(BeamSearchProperty, BeamsNeverExceedWidthAndTokensAddUp) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const testing::ExplicitTree tree(seed, 5, 4);
    const BeamConfig c = small(3, 4);
    BeamSearch search(tree, c, {});
    std::int64_t tokens = 0;
    while (!search.done()) {
      const int expected_requests = search.pending_requests();
      const auto& r = search.step();
      tokens += r.tokens;
      EXPECT_LE(r.beams.size() + r.finished.size(), 3u);
      EXPECT_LE(r.requests, expected_requests);
      EXPECT_TRUE(std::is_sorted(r.beams.begin(), r.beams.end(),
                                 [](const auto& a, const auto& b) { return a.score > b.score; }));
    }
    EXPECT_EQ(search.outcome().tokens, tokens);
  }
}

}  // namespace
}  // namespace ttsim
