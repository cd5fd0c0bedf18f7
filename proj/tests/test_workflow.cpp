#include "magspo/workflow.hpp"

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "magspo/rng.hpp"
#include "magspo/synthenv.hpp"

namespace {

using magspo::AgentContext;
using magspo::AgentParams;
using magspo::AgentSlot;
using magspo::Case;
using magspo::FeatureMap;
using magspo::JointRollout;
using magspo::Report;
using magspo::Rng;
using magspo::RuleSet;
using magspo::Vocab;
using magspo::WorkflowPlan;

const Vocab& vocab() {
  static const Vocab v = magspo::default_vocab();
  return v;
}

const RuleSet& rules() {
  static const RuleSet rs = magspo::default_rules();
  return rs;
}

Case sample_case(int id = 0) {
  return magspo::generate_case(7, id, "train", vocab(), rules());
}

AgentParams random_agents(const WorkflowPlan& plan, std::uint64_t seed, double scale = 0.3) {
  const FeatureMap fmap(magspo::default_feature_config(vocab()));
  AgentParams agents = magspo::make_agent_params(plan, fmap);
  Rng rng(seed);
  for (auto& [id, params] : agents) {
    for (double& w : params.weights) w = scale * rng.next_normal();
  }
  return agents;
}

TEST(PlanTest, ValidationRejectsBadShapes) {
  WorkflowPlan empty;
  empty.name = "empty";
  EXPECT_THROW(empty.validate(), std::invalid_argument);

  WorkflowPlan unnamed;
  unnamed.slots = {{"", "a", true, {}}};
  EXPECT_THROW(unnamed.validate(), std::invalid_argument);

  WorkflowPlan forward;
  forward.slots = {{"x", "a", true, {1}}, {"y", "b", true, {}}};
  EXPECT_THROW(forward.validate(), std::invalid_argument);

  WorkflowPlan self_ref;
  self_ref.slots = {{"x", "a", true, {0}}};
  EXPECT_THROW(self_ref.validate(), std::invalid_argument);
}

TEST(PlanTest, ReferencePlanShape) {
  const WorkflowPlan plan = magspo::reference_plan();
  ASSERT_EQ(plan.size(), 4);
  EXPECT_EQ(plan.slots[0].role, "left");
  EXPECT_EQ(plan.slots[1].role, "central");
  EXPECT_EQ(plan.slots[2].role, "right");
  EXPECT_EQ(plan.slots[3].role, "global");
  for (const auto& s : plan.slots) EXPECT_TRUE(s.takes_query);
  EXPECT_TRUE(plan.slots[0].input_slots.empty());
  EXPECT_EQ(plan.slots[3].input_slots, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(plan.agent_ids(),
            (std::vector<std::string>{"left", "central", "right", "global"}));
}

TEST(PlanTest, SingleAgentPlanShape) {
  const WorkflowPlan plan = magspo::single_agent_plan();
  ASSERT_EQ(plan.size(), 1);
  EXPECT_EQ(plan.slots[0].role, "global");
  EXPECT_TRUE(plan.slots[0].input_slots.empty());
  EXPECT_EQ(plan.agent_ids(), std::vector<std::string>{"global"});
}

TEST(PlanTest, LookupByName) {
  EXPECT_EQ(magspo::plan_by_name("reference").name, "reference");
  EXPECT_EQ(magspo::plan_by_name("single").name, "single");
  EXPECT_THROW(magspo::plan_by_name("bogus"), std::invalid_argument);
}

TEST(PlanTest, SharedAgentIdsCollapseParameters) {
  WorkflowPlan plan;
  plan.name = "shared";
  plan.slots = {{"left", "shared", true, {}}, {"right", "shared", true, {}}};
  plan.validate();
  EXPECT_EQ(plan.agent_ids(), std::vector<std::string>{"shared"});
  const FeatureMap fmap(magspo::default_feature_config(vocab()));
  EXPECT_EQ(magspo::make_agent_params(plan, fmap).size(), 1u);
}

TEST(ContextTest, FirstSlotIsTagThenQueryTokens) {
  const WorkflowPlan plan = magspo::reference_plan();
  const Case c = sample_case();
  const AgentContext ctx = magspo::build_context(plan, 0, c, {}, vocab());
  const auto q = magspo::query_tokens(c.query_features, vocab());
  ASSERT_EQ(ctx.prompt_ids.size(), 1u + q.size());
  EXPECT_EQ(ctx.prompt_ids[0], vocab().id_of("<left>"));
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(ctx.prompt_ids[i + 1], q[i]);
  EXPECT_EQ(ctx.query_features, c.query_features);
  EXPECT_EQ(ctx.eos_id, vocab().eos_id());
  EXPECT_EQ(ctx.max_len, vocab().max_len());
}

TEST(ContextTest, GlobalSlotAppendsTaggedReports) {
  const WorkflowPlan plan = magspo::reference_plan();
  const Case c = sample_case();
  const std::vector<Report> prior = {
      magspo::split_report("### Findings a pleural effusion ### Impression left effusion",
                           vocab()),
      magspo::split_report("### Findings the heart size is normal ### Impression", vocab()),
      magspo::split_report("### Findings ### Impression no acute findings", vocab()),
  };
  const AgentContext ctx = magspo::build_context(plan, 3, c, prior, vocab());

  std::vector<int> expected;
  expected.push_back(vocab().id_of("<global>"));
  const auto q = magspo::query_tokens(c.query_features, vocab());
  expected.insert(expected.end(), q.begin(), q.end());
  const std::vector<std::string> tags = {"<left>", "<central>", "<right>"};
  for (std::size_t k = 0; k < prior.size(); ++k) {
    expected.push_back(vocab().id_of(tags[k]));
    expected.push_back(vocab().id_of("###"));
    expected.push_back(vocab().id_of("Findings"));
    const auto f = prior[k].findings.content(vocab());
    expected.insert(expected.end(), f.begin(), f.end());
    expected.push_back(vocab().id_of("###"));
    expected.push_back(vocab().id_of("Impression"));
    const auto im = prior[k].impression.content(vocab());
    expected.insert(expected.end(), im.begin(), im.end());
  }
  EXPECT_EQ(ctx.prompt_ids, expected);
}

TEST(ContextTest, MissingPredecessorReportThrows) {
  const WorkflowPlan plan = magspo::reference_plan();
  const Case c = sample_case();
  const std::vector<Report> too_few = {Report{}, Report{}};
  try {
    magspo::build_context(plan, 3, c, too_few, vocab());
    FAIL() << "expected a missing-predecessor error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("has not run"), std::string::npos);
  }
}

TEST(ContextTest, SlotWithoutQuerySkipsQueryTokens) {
  WorkflowPlan plan;
  plan.name = "noquery";
  plan.slots = {{"global", "global", false, {}}};
  plan.validate();
  const Case c = sample_case();
  const AgentContext ctx = magspo::build_context(plan, 0, c, {}, vocab());
  EXPECT_EQ(ctx.prompt_ids, std::vector<int>{vocab().id_of("<global>")});
  EXPECT_TRUE(ctx.query_features.empty());
}

TEST(ParseOutputTest, WellFormedSequenceParses) {
  const auto seq =
      magspo::tokenize("### Findings the left lung shows effusion ### Impression left effusion",
                       vocab());
  const Report r = magspo::parse_output(seq, vocab());
  EXPECT_FALSE(r.malformed);
  EXPECT_EQ(magspo::detokenize(r.findings, vocab()), "the left lung shows effusion");
  EXPECT_EQ(magspo::detokenize(r.impression, vocab()), "left effusion");
}

TEST(ParseOutputTest, HeaderlessBabbleBecomesEmptyMalformed) {
  const auto seq = magspo::tokenize("the the lung effusion normal", vocab());
  const Report r = magspo::parse_output(seq, vocab());
  EXPECT_TRUE(r.malformed);
  EXPECT_EQ(r.findings.length(), 0);
  EXPECT_EQ(r.impression.length(), 0);
  EXPECT_TRUE(r.findings.terminated);
  EXPECT_TRUE(r.impression.terminated);
}

TEST(ParseOutputTest, MissingImpressionIsMalformed) {
  const auto seq = magspo::tokenize("### Findings the left lung shows effusion", vocab());
  EXPECT_TRUE(magspo::parse_output(seq, vocab()).malformed);
}

TEST(RolloutSeedTest, DistinctAcrossCasesAndIndices) {
  std::set<std::uint64_t> seen;
  for (int case_id = 0; case_id < 20; ++case_id) {
    for (int idx = 0; idx < 20; ++idx) {
      seen.insert(magspo::rollout_seed(42, case_id, idx));
    }
  }
  EXPECT_EQ(seen.size(), 400u);
}

TEST(RolloutTest, DeterministicGivenSeed) {
  const WorkflowPlan plan = magspo::reference_plan();
  const AgentParams agents = random_agents(plan, 1);
  const auto snaps = magspo::snapshot_agents(agents);
  const Case c = sample_case(3);
  const JointRollout a = magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 50, 2);
  const JointRollout b = magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 50, 2);
  ASSERT_EQ(a.slots.size(), b.slots.size());
  for (std::size_t k = 0; k < a.slots.size(); ++k) {
    EXPECT_EQ(a.slots[k].seq, b.slots[k].seq);
    EXPECT_EQ(a.slots[k].token_logprobs, b.slots[k].token_logprobs);
  }
  EXPECT_EQ(a.final_report, b.final_report);
}

TEST(RolloutTest, RolloutIndexChangesSamples) {
  const WorkflowPlan plan = magspo::reference_plan();
  const AgentParams agents = random_agents(plan, 1);
  const auto snaps = magspo::snapshot_agents(agents);
  const Case c = sample_case(3);
  const JointRollout a = magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 50, 0);
  const JointRollout b = magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 50, 1);
  bool any_diff = false;
  for (std::size_t k = 0; k < a.slots.size(); ++k) {
    if (!(a.slots[k].seq == b.slots[k].seq)) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(RolloutTest, SlotsFollowPlanAndFinalReportIsLast) {
  const WorkflowPlan plan = magspo::reference_plan();
  const AgentParams agents = random_agents(plan, 2);
  const auto snaps = magspo::snapshot_agents(agents);
  const Case c = sample_case(5);
  const JointRollout r = magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 9, 0);
  ASSERT_EQ(r.slots.size(), 4u);
  EXPECT_EQ(r.case_id, c.case_id);
  EXPECT_EQ(r.final_report, r.slots.back().parsed);
  for (const auto& slot : r.slots) {
    EXPECT_GE(slot.seq.length(), 1);
    EXPECT_LE(slot.seq.length(), vocab().max_len());
    EXPECT_EQ(slot.token_logprobs.size(), static_cast<std::size_t>(slot.seq.length()));
  }
}

TEST(RolloutTest, LogprobsMatchRecomputation) {
  const WorkflowPlan plan = magspo::reference_plan();
  const AgentParams agents = random_agents(plan, 4);
  const auto snaps = magspo::snapshot_agents(agents);
  for (int trial = 0; trial < 25; ++trial) {
    const Case c = sample_case(trial);
    const JointRollout r =
        magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 77, trial);
    for (int k = 0; k < plan.size(); ++k) {
      const auto& slot = r.slots[static_cast<std::size_t>(k)];
      const double recomputed = magspo::sequence_logprob(
          agents.at(plan.slots[static_cast<std::size_t>(k)].agent_id), slot.context, slot.seq,
          1.0);
      EXPECT_NEAR(recomputed, slot.logprob_sum, 1e-12) << "trial " << trial << " slot " << k;
    }
  }
}

TEST(RolloutTest, DownstreamPromptUsesUpstreamReports) {
  const WorkflowPlan plan = magspo::reference_plan();
  const AgentParams agents = random_agents(plan, 6);
  const auto snaps = magspo::snapshot_agents(agents);
  const Case c = sample_case(8);
  const JointRollout r = magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 31, 0);
  const std::vector<Report> prior = {r.slots[0].parsed, r.slots[1].parsed, r.slots[2].parsed};
  const AgentContext expected = magspo::build_context(plan, 3, c, prior, vocab());
  EXPECT_EQ(r.slots[3].context, expected);
}

TEST(RolloutTest, MissingAgentParametersThrow) {
  const WorkflowPlan plan = magspo::reference_plan();
  AgentParams agents = random_agents(plan, 1);
  agents.erase("global");
  const auto snaps = magspo::snapshot_agents(agents);
  const Case c = sample_case();
  EXPECT_THROW(magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 1, 0),
               std::invalid_argument);
}

TEST(RolloutTest, GreedyIsDeterministic) {
  const WorkflowPlan plan = magspo::reference_plan();
  const AgentParams agents = random_agents(plan, 12);
  const Case c = sample_case(2);
  const JointRollout a = magspo::run_joint_greedy(plan, agents, c, vocab(), 1.0);
  const JointRollout b = magspo::run_joint_greedy(plan, agents, c, vocab(), 1.0);
  for (std::size_t k = 0; k < a.slots.size(); ++k) {
    EXPECT_EQ(a.slots[k].seq, b.slots[k].seq);
  }
}

TEST(RolloutTest, JsonRoundTripKeepsTokensAndLogprobs) {
  const WorkflowPlan plan = magspo::reference_plan();
  const AgentParams agents = random_agents(plan, 3);
  const auto snaps = magspo::snapshot_agents(agents);
  const Case c = sample_case(4);
  JointRollout r = magspo::run_joint_rollout(plan, snaps, c, vocab(), 1.0, 5, 1);
  r.reward.total = 1.5;
  const auto j = magspo::rollout_to_json(plan, r);
  const JointRollout back = magspo::rollout_from_json(j);
  EXPECT_EQ(back.case_id, r.case_id);
  EXPECT_EQ(back.seed, r.seed);
  ASSERT_EQ(back.slots.size(), r.slots.size());
  for (std::size_t k = 0; k < r.slots.size(); ++k) {
    EXPECT_EQ(back.slots[k].seq.ids, r.slots[k].seq.ids);
    EXPECT_EQ(back.slots[k].token_logprobs, r.slots[k].token_logprobs);
    EXPECT_NEAR(back.slots[k].logprob_sum, r.slots[k].logprob_sum, 1e-12);
  }
  EXPECT_DOUBLE_EQ(back.reward.total, 1.5);
  EXPECT_THROW(magspo::rollout_from_json(nlohmann::json{{"schema", "other"}}),
               std::runtime_error);
}

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
