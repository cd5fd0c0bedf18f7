#include "magspo/rewards.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "magspo/rng.hpp"
#include "magspo/synthenv.hpp"
#include "magspo/textcore.hpp"

namespace {

using magspo::Entity;
using magspo::EntityCategory;
using magspo::Relation;
using magspo::RelationLabel;
using magspo::Report;
using magspo::ReportGraph;
using magspo::Rng;
using magspo::RuleSet;
using magspo::Vocab;

// Longest common subsequence by exhaustive enumeration: every subsequence of
// the candidate is checked against the reference. Exponential, so only for
// short sequences.
int brute_force_lcs(const std::vector<int>& cand, const std::vector<int>& ref) {
  int best = 0;
  const int n = static_cast<int>(cand.size());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<int> sub;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) sub.push_back(cand[static_cast<std::size_t>(i)]);
    }
    std::size_t j = 0;
    for (std::size_t r = 0; r < ref.size() && j < sub.size(); ++r) {
      if (ref[r] == sub[j]) ++j;
    }
    if (j == sub.size()) best = std::max(best, static_cast<int>(sub.size()));
  }
  return best;
}

double rouge(std::vector<int> cand, std::vector<int> ref, double beta = 1.0) {
  return magspo::rouge_l(std::span<const int>(cand), std::span<const int>(ref), beta);
}

Report findings_only(const std::string& words, const Vocab& vocab) {
  Report r;
  r.findings = magspo::tokenize(words, vocab);
  r.impression = magspo::tokenize("", vocab);
  return r;
}

std::map<std::string, int> entity_multiset(const ReportGraph& g) {
  std::map<std::string, int> m;
  for (const auto& e : g.entities) m[e.text + "|" + magspo::to_string(e.category)] += 1;
  return m;
}

std::map<std::string, int> relation_multiset(const ReportGraph& g) {
  std::map<std::string, int> m;
  for (const auto& r : g.relations) {
    const Entity* s = g.find(r.src);
    const Entity* d = g.find(r.dst);
    m[s->text + ">" + d->text + "|" + magspo::to_string(r.label)] += 1;
  }
  return m;
}

ReportGraph random_graph(Rng& rng) {
  static const std::vector<std::string> texts = {"left lung", "right lung", "heart",
                                                 "effusion",  "normal",     "mediastinum"};
  ReportGraph g;
  const int n = 1 + static_cast<int>(rng.next_below(5));
  for (int i = 0; i < n; ++i) {
    Entity e;
    e.id = i * 3;  // non-consecutive ids on purpose
    e.text = texts[rng.next_below(texts.size())];
    e.category = rng.next_below(2) == 0 ? EntityCategory::Anatomy : EntityCategory::Observation;
    g.entities.push_back(e);
  }
  const int m = static_cast<int>(rng.next_below(4));
  for (int i = 0; i < m; ++i) {
    Relation r;
    r.src = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n))) * 3;
    r.dst = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n))) * 3;
    r.label = static_cast<RelationLabel>(rng.next_below(3));
    g.relations.push_back(r);
  }
  return g;
}

TEST(RougeTest, IdenticalSequencesScoreOne) {
  EXPECT_DOUBLE_EQ(rouge({1, 2, 3}, {1, 2, 3}), 1.0);
}

TEST(RougeTest, DisjointSequencesScoreZero) {
  EXPECT_DOUBLE_EQ(rouge({1, 2}, {3, 4, 5}), 0.0);
}

TEST(RougeTest, ThreeQuarterOverlapFixture) {
  // LCS of (a c d e) against (a b c d) is (a c d); P = R = 3/4, F1 = 0.75.
  EXPECT_DOUBLE_EQ(rouge({1, 3, 4, 5}, {1, 2, 3, 4}), 0.75);
}

TEST(RougeTest, EmptyConventions) {
  EXPECT_DOUBLE_EQ(rouge({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(rouge({1}, {}), 0.0);
  EXPECT_DOUBLE_EQ(rouge({}, {1}), 0.0);
}

TEST(RougeTest, BetaWeightsRecall) {
  // P = 1, R = 1/2: F2 = 5 * 1 * 0.5 / (0.5 + 4) = 5/9.
  EXPECT_NEAR(rouge({1}, {1, 2}, 2.0), 5.0 / 9.0, 1e-15);
  // beta -> favors recall, so a high-precision candidate scores lower.
  EXPECT_LT(rouge({1}, {1, 2}, 2.0), rouge({1}, {1, 2}, 1.0));
}

TEST(RougeTest, SymmetricAtBetaOne) {
  Rng rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> a(rng.next_below(9)), b(rng.next_below(9));
    for (int& x : a) x = static_cast<int>(rng.next_below(5));
    for (int& x : b) x = static_cast<int>(rng.next_below(5));
    EXPECT_DOUBLE_EQ(rouge(a, b), rouge(b, a));
  }
}

TEST(RougeTest, MatchesBruteForceEnumeration) {
  Rng rng(808);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> cand(rng.next_below(11)), ref(rng.next_below(11));
    for (int& x : cand) x = static_cast<int>(rng.next_below(5));
    for (int& x : ref) x = static_cast<int>(rng.next_below(5));
    const int oracle = brute_force_lcs(cand, ref);
    EXPECT_EQ(magspo::detail::lcs_length(cand, ref), oracle);
    double expected;
    if (cand.empty() && ref.empty()) {
      expected = 1.0;
    } else if (oracle == 0) {
      expected = 0.0;
    } else {
      const double p = static_cast<double>(oracle) / static_cast<double>(cand.size());
      const double r = static_cast<double>(oracle) / static_cast<double>(ref.size());
      expected = 2.0 * p * r / (r + p);
    }
    EXPECT_DOUBLE_EQ(rouge(cand, ref), expected) << "trial " << trial;
  }
}

TEST(LabelerTest, PlainTriggerFires) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const auto labels = magspo::toy_labeler(findings_only("left pleural effusion", v), v, rs);
  ASSERT_EQ(labels.size(), 8u);
  EXPECT_EQ(labels[0], 1);  // left_effusion
  for (std::size_t i = 1; i < labels.size(); ++i) EXPECT_EQ(labels[i], 0);
}

TEST(LabelerTest, NegationSuppressesTrigger) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const auto labels = magspo::toy_labeler(findings_only("no left pleural effusion", v), v, rs);
  for (auto l : labels) EXPECT_EQ(l, 0);
}

TEST(LabelerTest, NegationWindowIsFourTokens) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  // "no" sits four tokens before the trigger start: still inside the window.
  const auto near = magspo::toy_labeler(findings_only("no a a a left effusion", v), v, rs);
  EXPECT_EQ(near[0], 0);
  // Five tokens before: outside the window, the trigger fires.
  const auto far = magspo::toy_labeler(findings_only("no a a a a left effusion", v), v, rs);
  EXPECT_EQ(far[0], 1);
}

TEST(LabelerTest, TriggerGapBoundedByRuleWindow) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  // left_effusion allows a gap of up to window = 3 positions.
  EXPECT_EQ(magspo::toy_labeler(findings_only("left a a effusion", v), v, rs)[0], 1);
  EXPECT_EQ(magspo::toy_labeler(findings_only("left a a a effusion", v), v, rs)[0], 0);
}

TEST(LabelerTest, LaterUnnegatedOccurrenceStillFires) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const auto labels = magspo::toy_labeler(
      findings_only("no left effusion seen there is a left effusion", v), v, rs);
  EXPECT_EQ(labels[0], 1);
}

TEST(LabelerTest, TruthGrammarSentencesFire) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const auto labels =
      magspo::toy_labeler(findings_only("the left lung shows effusion", v), v, rs);
  EXPECT_EQ(labels[0], 1);
  const auto clear =
      magspo::toy_labeler(findings_only("the left lung is unremarkable", v), v, rs);
  for (auto l : clear) EXPECT_EQ(l, 0);
}

TEST(LabelAccuracyTest, CountsExactMatches) {
  EXPECT_DOUBLE_EQ(magspo::label_accuracy({1, 0, 1, 0}, {1, 1, 1, 0}), 0.75);
  EXPECT_DOUBLE_EQ(magspo::label_accuracy({0, 0}, {0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(magspo::label_accuracy({1}, {0}), 0.0);
}

TEST(LabelAccuracyTest, SchemaMismatchThrows) {
  EXPECT_THROW(magspo::label_accuracy({1, 0}, {1}), std::invalid_argument);
}

TEST(GraphExtractTest, AnatomyObservationAndRelation) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const ReportGraph g =
      magspo::toy_graph_extract(findings_only("left lung effusion", v), v, rs);
  ASSERT_EQ(g.entities.size(), 2u);
  EXPECT_EQ(g.entities[0].text, "left lung");
  EXPECT_EQ(g.entities[0].category, EntityCategory::Anatomy);
  EXPECT_EQ(g.entities[1].text, "effusion");
  EXPECT_EQ(g.entities[1].category, EntityCategory::Observation);
  ASSERT_EQ(g.relations.size(), 1u);
  EXPECT_EQ(g.relations[0].label, RelationLabel::LocatedAt);
  EXPECT_EQ(g.find(g.relations[0].src)->text, "effusion");
  EXPECT_EQ(g.find(g.relations[0].dst)->text, "left lung");
}

TEST(GraphExtractTest, GreedyPrefersLongestPhrase) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const ReportGraph g = magspo::toy_graph_extract(findings_only("left lung", v), v, rs);
  ASSERT_EQ(g.entities.size(), 1u);
  EXPECT_EQ(g.entities[0].text, "left lung");
  const ReportGraph bare = magspo::toy_graph_extract(findings_only("left heart", v), v, rs);
  ASSERT_EQ(bare.entities.size(), 2u);
  EXPECT_EQ(bare.entities[0].text, "left");
}

TEST(GraphExtractTest, RelationWindowIsFiveTokens) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  // Anatomy span ends at position 1; the observation start may be at most
  // five positions later.
  const ReportGraph inside =
      magspo::toy_graph_extract(findings_only("left lung a a a a effusion", v), v, rs);
  EXPECT_EQ(inside.relations.size(), 1u);
  const ReportGraph outside =
      magspo::toy_graph_extract(findings_only("left lung a a a a a effusion", v), v, rs);
  EXPECT_EQ(outside.relations.size(), 0u);
}

TEST(GraphExtractTest, ObservationBeforeAnatomyMakesNoRelation) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const ReportGraph g =
      magspo::toy_graph_extract(findings_only("effusion left lung", v), v, rs);
  EXPECT_EQ(g.entities.size(), 2u);
  EXPECT_EQ(g.relations.size(), 0u);
}

TEST(GraphF1Test, TwoThirdsEntityOverlapFixture) {
  // Three truth entities, two recovered plus one spurious, no relations on
  // either side: entity F1 = 2/3, relation F1 = 1 by the empty convention,
  // mean = 5/6.
  ReportGraph truth;
  truth.entities = {{0, "left lung", EntityCategory::Anatomy},
                    {1, "effusion", EntityCategory::Observation},
                    {2, "heart", EntityCategory::Anatomy}};
  ReportGraph pred;
  pred.entities = {{0, "left lung", EntityCategory::Anatomy},
                   {1, "effusion", EntityCategory::Observation},
                   {2, "mediastinum", EntityCategory::Anatomy}};
  EXPECT_DOUBLE_EQ(magspo::graph_f1(pred, truth), 5.0 / 6.0);
}

TEST(GraphF1Test, EmptyConventions) {
  ReportGraph empty;
  ReportGraph one;
  one.entities = {{0, "heart", EntityCategory::Anatomy}};
  EXPECT_DOUBLE_EQ(magspo::graph_f1(empty, empty), 1.0);
  EXPECT_DOUBLE_EQ(magspo::graph_f1(empty, one), 0.5);  // entities 0, relations 1
  EXPECT_DOUBLE_EQ(magspo::graph_f1(one, empty), 0.5);
}

TEST(GraphF1Test, MatchingIgnoresIdsAndOrder) {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const ReportGraph g = random_graph(rng);
    ReportGraph relabeled;
    std::vector<int> order(g.entities.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);
    std::map<int, int> newid;
    for (std::size_t i = 0; i < order.size(); ++i) {
      Entity e = g.entities[static_cast<std::size_t>(order[i])];
      newid[e.id] = 1000 + static_cast<int>(i);
      e.id = 1000 + static_cast<int>(i);
      relabeled.entities.push_back(e);
    }
    for (auto r : g.relations) {
      r.src = newid[r.src];
      r.dst = newid[r.dst];
      relabeled.relations.push_back(r);
    }
    std::reverse(relabeled.relations.begin(), relabeled.relations.end());
    EXPECT_DOUBLE_EQ(magspo::graph_f1(relabeled, g), 1.0) << "trial " << trial;
  }
}

TEST(GraphF1Test, DuplicatesMatchWithMultiplicity) {
  ReportGraph truth;
  truth.entities = {{0, "effusion", EntityCategory::Observation}};
  ReportGraph pred;
  pred.entities = {{0, "effusion", EntityCategory::Observation},
                   {1, "effusion", EntityCategory::Observation}};
  // Entity P = 1/2, R = 1, F1 = 2/3; relations empty on both sides.
  EXPECT_DOUBLE_EQ(magspo::graph_f1(pred, truth), 0.5 * (2.0 / 3.0 + 1.0));
}

TEST(GraphF1Test, CategoryDistinguishesSameText) {
  ReportGraph truth;
  truth.entities = {{0, "normal", EntityCategory::Observation}};
  ReportGraph pred;
  pred.entities = {{0, "normal", EntityCategory::Anatomy}};
  EXPECT_DOUBLE_EQ(magspo::graph_f1(pred, truth), 0.5);
}

TEST(LateralitySubgraphTest, KeepsOneHopNeighborhood) {
  ReportGraph g;
  g.entities = {{0, "left lung", EntityCategory::Anatomy},
                {1, "effusion", EntityCategory::Observation},
                {2, "heart", EntityCategory::Anatomy},
                {3, "cardiomegaly", EntityCategory::Observation}};
  g.relations = {{1, 0, RelationLabel::LocatedAt}, {3, 2, RelationLabel::LocatedAt}};
  const ReportGraph sub = magspo::laterality_subgraph(g);
  const auto ents = entity_multiset(sub);
  EXPECT_EQ(ents.size(), 2u);
  EXPECT_EQ(ents.count("left lung|Anatomy"), 1u);
  EXPECT_EQ(ents.count("effusion|Observation"), 1u);
  ASSERT_EQ(sub.relations.size(), 1u);
  EXPECT_EQ(sub.find(sub.relations[0].dst)->text, "left lung");
}

TEST(LateralitySubgraphTest, SeedWithoutRelationsSurvivesAlone) {
  ReportGraph g;
  g.entities = {{0, "right lung", EntityCategory::Anatomy},
                {1, "heart", EntityCategory::Anatomy}};
  const ReportGraph sub = magspo::laterality_subgraph(g);
  ASSERT_EQ(sub.entities.size(), 1u);
  EXPECT_EQ(sub.entities[0].text, "right lung");
  EXPECT_TRUE(sub.relations.empty());
}

TEST(LateralitySubgraphTest, NoSeedGivesEmptyGraph) {
  ReportGraph g;
  g.entities = {{0, "heart", EntityCategory::Anatomy},
                {1, "cardiomegaly", EntityCategory::Observation}};
  g.relations = {{1, 0, RelationLabel::LocatedAt}};
  const ReportGraph sub = magspo::laterality_subgraph(g);
  EXPECT_TRUE(sub.entities.empty());
  EXPECT_TRUE(sub.relations.empty());
}

TEST(LateralitySubgraphTest, TransitiveFollowsChains) {
  ReportGraph g;
  g.entities = {{0, "left", EntityCategory::Anatomy},
                {1, "effusion", EntityCategory::Observation},
                {2, "consolidation", EntityCategory::Observation}};
  g.relations = {{1, 0, RelationLabel::LocatedAt}, {2, 1, RelationLabel::SuggestiveOf}};
  const ReportGraph one_hop = magspo::laterality_subgraph(g);
  EXPECT_EQ(one_hop.entities.size(), 2u);
  EXPECT_EQ(one_hop.relations.size(), 1u);
  const ReportGraph full =
      magspo::laterality_subgraph(g, magspo::default_laterality_seeds(), true);
  EXPECT_EQ(full.entities.size(), 3u);
  EXPECT_EQ(full.relations.size(), 2u);
}

TEST(LateralitySubgraphTest, IdempotentOnRandomGraphs) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const ReportGraph g = random_graph(rng);
    const bool transitive = trial % 2 == 1;
    const ReportGraph once =
        magspo::laterality_subgraph(g, magspo::default_laterality_seeds(), transitive);
    const ReportGraph twice =
        magspo::laterality_subgraph(once, magspo::default_laterality_seeds(), transitive);
    EXPECT_EQ(entity_multiset(once), entity_multiset(twice)) << "trial " << trial;
    EXPECT_EQ(relation_multiset(once), relation_multiset(twice)) << "trial " << trial;
  }
}

TEST(LateralityF1Test, SwappedSidesScoreOneQuarter) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const ReportGraph truth =
      magspo::toy_graph_extract(findings_only("the left lung shows effusion", v), v, rs);
  const ReportGraph pred =
      magspo::toy_graph_extract(findings_only("the right lung shows effusion", v), v, rs);
  // Within the laterality subgraphs the shared "effusion" entity is the only
  // match: entity F1 = 1/2, relation F1 = 0, mean = 1/4.
  EXPECT_DOUBLE_EQ(magspo::laterality_f1(pred, truth), 0.25);
}

TEST(LateralityF1Test, PerfectAndEmptyCases) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const ReportGraph g =
      magspo::toy_graph_extract(findings_only("the left lung shows effusion", v), v, rs);
  EXPECT_DOUBLE_EQ(magspo::laterality_f1(g, g), 1.0);
  const ReportGraph no_sides =
      magspo::toy_graph_extract(findings_only("the heart shows cardiomegaly", v), v, rs);
  EXPECT_DOUBLE_EQ(magspo::laterality_f1(no_sides, no_sides), 1.0);
  EXPECT_DOUBLE_EQ(magspo::laterality_f1(no_sides, g), 0.0);
}

TEST(CombinedRewardTest, TruthAgainstItselfIsThree) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const magspo::LatentState s = magspo::state_from_index(13);
  const Report truth = magspo::render_truth(s, v);
  const auto labels = magspo::toy_labeler(truth, v, rs);
  const auto graph = magspo::toy_graph_extract(truth, v, rs);
  const auto rb = magspo::combined_reward(truth, truth, labels, graph, v, rs);
  EXPECT_DOUBLE_EQ(rb.rouge_l, 1.0);
  EXPECT_DOUBLE_EQ(rb.label_acc, 1.0);
  EXPECT_DOUBLE_EQ(rb.graph_f1, 1.0);
  EXPECT_DOUBLE_EQ(rb.total, 3.0);
}

TEST(CombinedRewardTest, EmptyReportEarnsNegativeLabelsOnly) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const magspo::LatentState benign;  // all findings clear
  const Report truth = magspo::render_truth(benign, v);
  const auto labels = magspo::toy_labeler(truth, v, rs);
  const auto graph = magspo::toy_graph_extract(truth, v, rs);
  Report empty;
  empty.malformed = true;
  empty.findings.terminated = true;
  empty.impression.terminated = true;
  const auto rb = magspo::combined_reward(empty, truth, labels, graph, v, rs);
  EXPECT_DOUBLE_EQ(rb.rouge_l, 0.0);
  EXPECT_DOUBLE_EQ(rb.label_acc, 1.0);  // benign truth has all-negative labels
  EXPECT_DOUBLE_EQ(rb.graph_f1, 0.0);
  EXPECT_DOUBLE_EQ(rb.total, 1.0);
}

TEST(CombinedRewardTest, ComponentsStayInRange) {
  const Vocab v = magspo::default_vocab();
  const RuleSet rs = magspo::default_rules();
  const magspo::LatentState s = magspo::state_from_index(40);
  const Report truth = magspo::render_truth(s, v);
  const auto labels = magspo::toy_labeler(truth, v, rs);
  const auto graph = magspo::toy_graph_extract(truth, v, rs);
  const Report partial = findings_only("the left lung shows effusion", v);
  const auto rb = magspo::combined_reward(partial, truth, labels, graph, v, rs);
  EXPECT_GE(rb.rouge_l, 0.0);
  EXPECT_LE(rb.rouge_l, 1.0);
  EXPECT_GE(rb.label_acc, 0.0);
  EXPECT_LE(rb.label_acc, 1.0);
  EXPECT_GE(rb.graph_f1, 0.0);
  EXPECT_LE(rb.graph_f1, 1.0);
  EXPECT_NEAR(rb.total, rb.rouge_l + rb.label_acc + rb.graph_f1, 1e-15);
}

TEST(RuleSetTest, SaveLoadRoundTrip) {
  const RuleSet rs = magspo::default_rules();
  const std::string path = ::testing::TempDir() + "rules_roundtrip.txt";
  magspo::save_rules(rs, path);
  const RuleSet loaded = magspo::load_rules(path);
  EXPECT_EQ(loaded.negation_window, rs.negation_window);
  EXPECT_EQ(loaded.negation_tokens, rs.negation_tokens);
  EXPECT_EQ(loaded.relation_window, rs.relation_window);
  EXPECT_EQ(loaded.anatomy_phrases, rs.anatomy_phrases);
  EXPECT_EQ(loaded.observation_phrases, rs.observation_phrases);
  ASSERT_EQ(loaded.rules.size(), rs.rules.size());
  for (std::size_t i = 0; i < rs.rules.size(); ++i) {
    EXPECT_EQ(loaded.rules[i].label, rs.rules[i].label);
    EXPECT_EQ(loaded.rules[i].words, rs.rules[i].words);
    EXPECT_EQ(loaded.rules[i].window, rs.rules[i].window);
  }
  std::filesystem::remove(path);
}

TEST(RuleSetTest, LoadRejectsBadHeader) {
  const std::string path = ::testing::TempDir() + "rules_bad.txt";
  {
    std::ofstream out(path);
    out << "something else\n";
  }
  EXPECT_THROW(magspo::load_rules(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(GraphJsonTest, RoundTrip) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const ReportGraph g = random_graph(rng);
    const ReportGraph back = magspo::graph_from_json(magspo::graph_to_json(g));
    EXPECT_EQ(entity_multiset(back), entity_multiset(g));
    EXPECT_EQ(relation_multiset(back), relation_multiset(g));
  }
}

TEST(GraphValidateTest, DanglingRelationThrows) {
  ReportGraph g;
  g.entities = {{0, "heart", EntityCategory::Anatomy}};
  g.relations = {{0, 5, RelationLabel::LocatedAt}};
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
