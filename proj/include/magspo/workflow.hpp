#pragma once

// Multi-agent workflow execution. A plan is an ordered list of agent slots;
// each slot prompts one policy with the case query and the parsed reports of
// earlier slots, and the last slot's output is the final report. Slots that
// share an agent_id share parameters. Rollout randomness is derived
// functionally from (master seed, case, rollout index, slot index), so a
// whole training run is reproducible from one integer.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magspo/policy.hpp"
#include "magspo/rewards.hpp"
#include "magspo/rng.hpp"
#include "magspo/synthenv.hpp"
#include "magspo/textcore.hpp"

namespace magspo {

struct AgentSlot {
  std::string role;       // names the slot and its prompt tag "<role>"
  std::string agent_id;   // slots with equal agent_id share one parameter set
  bool takes_query = true;
  std::vector<int> input_slots;  // earlier slots whose reports join the prompt
};

struct WorkflowPlan {
  std::string name;
  std::vector<AgentSlot> slots;

  int size() const { return static_cast<int>(slots.size()); }

  void validate() const {
    if (slots.empty()) throw std::invalid_argument("workflow plan has no slots");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& s = slots[i];
      if (s.role.empty() || s.agent_id.empty())
        throw std::invalid_argument("workflow slot " + std::to_string(i) +
                                    " is missing a role or agent id");
      for (int j : s.input_slots) {
        if (j < 0 || j >= static_cast<int>(i))
          throw std::invalid_argument("workflow slot " + std::to_string(i) +
                                      " reads from slot " + std::to_string(j) +
                                      " which does not precede it");
      }
    }
  }

  // Distinct agent ids in first-appearance order.
  std::vector<std::string> agent_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : slots) {
      bool seen = false;
      for (const auto& id : ids) {
        if (id == s.agent_id) {
          seen = true;
          break;
        }
      }
      if (!seen) ids.push_back(s.agent_id);
    }
    return ids;
  }
};

// Three region agents write from the query alone, then a coordinator agent
// reads their reports and writes the final one.
inline WorkflowPlan reference_plan() {
  WorkflowPlan plan;
  plan.name = "reference";
  plan.slots = {{"left", "left", true, {}},
                {"central", "central", true, {}},
                {"right", "right", true, {}},
                {"global", "global", true, {0, 1, 2}}};
  plan.validate();
  return plan;
}

inline WorkflowPlan single_agent_plan() {
  WorkflowPlan plan;
  plan.name = "single";
  plan.slots = {{"global", "global", true, {}}};
  plan.validate();
  return plan;
}

inline WorkflowPlan plan_by_name(const std::string& name) {
  if (name == "reference") return reference_plan();
  if (name == "single") return single_agent_plan();
  throw std::invalid_argument("unknown workflow plan: " + name);
}

// Fine position buckets early (stride 2) so the fixed report skeleton is
// representable by position alone, and the query crosses can distinguish the
// left-region sentence from the right-region one.
inline FeatureMapConfig default_feature_config(const Vocab& vocab) {
  FeatureMapConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.window = 4;
  cfg.pos_buckets = 16;
  cfg.pos_stride = 2;
  cfg.query_dim = kQueryDim;
  cfg.query_pos_crosses = true;
  return cfg;
}

using AgentParams = std::map<std::string, PolicyParameters>;
using AgentSnapshots = std::map<std::string, PolicySnapshot>;

inline AgentParams make_agent_params(const WorkflowPlan& plan, const FeatureMap& fmap) {
  AgentParams agents;
  for (const auto& id : plan.agent_ids()) agents.emplace(id, PolicyParameters(fmap));
  return agents;
}

inline AgentSnapshots snapshot_agents(const AgentParams& agents) {
  AgentSnapshots snaps;
  for (const auto& [id, params] : agents) snaps.emplace(id, PolicySnapshot(params));
  return snaps;
}

// ---------------------------------------------------------------------------
// Prompt assembly

namespace detail {

inline int role_tag_id(const std::string& role, const Vocab& vocab) {
  return vocab.id_of("<" + role + ">");
}

inline void append_report_tokens(std::vector<int>& prompt, const Report& report,
                                 const Vocab& vocab) {
  const int hash = vocab.id_of("###");
  prompt.push_back(hash);
  prompt.push_back(vocab.id_of("Findings"));
  auto f = report.findings.content(vocab);
  prompt.insert(prompt.end(), f.begin(), f.end());
  prompt.push_back(hash);
  prompt.push_back(vocab.id_of("Impression"));
  auto i = report.impression.content(vocab);
  prompt.insert(prompt.end(), i.begin(), i.end());
}

}  // namespace detail

// The prompt for slot `slot_idx`: own role tag, the quantized query tokens,
// then each input slot's role tag followed by its parsed report. Dense query
// features ride along separately for the feature map.
inline AgentContext build_context(const WorkflowPlan& plan, int slot_idx, const Case& c,
                                   const std::vector<Report>& prior_reports,
                                   const Vocab& vocab) {
  const AgentSlot& slot = plan.slots.at(static_cast<std::size_t>(slot_idx));
  AgentContext ctx;
  ctx.eos_id = vocab.eos_id();
  ctx.max_len = vocab.max_len();
  ctx.prompt_ids.push_back(detail::role_tag_id(slot.role, vocab));
  if (slot.takes_query) {
    const auto q = query_tokens(c.query_features, vocab);
    ctx.prompt_ids.insert(ctx.prompt_ids.end(), q.begin(), q.end());
    ctx.query_features = c.query_features;
  }
  for (int j : slot.input_slots) {
    if (j < 0 || j >= slot_idx || static_cast<std::size_t>(j) >= prior_reports.size()) {
      throw std::invalid_argument("missing predecessor report for slot '" + slot.role +
                                  "': input slot " + std::to_string(j) + " has not run");
    }
    ctx.prompt_ids.push_back(detail::role_tag_id(plan.slots[static_cast<std::size_t>(j)].role, vocab));
    detail::append_report_tokens(ctx.prompt_ids, prior_reports[static_cast<std::size_t>(j)],
                                 vocab);
  }
  return ctx;
}

// Parse an emitted token sequence into a report. Output that lacks the
// section headers becomes an empty report flagged malformed; it still feeds
// downstream prompts and earns whatever reward it earns.
inline Report parse_output(const TokenSequence& seq, const Vocab& vocab) {
  try {
    return split_report(detokenize(seq, vocab), vocab);
  } catch (const std::runtime_error&) {
    Report r;
    r.malformed = true;
    r.findings.terminated = true;
    r.impression.terminated = true;
    return r;
  }
}

// ---------------------------------------------------------------------------
// Joint rollouts

struct SlotResult {
  TokenSequence seq;
  std::vector<double> token_logprobs;  // at the sampling temperature
  double logprob_sum = 0.0;
  Report parsed;
  AgentContext context;
};

struct JointRollout {
  int case_id = 0;
  std::uint64_t seed = 0;  // per-rollout seed component, before slot mixing
  std::vector<SlotResult> slots;
  Report final_report;
  RewardBreakdown reward;
};

inline std::uint64_t rollout_seed(std::uint64_t master_seed, int case_id, int rollout_idx) {
  return mix_seed(mix_seed(master_seed, static_cast<std::uint64_t>(case_id)),
                  static_cast<std::uint64_t>(rollout_idx));
}

inline JointRollout run_joint_rollout(const WorkflowPlan& plan, const AgentSnapshots& agents,
                                      const Case& c, const Vocab& vocab, double temperature,
                                      std::uint64_t master_seed, int rollout_idx) {
  JointRollout out;
  out.case_id = c.case_id;
  out.seed = rollout_seed(master_seed, c.case_id, rollout_idx);
  std::vector<Report> reports;
  reports.reserve(plan.slots.size());
  for (int k = 0; k < plan.size(); ++k) {
    const auto& slot = plan.slots[static_cast<std::size_t>(k)];
    auto it = agents.find(slot.agent_id);
    if (it == agents.end())
      throw std::invalid_argument("no parameters for agent id: " + slot.agent_id);
    SlotResult sr;
    sr.context = build_context(plan, k, c, reports, vocab);
    SampleResult sample = sample_sequence(it->second, sr.context, temperature,
                                          mix_seed(out.seed, static_cast<std::uint64_t>(k)));
    sr.seq = std::move(sample.seq);
    sr.token_logprobs = std::move(sample.token_logprobs);
    sr.logprob_sum = sample.logprob_sum;
    sr.parsed = parse_output(sr.seq, vocab);
    reports.push_back(sr.parsed);
    out.slots.push_back(std::move(sr));
  }
  out.final_report = reports.back();
  return out;
}

// Deterministic argmax decode through the whole workflow.
inline JointRollout run_joint_greedy(const WorkflowPlan& plan, const AgentParams& agents,
                                     const Case& c, const Vocab& vocab, double temperature) {
  JointRollout out;
  out.case_id = c.case_id;
  std::vector<Report> reports;
  reports.reserve(plan.slots.size());
  for (int k = 0; k < plan.size(); ++k) {
    const auto& slot = plan.slots[static_cast<std::size_t>(k)];
    auto it = agents.find(slot.agent_id);
    if (it == agents.end())
      throw std::invalid_argument("no parameters for agent id: " + slot.agent_id);
    SlotResult sr;
    sr.context = build_context(plan, k, c, reports, vocab);
    SampleResult sample = greedy_sequence(it->second, sr.context, temperature);
    sr.seq = std::move(sample.seq);
    sr.token_logprobs = std::move(sample.token_logprobs);
    sr.logprob_sum = sample.logprob_sum;
    sr.parsed = parse_output(sr.seq, vocab);
    reports.push_back(sr.parsed);
    out.slots.push_back(std::move(sr));
  }
  out.final_report = reports.back();
  return out;
}

// ---------------------------------------------------------------------------
// Rollout audit records

inline nlohmann::json rollout_to_json(const WorkflowPlan& plan, const JointRollout& r) {
  nlohmann::json slots = nlohmann::json::array();
  for (std::size_t k = 0; k < r.slots.size(); ++k) {
    slots.push_back({{"role", plan.slots.at(k).role},
                     {"tokens", r.slots[k].seq.ids},
                     {"logprobs", r.slots[k].token_logprobs}});
  }
  return {{"schema", "rollout-v1"},
          {"case_id", r.case_id},
          {"seed", r.seed},
          {"slots", slots},
          {"reward", r.reward.total}};
}

inline JointRollout rollout_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "rollout-v1")
    throw std::runtime_error("unsupported rollout schema");
  JointRollout r;
  r.case_id = j.at("case_id").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("slots")) {
    SlotResult sr;
    sr.seq.ids = s.at("tokens").get<std::vector<int>>();
    sr.seq.terminated = true;
    sr.token_logprobs = s.at("logprobs").get<std::vector<double>>();
    for (double lp : sr.token_logprobs) sr.logprob_sum += lp;
    r.slots.push_back(std::move(sr));
  }
  r.reward.total = j.at("reward").get<double>();
  return r;
}

}  // namespace magspo
