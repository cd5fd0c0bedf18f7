#pragma once

// Clipped sequence-level policy optimization over joint rollouts. Every
// rollout in a group shares one group-relative advantage computed from its
// final reward; each agent slot contributes a length-normalized sequence
// importance ratio against the parameters that sampled it. Terms where the
// clipped branch wins drop out of the gradient entirely.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "magspo/policy.hpp"
#include "magspo/workflow.hpp"

namespace magspo {

struct ClipConfig {
  double eps_low = 0.0003;
  double eps_high = 0.0004;
  double std_floor = 1e-8;
};

namespace detail {

// Pairwise (cascade) summation: the reduction tree is fixed by the element
// order alone, so totals are reproducible and rounding error stays O(log n).
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace detail

// Group-relative normalization with the population standard deviation. A
// group whose rewards are (nearly) identical carries no signal and gets
// all-zero advantages instead of amplified noise.
inline std::vector<double> compute_advantages(std::span<const double> rewards,
                                              double std_floor = 1e-8) {
  if (rewards.size() < 2)
    throw std::invalid_argument("advantage group needs at least 2 rollouts, got " +
                                std::to_string(rewards.size()));
  const double n = static_cast<double>(rewards.size());
  const double mean = detail::pairwise_sum(rewards) / n;
  std::vector<double> sq(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    sq[i] = (rewards[i] - mean) * (rewards[i] - mean);
  const double var = detail::pairwise_sum(sq) / n;
  const double sd = std::sqrt(var);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < std_floor) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

inline std::vector<std::vector<double>> advantages_for_groups(
    const std::vector<std::vector<JointRollout>>& groups, double std_floor = 1e-8) {
  std::vector<std::vector<double>> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    std::vector<double> rewards;
    rewards.reserve(group.size());
    for (const auto& r : group) rewards.push_back(r.reward.total);
    out.push_back(compute_advantages(rewards, std_floor));
  }
  return out;
}

// s = (pi_new / pi_old)^(1/len) computed in log space. Length normalization
// keeps the ratio scale comparable across sequences of different lengths.
inline double sequence_importance_ratio(double new_logprob, double old_logprob, int length) {
  if (length <= 0) throw std::invalid_argument("sequence length must be positive");
  const double s = std::exp((new_logprob - old_logprob) / static_cast<double>(length));
  if (!std::isfinite(s))
    throw std::runtime_error("non-finite importance ratio: policy diverged");
  return s;
}

// One surrogate term: min(s*A, clamp(s)*A). The boolean reports whether the
// clamped branch strictly won; ties count as unclipped so on-policy ratios
// of exactly 1 never register as clipping.
inline std::pair<double, bool> clipped_term(double ratio, double advantage,
                                            const ClipConfig& clip) {
  const double clamped = std::min(std::max(ratio, 1.0 - clip.eps_low), 1.0 + clip.eps_high);
  const double direct = ratio * advantage;
  const double clipped_val = clamped * advantage;
  const bool use_clipped = clipped_val < direct;
  return {use_clipped ? clipped_val : direct, use_clipped};
}

struct MagspoTerm {
  int case_idx = 0;
  int rollout_idx = 0;
  int slot_idx = 0;
  double ratio = 0.0;
  double advantage = 0.0;
  bool clipped = false;  // the clamped branch strictly won the min
};

struct SurrogateReport {
  double objective = 0.0;
  std::size_t term_count = 0;
  std::size_t clipped_count = 0;
  double clip_fraction = 0.0;
  std::map<std::string, std::vector<double>> gradients;  // per agent id, when requested
  std::vector<MagspoTerm> terms;
};

// Objective and (optionally) its exact gradient over a batch of rollout
// groups. groups[b][i] is rollout i of case b; advantages has the same
// shape. Terms are averaged with weight 1 / (cases * slots * group size).
inline SurrogateReport magspo_surrogate(const WorkflowPlan& plan, const AgentParams& params,
                                        const std::vector<std::vector<JointRollout>>& groups,
                                        const std::vector<std::vector<double>>& advantages,
                                        const ClipConfig& clip, double temperature,
                                        bool with_gradient) {
  plan.validate();
  if (groups.empty()) throw std::invalid_argument("rollout batch is empty");
  if (advantages.size() != groups.size())
    throw std::invalid_argument("advantage shape does not match rollout groups");

  SurrogateReport report;
  if (with_gradient) {
    for (const auto& id : plan.agent_ids()) {
      report.gradients.emplace(id, std::vector<double>(params.at(id).dim(), 0.0));
    }
  }

  const double B = static_cast<double>(groups.size());
  const double K = static_cast<double>(plan.size());
  std::vector<double> weighted_terms;
  for (std::size_t b = 0; b < groups.size(); ++b) {
    const auto& group = groups[b];
    const auto& adv = advantages[b];
    if (group.empty()) throw std::invalid_argument("rollout group is empty");
    if (adv.size() != group.size())
      throw std::invalid_argument("advantage shape does not match rollout groups");
    const double G = static_cast<double>(group.size());
    const double weight = 1.0 / (B * K * G);
    for (std::size_t i = 0; i < group.size(); ++i) {
      const JointRollout& rollout = group[i];
      if (static_cast<int>(rollout.slots.size()) != plan.size())
        throw std::invalid_argument("rollout slot count does not match the plan");
      const double a = adv[i];
      for (int k = 0; k < plan.size(); ++k) {
        const SlotResult& slot = rollout.slots[static_cast<std::size_t>(k)];
        const PolicyParameters& theta = params.at(plan.slots[static_cast<std::size_t>(k)].agent_id);
        const int len = slot.seq.length();
        const double new_lp = sequence_logprob(theta, slot.context, slot.seq, temperature);
        const double s = sequence_importance_ratio(new_lp, slot.logprob_sum, len);
        const auto [value, use_clipped] = clipped_term(s, a, clip);
        weighted_terms.push_back(weight * value);
        report.term_count += 1;
        if (use_clipped) report.clipped_count += 1;
        report.terms.push_back({static_cast<int>(b), static_cast<int>(i), k, s, a, use_clipped});
        if (with_gradient && !use_clipped && a != 0.0) {
          const double scale = weight * a * s / static_cast<double>(len);
          auto& grad = report.gradients.at(plan.slots[static_cast<std::size_t>(k)].agent_id);
          add_scaled_grad_sequence_logprob(theta, slot.context, slot.seq, temperature, scale,
                                           grad);
        }
      }
    }
  }
  report.objective = detail::pairwise_sum(weighted_terms);
  report.clip_fraction = report.term_count == 0
                             ? 0.0
                             : static_cast<double>(report.clipped_count) /
                                   static_cast<double>(report.term_count);
  return report;
}

inline double magspo_objective(const WorkflowPlan& plan, const AgentParams& params,
                               const std::vector<std::vector<JointRollout>>& groups,
                               const std::vector<std::vector<double>>& advantages,
                               const ClipConfig& clip, double temperature) {
  return magspo_surrogate(plan, params, groups, advantages, clip, temperature, false).objective;
}

inline SurrogateReport magspo_gradient(const WorkflowPlan& plan, const AgentParams& params,
                                       const std::vector<std::vector<JointRollout>>& groups,
                                       const std::vector<std::vector<double>>& advantages,
                                       const ClipConfig& clip, double temperature) {
  return magspo_surrogate(plan, params, groups, advantages, clip, temperature, true);
}

}  // namespace magspo
