#pragma once

// Deterministic evaluation and analysis: greedy decoding over a dataset
// split with per-case reward rows, a per-seed laterality table, the four-way
// ablation grid, and a small SVG renderer for training curves.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magspo/rewards.hpp"
#include "magspo/synthenv.hpp"
#include "magspo/trainer.hpp"
#include "magspo/workflow.hpp"

namespace magspo {

struct CaseEval {
  int case_id = 0;
  RewardBreakdown reward;
  double laterality_f1 = 0.0;
};

struct EvalReport {
  std::string variant;  // vanilla | single_agent_rl | multi_agent_no_rl | marl
  std::string split;
  std::uint64_t config_hash = 0;
  std::vector<CaseEval> cases;
  int case_count = 0;
  double mean_reward = 0.0;
  double mean_rouge_l = 0.0;
  double mean_label_acc = 0.0;
  double mean_graph_f1 = 0.0;
  double mean_laterality_f1 = 0.0;
  double std_reward = 0.0;  // population std of the per-case total
};

// Greedy decode through the workflow for every case in the split. Decoding
// has no randomness, so the report is a pure function of the parameters and
// the dataset.
inline EvalReport evaluate(const WorkflowPlan& plan, const AgentParams& agents,
                           const CaseDataset& ds, const std::string& split, const Vocab& vocab,
                           const RuleSet& rules, double temperature = 1.0,
                           const std::string& variant = "", std::uint64_t config_hash = 0) {
  const auto idx = split_indices(ds, split);
  if (idx.empty()) throw std::invalid_argument("dataset has no cases in split: " + split);
  EvalReport report;
  report.variant = variant;
  report.split = split;
  report.config_hash = config_hash;
  std::vector<double> totals, rouges, labels, graphs, lats;
  for (int i : idx) {
    const Case& c = ds.cases[static_cast<std::size_t>(i)];
    const JointRollout r = run_joint_greedy(plan, agents, c, vocab, temperature);
    CaseEval ce;
    ce.case_id = c.case_id;
    ce.reward = combined_reward(r.final_report, c.truth_report, c.truth_labels, c.truth_graph,
                                vocab, rules);
    ce.laterality_f1 =
        laterality_f1(toy_graph_extract(r.final_report, vocab, rules), c.truth_graph);
    totals.push_back(ce.reward.total);
    rouges.push_back(ce.reward.rouge_l);
    labels.push_back(ce.reward.label_acc);
    graphs.push_back(ce.reward.graph_f1);
    lats.push_back(ce.laterality_f1);
    report.cases.push_back(ce);
  }
  const double n = static_cast<double>(report.cases.size());
  report.case_count = static_cast<int>(report.cases.size());
  report.mean_reward = detail::pairwise_sum(totals) / n;
  report.mean_rouge_l = detail::pairwise_sum(rouges) / n;
  report.mean_label_acc = detail::pairwise_sum(labels) / n;
  report.mean_graph_f1 = detail::pairwise_sum(graphs) / n;
  report.mean_laterality_f1 = detail::pairwise_sum(lats) / n;
  for (double& t : totals) t = (t - report.mean_reward) * (t - report.mean_reward);
  report.std_reward = std::sqrt(detail::pairwise_sum(totals) / n);
  return report;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : r.cases) {
    cases.push_back({{"case_id", c.case_id},
                     {"rouge_l", c.reward.rouge_l},
                     {"label_acc", c.reward.label_acc},
                     {"graph_f1", c.reward.graph_f1},
                     {"total", c.reward.total},
                     {"laterality_f1", c.laterality_f1}});
  }
  return {{"schema", "eval-v1"},
          {"variant", r.variant},
          {"split", r.split},
          {"config_hash", r.config_hash},
          {"case_count", r.case_count},
          {"cases", cases},
          {"mean_reward", r.mean_reward},
          {"mean_rouge_l", r.mean_rouge_l},
          {"mean_label_acc", r.mean_label_acc},
          {"mean_graph_f1", r.mean_graph_f1},
          {"mean_laterality_f1", r.mean_laterality_f1},
          {"std_reward", r.std_reward}};
}

inline void save_eval_report(const EvalReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open eval output for writing: " + path);
  out << eval_report_to_json(r).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Laterality table: one column per seed text, micro-aggregated over the
// whole corpus (subgraph entity and relation multisets are pooled across
// cases before the F1), plus a combined column using the full seed set. A
// seed that never occurs in either corpus scores 1.0 with occurrence 0 by
// the empty-versus-empty convention.

struct LateralityColumn {
  std::string seed;
  double f1 = 0.0;
  int occurrences = 0;  // cases whose truth subgraph for this seed is non-empty
};

struct LateralityTable {
  std::vector<LateralityColumn> columns;
  double combined = 0.0;  // full seed set, micro-aggregated the same way
  int cases = 0;
};

namespace detail {

struct SubgraphPool {
  std::map<EntityKey, std::size_t> pred_entities, truth_entities;
  std::map<RelationKey, std::size_t> pred_relations, truth_relations;
  std::size_t pred_entity_total = 0, truth_entity_total = 0;
  std::size_t pred_relation_total = 0, truth_relation_total = 0;
  int occurrences = 0;

  void add(const ReportGraph& pred_sub, const ReportGraph& truth_sub) {
    for (const auto& [k, n] : entity_counts(pred_sub)) pred_entities[k] += n;
    for (const auto& [k, n] : entity_counts(truth_sub)) truth_entities[k] += n;
    for (const auto& [k, n] : relation_counts(pred_sub)) pred_relations[k] += n;
    for (const auto& [k, n] : relation_counts(truth_sub)) truth_relations[k] += n;
    pred_entity_total += pred_sub.entities.size();
    truth_entity_total += truth_sub.entities.size();
    pred_relation_total += pred_sub.relations.size();
    truth_relation_total += truth_sub.relations.size();
    if (!truth_sub.entities.empty() || !truth_sub.relations.empty()) occurrences += 1;
  }

  double f1() const {
    const double entity =
        multiset_f1(pred_entity_total, truth_entity_total,
                    multiset_overlap(pred_entities, truth_entities));
    const double relation =
        multiset_f1(pred_relation_total, truth_relation_total,
                    multiset_overlap(pred_relations, truth_relations));
    return 0.5 * (entity + relation);
  }
};

}  // namespace detail

inline LateralityTable laterality_table(const WorkflowPlan& plan, const AgentParams& agents,
                                        const CaseDataset& ds, const std::string& split,
                                        const Vocab& vocab, const RuleSet& rules,
                                        double temperature = 1.0) {
  const auto idx = split_indices(ds, split);
  if (idx.empty()) throw std::invalid_argument("dataset has no cases in split: " + split);
  const auto& seeds = default_laterality_seeds();
  std::vector<detail::SubgraphPool> pools(seeds.size());
  detail::SubgraphPool combined_pool;
  LateralityTable table;
  for (int i : idx) {
    const Case& c = ds.cases[static_cast<std::size_t>(i)];
    const JointRollout r = run_joint_greedy(plan, agents, c, vocab, temperature);
    const ReportGraph pred = toy_graph_extract(r.final_report, vocab, rules);
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const std::vector<std::string> one = {seeds[s]};
      pools[s].add(laterality_subgraph(pred, one), laterality_subgraph(c.truth_graph, one));
    }
    combined_pool.add(laterality_subgraph(pred), laterality_subgraph(c.truth_graph));
    table.cases += 1;
  }
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    table.columns.push_back({seeds[s], pools[s].f1(), pools[s].occurrences});
  }
  table.combined = combined_pool.f1();
  return table;
}

inline nlohmann::json laterality_table_to_json(const LateralityTable& t) {
  nlohmann::json columns = nlohmann::json::array();
  for (const auto& c : t.columns) {
    columns.push_back({{"seed", c.seed}, {"f1", c.f1}, {"occurrences", c.occurrences}});
  }
  return {{"schema", "laterality-v1"},
          {"columns", columns},
          {"combined", t.combined},
          {"cases", t.cases}};
}

inline void save_laterality_table(const LateralityTable& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open laterality output for writing: " + path);
  out << laterality_table_to_json(t).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Ablation grid

// Runs training to completion without writing checkpoints or metrics.
inline void train_to_completion(Trainer& trainer) {
  while (trainer.step() < trainer.config().total_steps) trainer.train_step();
}

// Four variants on one split: untrained and trained, single-agent and
// multi-agent. Untrained variants reuse the trainer's step-0 parameters, so
// every variant starts from the same initialization scheme; the two trained
// variants consume the same config apart from the workflow plan.
inline std::vector<EvalReport> ablation_run(const TrainConfig& cfg, const CaseDataset& ds,
                                            const Vocab& vocab, const RuleSet& rules,
                                            const std::string& split = "test") {
  TrainConfig single_cfg = cfg;
  single_cfg.plan = "single";
  single_cfg.validate();
  TrainConfig multi_cfg = cfg;
  multi_cfg.plan = "reference";
  multi_cfg.validate();

  const WorkflowPlan single = single_agent_plan();
  const WorkflowPlan reference = reference_plan();
  std::vector<EvalReport> reports;

  Trainer single_trainer(single_cfg, ds, vocab, rules);
  reports.push_back(evaluate(single, single_trainer.agents(), ds, split, vocab, rules,
                             cfg.temperature, "vanilla", config_hash(single_cfg)));
  train_to_completion(single_trainer);
  reports.push_back(evaluate(single, single_trainer.agents(), ds, split, vocab, rules,
                             cfg.temperature, "single_agent_rl", config_hash(single_cfg)));

  Trainer multi_trainer(multi_cfg, ds, vocab, rules);
  reports.push_back(evaluate(reference, multi_trainer.agents(), ds, split, vocab, rules,
                             cfg.temperature, "multi_agent_no_rl", config_hash(multi_cfg)));
  train_to_completion(multi_trainer);
  reports.push_back(evaluate(reference, multi_trainer.agents(), ds, split, vocab, rules,
                             cfg.temperature, "marl", config_hash(multi_cfg)));

  return reports;
}

inline std::string ablation_csv(const std::vector<EvalReport>& reports) {
  std::string out =
      "variant,mean_rouge_l,mean_label_acc,mean_graph_f1,mean_reward,mean_laterality_f1\n";
  for (const auto& r : reports) {
    out += r.variant + ',' + detail::format_double(r.mean_rouge_l) + ',' +
           detail::format_double(r.mean_label_acc) + ',' + detail::format_double(r.mean_graph_f1) +
           ',' + detail::format_double(r.mean_reward) + ',' +
           detail::format_double(r.mean_laterality_f1) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training-curve rendering

namespace detail {

inline std::string svg_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

// Renders step versus mean reward from a metrics CSV as a standalone SVG.
inline std::string metrics_plot_svg(const std::string& metrics_csv_path) {
  std::ifstream in(metrics_csv_path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + metrics_csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics file: " + metrics_csv_path);
  std::vector<std::string> cols;
  {
    std::istringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) cols.push_back(c);
  }
  int step_col = -1, reward_col = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] == "step") step_col = static_cast<int>(i);
    if (cols[i] == "mean_reward") reward_col = static_cast<int>(i);
  }
  if (step_col < 0 || reward_col < 0)
    throw std::runtime_error("metrics file lacks step/mean_reward columns: " + metrics_csv_path);

  std::vector<double> steps, rewards;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) <= std::max(step_col, reward_col))
      throw std::runtime_error("short metrics row: " + line);
    steps.push_back(std::stod(cells[static_cast<std::size_t>(step_col)]));
    rewards.push_back(std::stod(cells[static_cast<std::size_t>(reward_col)]));
  }
  if (steps.empty()) throw std::runtime_error("metrics file has no data rows: " + metrics_csv_path);

  double x0 = steps.front(), x1 = steps.front(), y0 = rewards.front(), y1 = rewards.front();
  for (double s : steps) {
    x0 = std::min(x0, s);
    x1 = std::max(x1, s);
  }
  for (double r : rewards) {
    y0 = std::min(y0, r);
    y1 = std::max(y1, r);
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;

  const double width = 640.0, height = 400.0, ml = 60.0, mr = 20.0, mt = 30.0, mb = 40.0;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return mt + ph - (v - y0) / (y1 - y0) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
  svg << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg << "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">mean reward by training step</text>\n";
  svg << "<line x1=\"" << detail::svg_coord(ml) << "\" y1=\"" << detail::svg_coord(mt)
      << "\" x2=\"" << detail::svg_coord(ml) << "\" y2=\"" << detail::svg_coord(mt + ph)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << detail::svg_coord(ml) << "\" y1=\"" << detail::svg_coord(mt + ph)
      << "\" x2=\"" << detail::svg_coord(ml + pw) << "\" y2=\"" << detail::svg_coord(mt + ph)
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << detail::svg_coord(ml - 8) << "\" y=\"" << detail::svg_coord(mt + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::svg_coord(y1) << "</text>\n";
  svg << "<text x=\"" << detail::svg_coord(ml - 8) << "\" y=\"" << detail::svg_coord(mt + ph + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::svg_coord(y0) << "</text>\n";
  svg << "<text x=\"" << detail::svg_coord(ml) << "\" y=\"" << detail::svg_coord(mt + ph + 16)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::svg_coord(x0) << "</text>\n";
  svg << "<text x=\"" << detail::svg_coord(ml + pw) << "\" y=\""
      << detail::svg_coord(mt + ph + 16)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::svg_coord(x1) << "</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) svg << ' ';
    svg << detail::svg_coord(sx(steps[i])) << ',' << detail::svg_coord(sy(rewards[i]));
  }
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

inline void write_metrics_plot(const std::string& metrics_csv_path, const std::string& out_path) {
  const std::string svg = metrics_plot_svg(metrics_csv_path);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open plot output for writing: " + out_path);
  out << svg;
}

}  // namespace magspo
