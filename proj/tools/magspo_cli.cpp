// Command-line front end: dataset generation, training, evaluation, the
// laterality table, the ablation grid, and training-curve plots. Every
// subcommand reads and writes plain files so runs are scriptable and
// auditable; errors land on stderr as one JSON line with exit code 1.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "magspo/evalanalysis.hpp"
#include "magspo/magspo.hpp"
#include "magspo/rewards.hpp"
#include "magspo/synthenv.hpp"
#include "magspo/textcore.hpp"
#include "magspo/trainer.hpp"
#include "magspo/workflow.hpp"

namespace {

namespace fs = std::filesystem;

struct DataDir {
  magspo::Vocab vocab;
  magspo::RuleSet rules;
  magspo::CaseDataset dataset;
};

DataDir load_data_dir(const std::string& dir) {
  const fs::path root(dir);
  magspo::Vocab vocab = magspo::load_vocab((root / "vocab.txt").string(), magspo::kMaxReportLen);
  magspo::RuleSet rules = magspo::load_rules((root / "rules.txt").string());
  magspo::CaseDataset dataset = magspo::load_dataset((root / "dataset.jsonl").string(), vocab);
  return {std::move(vocab), std::move(rules), std::move(dataset)};
}

int run_gen_data(std::uint64_t seed, int train, int val, int test, const std::string& out,
                 bool regen) {
  const fs::path root(out);
  const fs::path dataset_path = root / "dataset.jsonl";
  if (fs::exists(dataset_path) && !regen) {
    throw std::runtime_error("dataset already exists (pass --regen to overwrite): " +
                             dataset_path.string());
  }
  fs::create_directories(root);
  const magspo::Vocab vocab = magspo::default_vocab();
  const magspo::RuleSet rules = magspo::default_rules();
  const magspo::CaseDataset ds = magspo::build_dataset(seed, train, val, test, vocab, rules);
  magspo::save_vocab(vocab, (root / "vocab.txt").string());
  magspo::save_rules(rules, (root / "rules.txt").string());
  magspo::save_dataset(ds, dataset_path.string());
  nlohmann::json summary = {{"dataset", dataset_path.string()},
                            {"cases", ds.total()},
                            {"train", ds.train_cases},
                            {"val", ds.val_cases},
                            {"test", ds.test_cases}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& data, const std::string& out,
              const std::string& plan_override, bool resume) {
  magspo::TrainConfig cfg = magspo::load_train_config(config_path);
  if (!plan_override.empty()) {
    cfg.plan = plan_override;
    cfg.validate();
  }
  DataDir dd = load_data_dir(data);
  magspo::Trainer trainer(cfg, dd.dataset, dd.vocab, dd.rules);
  const auto history = magspo::run_training(trainer, out, resume);
  nlohmann::json summary = {{"steps_run", history.size()},
                            {"final_step", trainer.step()},
                            {"out", out}};
  if (!history.empty()) {
    summary["final_mean_reward"] = history.back().mean_reward;
    summary["final_clip_fraction"] = history.back().clip_fraction;
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& out) {
  DataDir dd = load_data_dir(data);
  const magspo::FeatureMap fmap(magspo::default_feature_config(dd.vocab));
  const auto ckpt = magspo::load_checkpoint_dir(checkpoint, fmap);
  const magspo::WorkflowPlan plan = magspo::plan_by_name(ckpt.plan);
  const magspo::EvalReport report =
      magspo::evaluate(plan, ckpt.agents, dd.dataset, split, dd.vocab, dd.rules, 1.0, ckpt.plan,
                       ckpt.config_hash);
  magspo::save_eval_report(report, out);
  nlohmann::json summary = {{"split", split},
                            {"cases", report.case_count},
                            {"mean_reward", report.mean_reward},
                            {"mean_laterality_f1", report.mean_laterality_f1},
                            {"out", out}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_laterality(const std::string& checkpoint, const std::string& data,
                   const std::string& split, const std::string& out) {
  DataDir dd = load_data_dir(data);
  const magspo::FeatureMap fmap(magspo::default_feature_config(dd.vocab));
  const auto ckpt = magspo::load_checkpoint_dir(checkpoint, fmap);
  const magspo::WorkflowPlan plan = magspo::plan_by_name(ckpt.plan);
  const magspo::LateralityTable table =
      magspo::laterality_table(plan, ckpt.agents, dd.dataset, split, dd.vocab, dd.rules);
  magspo::save_laterality_table(table, out);
  nlohmann::json summary = {{"split", split},
                            {"cases", table.cases},
                            {"combined", table.combined},
                            {"out", out}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_ablate(const std::string& config_path, const std::string& data, const std::string& out) {
  const magspo::TrainConfig cfg = magspo::load_train_config(config_path);
  DataDir dd = load_data_dir(data);
  const auto reports = magspo::ablation_run(cfg, dd.dataset, dd.vocab, dd.rules);
  const std::string csv = magspo::ablation_csv(reports);
  std::ofstream of(out);
  if (!of) throw std::runtime_error("cannot open ablation output for writing: " + out);
  of << csv;
  nlohmann::json summary = {{"variants", reports.size()}, {"out", out}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int run_plot(const std::string& metrics, const std::string& out) {
  magspo::write_metrics_plot(metrics, out);
  nlohmann::json summary = {{"metrics", metrics}, {"out", out}};
  std::cout << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent report-writing policies on a synthetic environment"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int train = 1600, val = 200, test = 200;
  std::string out_dir = "data";
  bool regen = false;
  auto* gen = app.add_subcommand("gen-data", "Generate a dataset plus vocab and rule fixtures");
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--train", train, "Train split size");
  gen->add_option("--val", val, "Validation split size");
  gen->add_option("--test", test, "Test split size");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_flag("--regen", regen, "Overwrite an existing dataset");

  std::string config_path, data_dir, run_dir, plan_override;
  bool resume = false;
  auto* tr = app.add_subcommand("train", "Train agents and write metrics plus checkpoints");
  tr->add_option("--config", config_path, "Training config file")->required();
  tr->add_option("--data", data_dir, "Data directory from gen-data")->required();
  tr->add_option("--out", run_dir, "Run output directory")->required();
  tr->add_option("--plan", plan_override, "Override the configured workflow plan");
  tr->add_flag("--resume", resume, "Resume from the newest checkpoint in --out");

  std::string checkpoint, split = "test", out_file;
  auto* ev = app.add_subcommand("eval", "Greedy-decode a split and write per-case rewards");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint directory (step_<n>)")->required();
  ev->add_option("--data", data_dir, "Data directory from gen-data")->required();
  ev->add_option("--split", split, "Dataset split to evaluate");
  ev->add_option("--out", out_file, "Output JSON path")->required();

  auto* lat = app.add_subcommand("laterality", "Write the per-seed laterality table");
  lat->add_option("--checkpoint", checkpoint, "Checkpoint directory (step_<n>)")->required();
  lat->add_option("--data", data_dir, "Data directory from gen-data")->required();
  lat->add_option("--split", split, "Dataset split to evaluate");
  lat->add_option("--out", out_file, "Output JSON path")->required();

  auto* ab = app.add_subcommand("ablate", "Run the four-variant comparison and write a CSV");
  ab->add_option("--config", config_path, "Training config file")->required();
  ab->add_option("--data", data_dir, "Data directory from gen-data")->required();
  ab->add_option("--out", out_file, "Output CSV path")->required();

  std::string metrics_path;
  auto* pl = app.add_subcommand("plot", "Render a metrics CSV as an SVG training curve");
  pl->add_option("--metrics", metrics_path, "metrics.csv from a training run")->required();
  pl->add_option("--out", out_file, "Output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_data(seed, train, val, test, out_dir, regen);
    if (tr->parsed()) return run_train(config_path, data_dir, run_dir, plan_override, resume);
    if (ev->parsed()) return run_eval(checkpoint, data_dir, split, out_file);
    if (lat->parsed()) return run_laterality(checkpoint, data_dir, split, out_file);
    if (ab->parsed()) return run_ablate(config_path, data_dir, out_file);
    if (pl->parsed()) return run_plot(metrics_path, out_file);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
