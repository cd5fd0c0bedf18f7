#pragma once

// Training loop: snapshot the agents, roll out groups of joint trajectories
// for a batch of cases, score final reports, normalize rewards within each
// group, then take several clipped minibatch updates against the snapshot.
// All randomness is derived from (master seed, step), so runs are bit
// reproducible and a run resumed from a checkpoint matches an uninterrupted
// one exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magspo/magspo.hpp"
#include "magspo/policy.hpp"
#include "magspo/rewards.hpp"
#include "magspo/rng.hpp"
#include "magspo/synthenv.hpp"
#include "magspo/textcore.hpp"
#include "magspo/workflow.hpp"

namespace magspo {

struct TrainConfig {
  int total_steps = 300;
  int cases_per_batch = 16;
  int group_size = 16;
  int update_minibatch = 4;
  double learning_rate = 0.2;
  double warmup_fraction = 0.05;
  double weight_decay = 0.001;
  double temperature = 1.0;
  double eps_low = 0.0003;
  double eps_high = 0.0004;
  double std_floor = 1e-8;
  std::uint64_t master_seed = 1;
  int checkpoint_every = 100;
  std::string plan = "reference";
  std::string init = "bigram";

  void validate() const {
    if (total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
    if (cases_per_batch < 1) throw std::invalid_argument("cases_per_batch must be >= 1");
    if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
    if (update_minibatch < 1 || update_minibatch > cases_per_batch)
      throw std::invalid_argument("update_minibatch must be in [1, cases_per_batch]");
    if (cases_per_batch % update_minibatch != 0)
      throw std::invalid_argument("update_minibatch must divide cases_per_batch");
    if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
      throw std::invalid_argument("warmup_fraction must be in [0, 1]");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
    if (temperature <= 0.0) throw std::invalid_argument("temperature must be > 0");
    if (eps_low < 0.0 || eps_low >= 1.0) throw std::invalid_argument("eps_low must be in [0, 1)");
    if (eps_high < 0.0) throw std::invalid_argument("eps_high must be >= 0");
    if (std_floor <= 0.0) throw std::invalid_argument("std_floor must be > 0");
    if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
    if (init != "bigram" && init != "zero")
      throw std::invalid_argument("init must be 'bigram' or 'zero', got '" + init + "'");
    plan_by_name(plan);
  }

  ClipConfig clip() const { return {eps_low, eps_high, std_floor}; }
};

// ---------------------------------------------------------------------------
// Config file format: one "key = value" per line, '#' starts a comment.

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string format_double(double v) {
  std::ostringstream oss;
  oss << std::setprecision(17) << v;
  return oss.str();
}

}  // namespace detail

inline std::string canonical_config_text(const TrainConfig& c) {
  std::ostringstream oss;
  oss << "total_steps = " << c.total_steps << "\n"
      << "cases_per_batch = " << c.cases_per_batch << "\n"
      << "group_size = " << c.group_size << "\n"
      << "update_minibatch = " << c.update_minibatch << "\n"
      << "learning_rate = " << detail::format_double(c.learning_rate) << "\n"
      << "warmup_fraction = " << detail::format_double(c.warmup_fraction) << "\n"
      << "weight_decay = " << detail::format_double(c.weight_decay) << "\n"
      << "temperature = " << detail::format_double(c.temperature) << "\n"
      << "eps_low = " << detail::format_double(c.eps_low) << "\n"
      << "eps_high = " << detail::format_double(c.eps_high) << "\n"
      << "std_floor = " << detail::format_double(c.std_floor) << "\n"
      << "master_seed = " << c.master_seed << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n"
      << "plan = " << c.plan << "\n"
      << "init = " << c.init << "\n";
  return oss.str();
}

inline std::uint64_t config_hash(const TrainConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config_text(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline TrainConfig parse_train_config_text(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  std::map<std::string, bool> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " is not 'key = value': " + stripped);
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " is not 'key = value': " + stripped);
    if (seen[key])
      throw std::invalid_argument("duplicate config key: " + key);
    seen[key] = true;
    try {
      if (key == "total_steps") c.total_steps = std::stoi(value);
      else if (key == "cases_per_batch") c.cases_per_batch = std::stoi(value);
      else if (key == "group_size") c.group_size = std::stoi(value);
      else if (key == "update_minibatch") c.update_minibatch = std::stoi(value);
      else if (key == "learning_rate") c.learning_rate = std::stod(value);
      else if (key == "warmup_fraction") c.warmup_fraction = std::stod(value);
      else if (key == "weight_decay") c.weight_decay = std::stod(value);
      else if (key == "temperature") c.temperature = std::stod(value);
      else if (key == "eps_low") c.eps_low = std::stod(value);
      else if (key == "eps_high") c.eps_high = std::stod(value);
      else if (key == "std_floor") c.std_floor = std::stod(value);
      else if (key == "master_seed") c.master_seed = std::stoull(value);
      else if (key == "checkpoint_every") c.checkpoint_every = std::stoi(value);
      else if (key == "plan") c.plan = value;
      else if (key == "init") c.init = value;
      else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("bad value for config key " + key + ": " + value);
    }
  }
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream oss;
  oss << in.rdbuf();
  return parse_train_config_text(oss.str());
}

inline void save_train_config(const TrainConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open config file for writing: " + path);
  out << canonical_config_text(c);
}

// ---------------------------------------------------------------------------
// Learning-rate schedule: linear warmup to the configured rate, then flat.

inline double learning_rate_at(const TrainConfig& c, int step) {
  const double warm = c.warmup_fraction * static_cast<double>(c.total_steps);
  if (warm <= 0.0 || static_cast<double>(step) >= warm) return c.learning_rate;
  return c.learning_rate * static_cast<double>(step) / warm;
}

// ---------------------------------------------------------------------------
// Initialization. Policy optimization needs a starting point that already
// writes well-formed reports, playing the role a pretrained backbone would;
// here that is a smoothed position-aware bigram language model fit on the
// train split's ground-truth reports. The fit fills the bias row (unigram
// log-probabilities), the
// previous-token window block, and the position-bucket block (each as
// conditional-vs-unigram log-ratios), so summed logits reproduce the fitted
// conditionals while every query-dependent weight stays zero: at the start
// of training the policy writes plausible but query-blind reports. Rows for
// contexts never observed stay zero, so unseen contexts fall back to the
// unigram distribution.

inline std::vector<double> bigram_init_weights(const CaseDataset& dataset, const Vocab& vocab,
                                               const FeatureMap& fmap, double smoothing = 0.2,
                                               int pos_buckets_to_fit = 2) {
  if (smoothing <= 0.0) throw std::invalid_argument("bigram smoothing must be > 0");
  const int V = vocab.size();
  if (fmap.config().vocab_size != V)
    throw std::invalid_argument("feature map vocab size does not match the vocabulary");
  if (fmap.config().window < 1)
    throw std::invalid_argument("bigram init needs a context window of at least 1");
  const int P = fmap.config().pos_buckets;
  const int stride = fmap.config().pos_stride;
  std::vector<double> uni(static_cast<std::size_t>(V), 0.0);
  std::vector<double> big(static_cast<std::size_t>(V) * static_cast<std::size_t>(V), 0.0);
  std::vector<double> row(static_cast<std::size_t>(V), 0.0);
  std::vector<double> posuni(static_cast<std::size_t>(P) * static_cast<std::size_t>(V), 0.0);
  std::vector<double> posrow(static_cast<std::size_t>(P), 0.0);
  double total = 0.0;
  for (const Case& c : dataset.cases) {
    if (c.split != "train") continue;
    const TokenSequence seq = tokenize(c.truth_text, vocab);
    int prev = -1;
    int pos = 0;
    for (int id : seq.ids) {
      uni[static_cast<std::size_t>(id)] += 1.0;
      total += 1.0;
      if (prev >= 0) {
        big[static_cast<std::size_t>(prev) * static_cast<std::size_t>(V) +
            static_cast<std::size_t>(id)] += 1.0;
        row[static_cast<std::size_t>(prev)] += 1.0;
      }
      if (P > 0) {
        const int bucket = std::min(pos / stride, P - 1);
        posuni[static_cast<std::size_t>(bucket) * static_cast<std::size_t>(V) +
               static_cast<std::size_t>(id)] += 1.0;
        posrow[static_cast<std::size_t>(bucket)] += 1.0;
      }
      prev = id;
      ++pos;
    }
  }
  if (total == 0.0) throw std::invalid_argument("bigram init: train split is empty");

  const double denom_u = total + smoothing * static_cast<double>(V);
  std::vector<double> weights(static_cast<std::size_t>(fmap.feature_dim()) *
                                  static_cast<std::size_t>(V),
                              0.0);
  const std::size_t bias_f = static_cast<std::size_t>(fmap.config().window) *
                                 static_cast<std::size_t>(V) +
                             static_cast<std::size_t>(P);
  std::vector<double> log_uni(static_cast<std::size_t>(V), 0.0);
  for (int v = 0; v < V; ++v) {
    log_uni[static_cast<std::size_t>(v)] =
        std::log((uni[static_cast<std::size_t>(v)] + smoothing) / denom_u);
    weights[bias_f * static_cast<std::size_t>(V) + static_cast<std::size_t>(v)] =
        log_uni[static_cast<std::size_t>(v)];
  }
  auto fill_log_ratio_row = [&](std::size_t feature, const double* counts, double row_total) {
    const double denom = row_total + smoothing * static_cast<double>(V);
    for (int v = 0; v < V; ++v) {
      const double log_cond = std::log((counts[v] + smoothing) / denom);
      weights[feature * static_cast<std::size_t>(V) + static_cast<std::size_t>(v)] =
          log_cond - log_uni[static_cast<std::size_t>(v)];
    }
  };
  for (int p = 0; p < V; ++p) {
    if (row[static_cast<std::size_t>(p)] == 0.0) continue;
    fill_log_ratio_row(static_cast<std::size_t>(p),
                       big.data() + static_cast<std::size_t>(p) * static_cast<std::size_t>(V),
                       row[static_cast<std::size_t>(p)]);
  }
  const std::size_t pos_base =
      static_cast<std::size_t>(fmap.config().window) * static_cast<std::size_t>(V);
  const int fit_buckets = pos_buckets_to_fit < 0 ? P : std::min(pos_buckets_to_fit, P);
  for (int b = 0; b < fit_buckets; ++b) {
    if (posrow[static_cast<std::size_t>(b)] == 0.0) continue;
    fill_log_ratio_row(pos_base + static_cast<std::size_t>(b),
                       posuni.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(V),
                       posrow[static_cast<std::size_t>(b)]);
  }
  return weights;
}

// ---------------------------------------------------------------------------
// Metrics

struct StepMetrics {
  int step = 0;
  double mean_reward = 0.0;
  double mean_rouge_l = 0.0;
  double mean_label_acc = 0.0;
  double mean_graph_f1 = 0.0;
  double objective = 0.0;
  double clip_fraction = 0.0;
  std::map<std::string, double> grad_norms;  // per agent, mean over minibatches
};

inline std::string metrics_csv_header(const std::vector<std::string>& agent_ids) {
  std::string h = "step,mean_reward,mean_rouge_l,mean_label_acc,mean_graph_f1,objective,clip_fraction";
  for (const auto& id : agent_ids) h += ",grad_norm_" + id;
  return h;
}

inline std::string metrics_csv_row(const StepMetrics& m,
                                   const std::vector<std::string>& agent_ids) {
  std::ostringstream oss;
  oss << m.step << ',' << detail::format_double(m.mean_reward) << ','
      << detail::format_double(m.mean_rouge_l) << ',' << detail::format_double(m.mean_label_acc)
      << ',' << detail::format_double(m.mean_graph_f1) << ','
      << detail::format_double(m.objective) << ',' << detail::format_double(m.clip_fraction);
  for (const auto& id : agent_ids) oss << ',' << detail::format_double(m.grad_norms.at(id));
  return oss.str();
}

// ---------------------------------------------------------------------------
// Checkpoints: one .policy file per agent plus a JSON sidecar.

inline void save_checkpoint_dir(const std::filesystem::path& dir, const AgentParams& agents,
                                int step, const TrainConfig& cfg) {
  std::filesystem::create_directories(dir);
  nlohmann::json sidecar = {{"schema", "ckpt-v1"},
                            {"step", step},
                            {"plan", cfg.plan},
                            {"master_seed", cfg.master_seed},
                            {"stream_pos", static_cast<std::uint64_t>(step) *
                                               static_cast<std::uint64_t>(cfg.cases_per_batch)},
                            {"config_hash", config_hash(cfg)},
                            {"agents", nlohmann::json::array()}};
  for (const auto& [id, params] : agents) {
    save_policy(params, (dir / (id + ".policy")).string());
    sidecar["agents"].push_back(id);
  }
  std::ofstream out(dir / "sidecar.json");
  if (!out) throw std::runtime_error("cannot write checkpoint sidecar in " + dir.string());
  out << sidecar.dump(2) << "\n";
}

struct LoadedCheckpoint {
  AgentParams agents;
  int step = 0;
  std::string plan;
  std::uint64_t config_hash = 0;
};

inline LoadedCheckpoint load_checkpoint_dir(const std::filesystem::path& dir,
                                            const FeatureMap& fmap) {
  std::ifstream in(dir / "sidecar.json");
  if (!in) throw std::runtime_error("cannot open checkpoint sidecar: " +
                                    (dir / "sidecar.json").string());
  nlohmann::json sidecar = nlohmann::json::parse(in);
  if (sidecar.value("schema", "") != "ckpt-v1")
    throw std::runtime_error("unsupported checkpoint schema in " + dir.string());
  LoadedCheckpoint lc;
  lc.step = sidecar.at("step").get<int>();
  lc.plan = sidecar.at("plan").get<std::string>();
  lc.config_hash = sidecar.at("config_hash").get<std::uint64_t>();
  for (const auto& id : sidecar.at("agents")) {
    const std::string agent = id.get<std::string>();
    lc.agents.emplace(agent, load_policy((dir / (agent + ".policy")).string(), fmap));
  }
  return lc;
}

// Highest step_<n> subdirectory, or -1 when none exists.
inline int latest_checkpoint_step(const std::filesystem::path& out_dir) {
  int best = -1;
  if (!std::filesystem::is_directory(out_dir)) return best;
  for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("step_", 0) != 0) continue;
    try {
      best = std::max(best, std::stoi(name.substr(5)));
    } catch (const std::exception&) {
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Trainer

inline constexpr std::uint64_t kShuffleStream = 0x53484dULL;   // case-order stream tag
inline constexpr std::uint64_t kRolloutStream = 0x524f4cULL;   // rollout stream tag

class Trainer {
 public:
  Trainer(TrainConfig cfg, const CaseDataset& dataset, const Vocab& vocab, const RuleSet& rules)
      : cfg_(std::move(cfg)),
        plan_(plan_by_name(cfg_.plan)),
        dataset_(&dataset),
        vocab_(&vocab),
        rules_(&rules),
        train_idx_(split_indices(dataset, "train")) {
    cfg_.validate();
    if (train_idx_.empty()) throw std::invalid_argument("dataset has no train cases");
    const FeatureMap fmap(default_feature_config(vocab));
    agents_ = make_agent_params(plan_, fmap);
    if (cfg_.init == "bigram") {
      const std::vector<double> w = bigram_init_weights(dataset, vocab, fmap);
      for (auto& [id, params] : agents_) params.weights = w;
    }
  }

  const TrainConfig& config() const { return cfg_; }
  const WorkflowPlan& plan() const { return plan_; }
  const AgentParams& agents() const { return agents_; }
  AgentParams& mutable_agents() { return agents_; }
  int step() const { return step_; }
  void set_step(int step) { step_ = step; }

  // Case at position `pos` of the shuffled train stream. Every epoch is an
  // independent permutation derived from the master seed and epoch number.
  int stream_case_index(std::uint64_t pos) const {
    const std::uint64_t n = train_idx_.size();
    const std::uint64_t epoch = pos / n;
    const std::uint64_t offset = pos % n;
    if (epoch != perm_epoch_ || perm_.empty()) {
      perm_ = train_idx_;
      Rng rng(mix_seed(mix_seed(cfg_.master_seed, kShuffleStream), epoch));
      for (std::size_t i = perm_.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
        std::swap(perm_[i], perm_[j]);
      }
      perm_epoch_ = epoch;
    }
    return perm_[offset];
  }

  StepMetrics train_step() {
    const AgentSnapshots snapshots = snapshot_agents(agents_);
    const std::uint64_t step_seed =
        mix_seed(mix_seed(cfg_.master_seed, kRolloutStream), static_cast<std::uint64_t>(step_));

    std::vector<const Case*> batch_cases;
    std::vector<std::vector<JointRollout>> groups;
    batch_cases.reserve(static_cast<std::size_t>(cfg_.cases_per_batch));
    groups.reserve(static_cast<std::size_t>(cfg_.cases_per_batch));
    StepMetrics m;
    m.step = step_;
    for (int b = 0; b < cfg_.cases_per_batch; ++b) {
      const std::uint64_t pos = static_cast<std::uint64_t>(step_) *
                                    static_cast<std::uint64_t>(cfg_.cases_per_batch) +
                                static_cast<std::uint64_t>(b);
      const Case& c = dataset_->cases[static_cast<std::size_t>(stream_case_index(pos))];
      batch_cases.push_back(&c);
      std::vector<JointRollout> group;
      group.reserve(static_cast<std::size_t>(cfg_.group_size));
      for (int i = 0; i < cfg_.group_size; ++i) {
        JointRollout r = run_joint_rollout(plan_, snapshots, c, *vocab_, cfg_.temperature,
                                           step_seed, i);
        r.reward = combined_reward(r.final_report, c.truth_report, c.truth_labels,
                                   c.truth_graph, *vocab_, *rules_);
        m.mean_reward += r.reward.total;
        m.mean_rouge_l += r.reward.rouge_l;
        m.mean_label_acc += r.reward.label_acc;
        m.mean_graph_f1 += r.reward.graph_f1;
        group.push_back(std::move(r));
      }
      groups.push_back(std::move(group));
    }
    const double rollout_count =
        static_cast<double>(cfg_.cases_per_batch) * static_cast<double>(cfg_.group_size);
    m.mean_reward /= rollout_count;
    m.mean_rouge_l /= rollout_count;
    m.mean_label_acc /= rollout_count;
    m.mean_graph_f1 /= rollout_count;

    const auto advantages = advantages_for_groups(groups, cfg_.std_floor);
    const double lr = learning_rate_at(cfg_, step_);
    const ClipConfig clip = cfg_.clip();

    std::size_t terms_total = 0, clipped_total = 0;
    double objective_weighted = 0.0;
    std::map<std::string, double> norm_sums;
    for (const auto& id : plan_.agent_ids()) norm_sums[id] = 0.0;
    int chunk_count = 0;
    for (int begin = 0; begin < cfg_.cases_per_batch; begin += cfg_.update_minibatch) {
      const int end = std::min(begin + cfg_.update_minibatch, cfg_.cases_per_batch);
      const std::vector<std::vector<JointRollout>> chunk_groups(groups.begin() + begin,
                                                                groups.begin() + end);
      const std::vector<std::vector<double>> chunk_adv(advantages.begin() + begin,
                                                       advantages.begin() + end);
      SurrogateReport sr =
          magspo_gradient(plan_, agents_, chunk_groups, chunk_adv, clip, cfg_.temperature);
      terms_total += sr.term_count;
      clipped_total += sr.clipped_count;
      objective_weighted += sr.objective * static_cast<double>(end - begin);
      ++chunk_count;
      for (auto& [id, grad] : sr.gradients) {
        double sq = 0.0;
        for (double g : grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > 1e6)
          throw std::runtime_error("gradient norm exceeded 1e6: training diverged");
        norm_sums[id] += norm;
        auto& theta = agents_.at(id).weights;
        const double keep = 1.0 - lr * cfg_.weight_decay;
        for (std::size_t w = 0; w < theta.size(); ++w) {
          theta[w] = theta[w] * keep + lr * grad[w];
          if (!std::isfinite(theta[w]))
            throw std::runtime_error("non-finite parameter after update: training diverged");
        }
      }
    }
    m.objective = objective_weighted / static_cast<double>(cfg_.cases_per_batch);
    m.clip_fraction = terms_total == 0 ? 0.0
                                       : static_cast<double>(clipped_total) /
                                             static_cast<double>(terms_total);
    for (const auto& [id, sum] : norm_sums) {
      m.grad_norms[id] = sum / static_cast<double>(chunk_count);
    }
    ++step_;
    return m;
  }

  void save_checkpoint(const std::filesystem::path& out_dir) const {
    save_checkpoint_dir(out_dir / ("step_" + std::to_string(step_)), agents_, step_, cfg_);
  }

  // Replaces the agent parameters with a checkpoint and fast-forwards the
  // step counter so training continues exactly where it stopped.
  void restore(const LoadedCheckpoint& ckpt) {
    if (ckpt.plan != cfg_.plan)
      throw std::runtime_error("checkpoint plan '" + ckpt.plan +
                               "' does not match configured plan '" + cfg_.plan + "'");
    if (ckpt.config_hash != config_hash(cfg_))
      throw std::runtime_error("checkpoint config hash does not match the current config");
    for (const auto& id : plan_.agent_ids()) {
      if (ckpt.agents.find(id) == ckpt.agents.end())
        throw std::runtime_error("checkpoint is missing agent: " + id);
    }
    agents_ = ckpt.agents;
    step_ = ckpt.step;
  }

 private:
  TrainConfig cfg_;
  WorkflowPlan plan_;
  const CaseDataset* dataset_;
  const Vocab* vocab_;
  const RuleSet* rules_;
  std::vector<int> train_idx_;
  AgentParams agents_;
  int step_ = 0;
  mutable std::vector<int> perm_;
  mutable std::uint64_t perm_epoch_ = static_cast<std::uint64_t>(-1);
};

// Full run with metrics and periodic checkpoints under out_dir. With
// resume = true, picks up from the newest step_<n> checkpoint and appends to
// the existing metrics file. stop_after >= 0 halts once that many steps are
// done, standing in for an interrupted process.
inline std::vector<StepMetrics> run_training(Trainer& trainer,
                                             const std::filesystem::path& out_dir,
                                             bool resume = false, int stop_after = -1) {
  std::filesystem::create_directories(out_dir);
  const auto agent_ids = trainer.plan().agent_ids();
  const auto metrics_path = out_dir / "metrics.csv";
  std::ofstream metrics;
  if (resume) {
    const int latest = latest_checkpoint_step(out_dir);
    if (latest < 0) throw std::runtime_error("no checkpoint to resume from in " + out_dir.string());
    const FeatureMap fmap(trainer.agents().begin()->second.feature_map.config());
    trainer.restore(load_checkpoint_dir(out_dir / ("step_" + std::to_string(latest)), fmap));
    metrics.open(metrics_path, std::ios::app);
    if (!metrics) throw std::runtime_error("cannot append to metrics file: " + metrics_path.string());
  } else {
    trainer.save_checkpoint(out_dir);  // step_0 baseline
    metrics.open(metrics_path, std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics file: " + metrics_path.string());
    metrics << metrics_csv_header(agent_ids) << "\n";
  }

  std::vector<StepMetrics> history;
  while (trainer.step() < trainer.config().total_steps &&
         (stop_after < 0 || trainer.step() < stop_after)) {
    StepMetrics m = trainer.train_step();
    metrics << metrics_csv_row(m, agent_ids) << "\n";
    metrics.flush();
    const int done = trainer.step();
    if (done % trainer.config().checkpoint_every == 0 || done == trainer.config().total_steps) {
      trainer.save_checkpoint(out_dir);
    }
    history.push_back(std::move(m));
  }
  return history;
}

}  // namespace magspo
