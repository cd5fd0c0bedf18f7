#pragma once

// Synthetic report-generation environment. A latent chest state (left, right,
// central finding) is drawn per case, rendered into a two-section truth
// report by fixed templates, and exposed to the policy as a noisy feature
// vector plus quantized query tokens. Truth labels and the truth graph come
// from the same rule set that scores predictions, so a verbatim reproduction
// of the truth report earns the maximum reward.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magspo/rewards.hpp"
#include "magspo/rng.hpp"
#include "magspo/textcore.hpp"

namespace magspo {

inline constexpr int kMaxReportLen = 64;
inline constexpr int kQueryDim = 11;       // left one-hot(4) + central(3) + right(4)
inline constexpr int kQueryBuckets = 16;
inline constexpr double kBenignProb = 0.6;
inline constexpr double kNoiseSigma = 0.1;

// Tokens are fixed so checkpoints and datasets stay mutually compatible:
// control tokens first, role tags, quantized query tokens, then the report
// vocabulary.
inline Vocab default_vocab(int max_len = kMaxReportLen) {
  std::vector<std::string> tokens = {"<eos>", "###", "Findings", "Impression",
                                     "<left>", "<central>", "<right>", "<global>"};
  for (int b = 0; b < kQueryBuckets; ++b) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "q%02d", b);
    tokens.emplace_back(buf);
  }
  for (const char* w :
       {"the",       "left",         "right",        "lung",    "lungs",   "is",
        "are",       "unremarkable", "shows",        "effusion", "consolidation",
        "pneumothorax", "heart",     "size",         "normal",  "cardiomegaly",
        "mediastinum", "widened",    "no",           "acute",   "findings", "and",
        "also",      "without",      "clear",        "a",       "pleural", "basal",
        "apical",    "there",        "stable",       "seen"}) {
    tokens.emplace_back(w);
  }
  return Vocab(std::move(tokens), 0, max_len);
}

// ---------------------------------------------------------------------------
// Latent state

enum class SideFinding { Clear = 0, Effusion = 1, Consolidation = 2, Pneumothorax = 3 };
enum class CentralFinding { Normal = 0, Cardiomegaly = 1, WidenedMediastinum = 2 };

struct LatentState {
  SideFinding left = SideFinding::Clear;
  SideFinding right = SideFinding::Clear;
  CentralFinding central = CentralFinding::Normal;

  bool operator==(const LatentState&) const = default;
};

inline constexpr int kLatentStates = 48;  // 4 left * 4 right * 3 central

inline int state_index(const LatentState& s) {
  return (static_cast<int>(s.left) * 4 + static_cast<int>(s.right)) * 3 +
         static_cast<int>(s.central);
}

inline LatentState state_from_index(int idx) {
  if (idx < 0 || idx >= kLatentStates)
    throw std::invalid_argument("latent state index out of range: " + std::to_string(idx));
  LatentState s;
  s.central = static_cast<CentralFinding>(idx % 3);
  idx /= 3;
  s.right = static_cast<SideFinding>(idx % 4);
  s.left = static_cast<SideFinding>(idx / 4);
  return s;
}

inline LatentState draw_state(Rng& rng) {
  LatentState s;
  auto draw_side = [&rng]() {
    if (rng.next_unit() < kBenignProb) return SideFinding::Clear;
    return static_cast<SideFinding>(1 + rng.next_below(3));
  };
  s.left = draw_side();
  if (rng.next_unit() < kBenignProb) {
    s.central = CentralFinding::Normal;
  } else {
    s.central = static_cast<CentralFinding>(1 + rng.next_below(2));
  }
  s.right = draw_side();
  return s;
}

// ---------------------------------------------------------------------------
// Truth rendering

namespace detail {

inline void append_side_sentence(std::vector<std::string>& w, const char* side, SideFinding f) {
  w.insert(w.end(), {"the", side, "lung"});
  switch (f) {
    case SideFinding::Clear: w.insert(w.end(), {"is", "unremarkable"}); break;
    case SideFinding::Effusion: w.insert(w.end(), {"shows", "effusion"}); break;
    case SideFinding::Consolidation: w.insert(w.end(), {"shows", "consolidation"}); break;
    case SideFinding::Pneumothorax: w.insert(w.end(), {"shows", "pneumothorax"}); break;
  }
}

inline void append_central_sentence(std::vector<std::string>& w, CentralFinding f) {
  switch (f) {
    case CentralFinding::Normal: w.insert(w.end(), {"the", "heart", "size", "is", "normal"}); break;
    case CentralFinding::Cardiomegaly: w.insert(w.end(), {"the", "heart", "shows", "cardiomegaly"}); break;
    case CentralFinding::WidenedMediastinum:
      w.insert(w.end(), {"the", "mediastinum", "is", "widened"});
      break;
  }
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace detail

inline std::string render_findings(const LatentState& s) {
  std::vector<std::string> w;
  detail::append_side_sentence(w, "left", s.left);
  detail::append_central_sentence(w, s.central);
  detail::append_side_sentence(w, "right", s.right);
  return detail::join_words(w);
}

// Positive findings in label-schema order, separated by "and also" so that
// trigger windows and the relation window cannot bridge adjacent phrases.
inline std::string render_impression(const LatentState& s) {
  std::vector<std::string> phrases;
  auto side_phrase = [](const char* side, SideFinding f) -> std::string {
    switch (f) {
      case SideFinding::Effusion: return std::string(side) + " effusion";
      case SideFinding::Consolidation: return std::string(side) + " consolidation";
      case SideFinding::Pneumothorax: return std::string(side) + " pneumothorax";
      default: return {};
    }
  };
  auto add_if = [&phrases](std::string p) {
    if (!p.empty()) phrases.push_back(std::move(p));
  };
  // Schema order: effusions, consolidations, pneumothoraces (left before
  // right), then cardiomegaly, then widened mediastinum.
  if (s.left == SideFinding::Effusion) add_if(side_phrase("left", s.left));
  if (s.right == SideFinding::Effusion) add_if(side_phrase("right", s.right));
  if (s.left == SideFinding::Consolidation) add_if(side_phrase("left", s.left));
  if (s.right == SideFinding::Consolidation) add_if(side_phrase("right", s.right));
  if (s.left == SideFinding::Pneumothorax) add_if(side_phrase("left", s.left));
  if (s.right == SideFinding::Pneumothorax) add_if(side_phrase("right", s.right));
  if (s.central == CentralFinding::Cardiomegaly) phrases.emplace_back("cardiomegaly");
  if (s.central == CentralFinding::WidenedMediastinum) phrases.emplace_back("widened mediastinum");
  if (phrases.empty()) return "no acute findings";
  std::string out;
  for (const auto& p : phrases) {
    if (!out.empty()) out += " and also ";
    out += p;
  }
  return out;
}

inline std::string render_truth_text(const LatentState& s) {
  return std::string(kFindingsHeader) + " " + render_findings(s) + " " +
         std::string(kImpressionHeader) + " " + render_impression(s);
}

inline Report render_truth(const LatentState& s, const Vocab& vocab) {
  return split_report(render_truth_text(s), vocab);
}

// ---------------------------------------------------------------------------
// Query features

inline std::vector<double> state_one_hot(const LatentState& s) {
  std::vector<double> v(kQueryDim, 0.0);
  v[static_cast<int>(s.left)] = 1.0;
  v[4 + static_cast<int>(s.central)] = 1.0;
  v[7 + static_cast<int>(s.right)] = 1.0;
  return v;
}

inline int quantize_feature(double v) {
  const double scaled = (v + 0.25) * (static_cast<double>(kQueryBuckets) / 1.5);
  int b = static_cast<int>(std::floor(scaled));
  if (b < 0) b = 0;
  if (b >= kQueryBuckets) b = kQueryBuckets - 1;
  return b;
}

inline std::vector<int> query_tokens(const std::vector<double>& features, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(features.size());
  for (double v : features) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "q%02d", quantize_feature(v));
    ids.push_back(vocab.id_of(buf));
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Cases and datasets

struct Case {
  int case_id = 0;
  std::string split;
  LatentState state;
  std::vector<double> query_features;
  std::string truth_text;
  Report truth_report;
  LabelVector truth_labels;
  ReportGraph truth_graph;
};

inline Case generate_case(std::uint64_t dataset_seed, int case_id, const std::string& split,
                          const Vocab& vocab, const RuleSet& rules) {
  Case c;
  c.case_id = case_id;
  c.split = split;
  Rng rng(mix_seed(dataset_seed, static_cast<std::uint64_t>(case_id)));
  c.state = draw_state(rng);
  c.query_features = state_one_hot(c.state);
  for (double& v : c.query_features) v += kNoiseSigma * rng.next_normal();
  c.truth_text = render_truth_text(c.state);
  c.truth_report = split_report(c.truth_text, vocab);
  c.truth_labels = toy_labeler(c.truth_report, vocab, rules);
  c.truth_graph = toy_graph_extract(c.truth_report, vocab, rules);
  return c;
}

struct CaseDataset {
  std::uint64_t seed = 0;
  int train_cases = 0;
  int val_cases = 0;
  int test_cases = 0;
  std::vector<Case> cases;

  int total() const { return train_cases + val_cases + test_cases; }
};

inline std::uint64_t dataset_config_hash(std::uint64_t seed, int train, int val, int test) {
  std::ostringstream oss;
  oss << "seed=" << seed << " train=" << train << " val=" << val << " test=" << test
      << " benign=" << kBenignProb << " sigma=" << kNoiseSigma << " qdim=" << kQueryDim
      << " buckets=" << kQueryBuckets;
  const std::string s = oss.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string split_for_index(int idx, int train, int val) {
  if (idx < train) return "train";
  if (idx < train + val) return "val";
  return "test";
}

inline CaseDataset build_dataset(std::uint64_t seed, int train, int val, int test,
                                 const Vocab& vocab, const RuleSet& rules) {
  if (train < 0 || val < 0 || test < 0 || train + val + test == 0)
    throw std::invalid_argument("dataset split sizes must be non-negative and non-empty");
  CaseDataset ds;
  ds.seed = seed;
  ds.train_cases = train;
  ds.val_cases = val;
  ds.test_cases = test;
  ds.cases.reserve(static_cast<std::size_t>(ds.total()));
  for (int i = 0; i < ds.total(); ++i) {
    ds.cases.push_back(generate_case(seed, i, split_for_index(i, train, val), vocab, rules));
  }
  return ds;
}

inline std::vector<int> split_indices(const CaseDataset& ds, const std::string& split) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < ds.cases.size(); ++i) {
    if (ds.cases[i].split == split) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Dataset serialization (JSON lines, one header line then one line per case)

inline nlohmann::json case_to_json(const Case& c) {
  return {{"case_id", c.case_id},
          {"split", c.split},
          {"features", c.query_features},
          {"truth_text", c.truth_text},
          {"labels", c.truth_labels},
          {"graph", graph_to_json(c.truth_graph)}};
}

inline void save_dataset(const CaseDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
  nlohmann::json header = {
      {"schema", "dataset-v1"},
      {"seed", ds.seed},
      {"train", ds.train_cases},
      {"val", ds.val_cases},
      {"test", ds.test_cases},
      {"config_hash", dataset_config_hash(ds.seed, ds.train_cases, ds.val_cases, ds.test_cases)}};
  out << header.dump() << "\n";
  for (const auto& c : ds.cases) out << case_to_json(c).dump() << "\n";
}

inline CaseDataset load_dataset(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("schema", "") != "dataset-v1")
    throw std::runtime_error("unsupported dataset schema in " + path);
  CaseDataset ds;
  ds.seed = header.at("seed").get<std::uint64_t>();
  ds.train_cases = header.at("train").get<int>();
  ds.val_cases = header.at("val").get<int>();
  ds.test_cases = header.at("test").get<int>();
  const std::uint64_t expect_hash =
      dataset_config_hash(ds.seed, ds.train_cases, ds.val_cases, ds.test_cases);
  if (header.at("config_hash").get<std::uint64_t>() != expect_hash)
    throw std::runtime_error("dataset config hash mismatch in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    Case c;
    c.case_id = j.at("case_id").get<int>();
    c.split = j.at("split").get<std::string>();
    c.query_features = j.at("features").get<std::vector<double>>();
    c.truth_text = j.at("truth_text").get<std::string>();
    c.truth_report = split_report(c.truth_text, vocab);
    c.truth_labels = j.at("labels").get<LabelVector>();
    c.truth_graph = graph_from_json(j.at("graph"));
    // The latent state is not serialized; regenerate it from the recorded
    // seed so in-memory cases are complete either way.
    Rng rng(mix_seed(ds.seed, static_cast<std::uint64_t>(c.case_id)));
    c.state = draw_state(rng);
    ds.cases.push_back(std::move(c));
  }
  if (static_cast<int>(ds.cases.size()) != ds.total())
    throw std::runtime_error("dataset case count mismatch in " + path);
  return ds;
}

// True when every stored case matches a fresh regeneration from the header
// seed, field for field.
inline bool verify_dataset(const CaseDataset& ds, const Vocab& vocab, const RuleSet& rules,
                           std::string* first_mismatch = nullptr) {
  for (int i = 0; i < ds.total(); ++i) {
    const Case& stored = ds.cases[static_cast<std::size_t>(i)];
    const Case fresh = generate_case(ds.seed, stored.case_id,
                                     split_for_index(stored.case_id, ds.train_cases, ds.val_cases),
                                     vocab, rules);
    const bool ok = stored.case_id == fresh.case_id && stored.split == fresh.split &&
                    stored.query_features == fresh.query_features &&
                    stored.truth_text == fresh.truth_text &&
                    stored.truth_labels == fresh.truth_labels &&
                    case_to_json(stored)["graph"] == case_to_json(fresh)["graph"];
    if (!ok) {
      if (first_mismatch) *first_mismatch = "case " + std::to_string(stored.case_id);
      return false;
    }
  }
  return true;
}

}  // namespace magspo
