#pragma once

// Deterministic, exactly computable reward components: token-level ROUGE-L,
// a rule-based finding labeler, a rule-based entity/relation graph extractor,
// and graph F1 with the laterality-restricted variant. The labeler and
// extractor stand in for neural report scorers behind the same interfaces;
// their rules live in a versioned fixture file so every value is auditable.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "magspo/textcore.hpp"

namespace magspo {

// ---------------------------------------------------------------------------
// ROUGE-L

namespace detail {

inline int lcs_length(std::span<const int> a, std::span<const int> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

// F-measure over the longest common subsequence. beta = 1 weighs precision
// and recall equally; larger beta weighs recall (the classical ROUGE choice).
inline double rouge_l(std::span<const int> candidate, std::span<const int> reference,
                      double beta = 1.0) {
  if (candidate.empty() && reference.empty()) return 1.0;
  if (candidate.empty() || reference.empty()) return 0.0;
  const int l = detail::lcs_length(candidate, reference);
  if (l == 0) return 0.0;
  const double p = static_cast<double>(l) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(l) / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

inline double rouge_l(const TokenSequence& candidate, const TokenSequence& reference,
                      const Vocab& vocab, double beta = 1.0) {
  return rouge_l(candidate.content(vocab), reference.content(vocab), beta);
}

// ---------------------------------------------------------------------------
// Rule fixture

struct TriggerRule {
  std::string label;
  std::vector<std::string> words;  // must appear in order, gap <= window
  int window = 0;
};

struct RuleSet {
  std::vector<TriggerRule> rules;  // order defines the label schema
  std::vector<std::string> negation_tokens;
  int negation_window = 4;
  std::vector<std::vector<std::string>> anatomy_phrases;
  std::vector<std::vector<std::string>> observation_phrases;
  int relation_window = 5;

  int label_count() const { return static_cast<int>(rules.size()); }
};

inline RuleSet default_rules() {
  RuleSet rs;
  auto add = [&rs](const std::string& label, std::vector<std::string> words, int window) {
    rs.rules.push_back({label, std::move(words), window});
  };
  add("left_effusion", {"left", "effusion"}, 3);
  add("right_effusion", {"right", "effusion"}, 3);
  add("left_consolidation", {"left", "consolidation"}, 3);
  add("right_consolidation", {"right", "consolidation"}, 3);
  add("left_pneumothorax", {"left", "pneumothorax"}, 3);
  add("right_pneumothorax", {"right", "pneumothorax"}, 3);
  add("cardiomegaly", {"cardiomegaly"}, 0);
  add("widened_mediastinum", {"mediastinum", "widened"}, 2);
  rs.negation_tokens = {"no", "without", "clear"};
  rs.negation_window = 4;
  rs.anatomy_phrases = {{"left", "lung"}, {"right", "lung"}, {"left"}, {"right"},
                        {"heart"},        {"mediastinum"}};
  rs.observation_phrases = {{"effusion"}, {"consolidation"}, {"pneumothorax"},
                            {"cardiomegaly"}, {"widened"}, {"normal"}, {"unremarkable"}};
  rs.relation_window = 5;
  return rs;
}

inline void save_rules(const RuleSet& rs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open rule fixture for writing: " + path);
  out << "toyrules v1\n";
  out << "NEGWINDOW " << rs.negation_window << "\n";
  for (const auto& n : rs.negation_tokens) out << "NEGATION " << n << "\n";
  for (const auto& r : rs.rules) {
    out << "RULE " << r.label << " TRIGGER";
    for (const auto& w : r.words) out << ' ' << w;
    out << " WINDOW " << r.window << "\n";
  }
  for (const auto& p : rs.anatomy_phrases) {
    out << "ANATOMY";
    for (const auto& w : p) out << ' ' << w;
    out << "\n";
  }
  for (const auto& p : rs.observation_phrases) {
    out << "OBSERVATION";
    for (const auto& w : p) out << ' ' << w;
    out << "\n";
  }
  out << "RELWINDOW " << rs.relation_window << "\n";
}

inline RuleSet load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rule fixture: " + path);
  std::string line;
  if (!std::getline(in, line) || split_words(line) != std::vector<std::string>{"toyrules", "v1"})
    throw std::runtime_error("bad rule fixture header: " + path);
  RuleSet rs;
  rs.negation_tokens.clear();
  while (std::getline(in, line)) {
    auto words = split_words(line);
    if (words.empty()) continue;
    const std::string& kind = words[0];
    if (kind == "NEGWINDOW" && words.size() == 2) {
      rs.negation_window = std::stoi(words[1]);
    } else if (kind == "NEGATION" && words.size() == 2) {
      rs.negation_tokens.push_back(words[1]);
    } else if (kind == "RELWINDOW" && words.size() == 2) {
      rs.relation_window = std::stoi(words[1]);
    } else if (kind == "ANATOMY" && words.size() >= 2) {
      rs.anatomy_phrases.emplace_back(words.begin() + 1, words.end());
    } else if (kind == "OBSERVATION" && words.size() >= 2) {
      rs.observation_phrases.emplace_back(words.begin() + 1, words.end());
    } else if (kind == "RULE" && words.size() >= 6 && words[2] == "TRIGGER" &&
               words[words.size() - 2] == "WINDOW") {
      TriggerRule r;
      r.label = words[1];
      r.words.assign(words.begin() + 3, words.end() - 2);
      r.window = std::stoi(words.back());
      rs.rules.push_back(std::move(r));
    } else {
      throw std::runtime_error("bad rule fixture line: '" + line + "' in " + path);
    }
  }
  return rs;
}

// ---------------------------------------------------------------------------
// Labeler

using LabelVector = std::vector<std::uint8_t>;  // 1 = positive, schema order

namespace detail {

// True when rule words j.. can be chained from position `pos` with gaps
// bounded by the rule window. Tries every continuation, not just the first.
inline bool chain_extends(const std::vector<std::string>& words, const TriggerRule& rule,
                          std::size_t j, std::size_t pos) {
  if (j == rule.words.size()) return true;
  const std::size_t limit = std::min(words.size(), pos + static_cast<std::size_t>(rule.window) + 1);
  for (std::size_t i = pos + 1; i < limit; ++i) {
    if (words[i] == rule.words[j] && chain_extends(words, rule, j + 1, i)) return true;
  }
  return false;
}

inline bool is_negated_at(const std::vector<std::string>& words, std::size_t start,
                          const RuleSet& rs) {
  const std::size_t from =
      start >= static_cast<std::size_t>(rs.negation_window)
          ? start - static_cast<std::size_t>(rs.negation_window)
          : 0;
  for (std::size_t k = from; k < start; ++k) {
    for (const auto& n : rs.negation_tokens) {
      if (words[k] == n) return true;
    }
  }
  return false;
}

}  // namespace detail

// A label is positive when some occurrence of its trigger phrase is not
// preceded by a negation token within the negation window.
inline bool rule_fires(const std::vector<std::string>& words, const TriggerRule& rule,
                       const RuleSet& rs) {
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] != rule.words[0]) continue;
    if (!detail::chain_extends(words, rule, 1, i)) continue;
    if (!detail::is_negated_at(words, i, rs)) return true;
  }
  return false;
}

inline LabelVector toy_labeler(const Report& report, const Vocab& vocab, const RuleSet& rs) {
  const auto words = report_content_words(report, vocab);
  LabelVector labels;
  labels.reserve(rs.rules.size());
  for (const auto& rule : rs.rules) labels.push_back(rule_fires(words, rule, rs) ? 1 : 0);
  return labels;
}

inline double label_accuracy(const LabelVector& pred, const LabelVector& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("label schema mismatch: " + std::to_string(pred.size()) +
                                " vs " + std::to_string(truth.size()) + " labels");
  if (pred.empty()) return 1.0;
  int match = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) match += (pred[i] == truth[i]) ? 1 : 0;
  return static_cast<double>(match) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Report graphs

enum class EntityCategory { Anatomy, Observation };
enum class RelationLabel { LocatedAt, Modify, SuggestiveOf };

inline const char* to_string(EntityCategory c) {
  return c == EntityCategory::Anatomy ? "Anatomy" : "Observation";
}

inline const char* to_string(RelationLabel l) {
  switch (l) {
    case RelationLabel::LocatedAt: return "located_at";
    case RelationLabel::Modify: return "modify";
    default: return "suggestive_of";
  }
}

struct Entity {
  int id = 0;
  std::string text;
  EntityCategory category = EntityCategory::Anatomy;
};

struct Relation {
  int src = 0;  // entity ids
  int dst = 0;
  RelationLabel label = RelationLabel::LocatedAt;
};

struct ReportGraph {
  std::vector<Entity> entities;
  std::vector<Relation> relations;

  const Entity* find(int id) const {
    for (const auto& e : entities)
      if (e.id == id) return &e;
    return nullptr;
  }

  void validate() const {
    for (const auto& r : relations) {
      if (!find(r.src) || !find(r.dst))
        throw std::invalid_argument("graph relation references a missing entity id");
    }
  }
};

// Rule-based extraction: greedy longest lexicon match left to right, then a
// located_at relation for every Observation that starts within
// relation_window tokens after an Anatomy span ends.
inline ReportGraph toy_graph_extract(const Report& report, const Vocab& vocab,
                                     const RuleSet& rs) {
  const auto words = report_content_words(report, vocab);

  struct Hit {
    int begin, end;  // word span, inclusive
    std::string text;
    EntityCategory category;
  };
  struct Phrase {
    const std::vector<std::string>* words;
    EntityCategory category;
  };
  std::vector<Phrase> phrases;
  for (const auto& p : rs.anatomy_phrases) phrases.push_back({&p, EntityCategory::Anatomy});
  for (const auto& p : rs.observation_phrases)
    phrases.push_back({&p, EntityCategory::Observation});
  std::stable_sort(phrases.begin(), phrases.end(),
                   [](const Phrase& a, const Phrase& b) { return a.words->size() > b.words->size(); });

  std::vector<Hit> hits;
  std::size_t i = 0;
  while (i < words.size()) {
    const Phrase* best = nullptr;
    for (const auto& ph : phrases) {
      const auto& pw = *ph.words;
      if (i + pw.size() > words.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; k < pw.size(); ++k) {
        if (words[i + k] != pw[k]) {
          ok = false;
          break;
        }
      }
      if (ok) {
        best = &ph;
        break;  // phrases are sorted longest first
      }
    }
    if (best) {
      std::string text;
      for (const auto& w : *best->words) {
        if (!text.empty()) text += ' ';
        text += w;
      }
      hits.push_back({static_cast<int>(i), static_cast<int>(i + best->words->size() - 1),
                      std::move(text), best->category});
      i += best->words->size();
    } else {
      ++i;
    }
  }

  ReportGraph g;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    g.entities.push_back({static_cast<int>(k), hits[k].text, hits[k].category});
  }
  for (std::size_t a = 0; a < hits.size(); ++a) {
    if (hits[a].category != EntityCategory::Anatomy) continue;
    for (std::size_t o = 0; o < hits.size(); ++o) {
      if (hits[o].category != EntityCategory::Observation) continue;
      const int gap = hits[o].begin - hits[a].end;
      if (gap > 0 && gap <= rs.relation_window) {
        g.relations.push_back({static_cast<int>(o), static_cast<int>(a),
                               RelationLabel::LocatedAt});
      }
    }
  }
  return g;
}

namespace detail {

using EntityKey = std::pair<std::string, int>;
using RelationKey = std::tuple<std::string, int, std::string, int, int>;

inline double multiset_f1(std::size_t pred_total, std::size_t truth_total, std::size_t matched) {
  if (pred_total == 0 && truth_total == 0) return 1.0;
  if (pred_total == 0 || truth_total == 0) return 0.0;
  const double p = static_cast<double>(matched) / static_cast<double>(pred_total);
  const double r = static_cast<double>(matched) / static_cast<double>(truth_total);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

template <typename Key>
std::size_t multiset_overlap(const std::map<Key, std::size_t>& a,
                             const std::map<Key, std::size_t>& b) {
  std::size_t total = 0;
  for (const auto& [key, count] : a) {
    auto it = b.find(key);
    if (it != b.end()) total += std::min(count, it->second);
  }
  return total;
}

inline std::map<EntityKey, std::size_t> entity_counts(const ReportGraph& g) {
  std::map<EntityKey, std::size_t> counts;
  for (const auto& e : g.entities) counts[{e.text, static_cast<int>(e.category)}]++;
  return counts;
}

inline std::map<RelationKey, std::size_t> relation_counts(const ReportGraph& g) {
  std::map<RelationKey, std::size_t> counts;
  for (const auto& r : g.relations) {
    const Entity* s = g.find(r.src);
    const Entity* d = g.find(r.dst);
    if (!s || !d) throw std::invalid_argument("graph relation references a missing entity id");
    counts[{s->text, static_cast<int>(s->category), d->text, static_cast<int>(d->category),
            static_cast<int>(r.label)}]++;
  }
  return counts;
}

}  // namespace detail

// Mean of the entity F1 (multiset match on text + category) and the relation
// F1 (match on endpoint text + category and the relation label). Empty versus
// empty scores 1, empty versus non-empty scores 0, per sub-score.
inline double graph_f1(const ReportGraph& pred, const ReportGraph& truth) {
  const auto pe = detail::entity_counts(pred);
  const auto te = detail::entity_counts(truth);
  const double entity_f1 =
      detail::multiset_f1(pred.entities.size(), truth.entities.size(),
                          detail::multiset_overlap(pe, te));
  const auto pr = detail::relation_counts(pred);
  const auto tr = detail::relation_counts(truth);
  const double relation_f1 =
      detail::multiset_f1(pred.relations.size(), truth.relations.size(),
                          detail::multiset_overlap(pr, tr));
  return 0.5 * (entity_f1 + relation_f1);
}

// ---------------------------------------------------------------------------
// Laterality restriction

inline const std::vector<std::string>& default_laterality_seeds() {
  static const std::vector<std::string> seeds = {"left", "right", "left lung", "right lung"};
  return seeds;
}

// Subgraph around entities whose text is exactly a seed. One hop keeps the
// seeds, every entity sharing a relation with a seed, and the relations that
// touch a seed. The transitive variant follows relations to the full
// connected component instead.
inline ReportGraph laterality_subgraph(const ReportGraph& graph,
                                       const std::vector<std::string>& seeds =
                                           default_laterality_seeds(),
                                       bool transitive = false) {
  std::set<int> keep;
  for (const auto& e : graph.entities) {
    for (const auto& s : seeds) {
      if (e.text == s) {
        keep.insert(e.id);
        break;
      }
    }
  }
  std::set<int> kept_entities = keep;
  if (transitive) {
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& r : graph.relations) {
        const bool s_in = kept_entities.count(r.src) != 0;
        const bool d_in = kept_entities.count(r.dst) != 0;
        if (s_in != d_in) {
          kept_entities.insert(s_in ? r.dst : r.src);
          grew = true;
        }
      }
    }
  } else {
    for (const auto& r : graph.relations) {
      if (keep.count(r.src) != 0) kept_entities.insert(r.dst);
      if (keep.count(r.dst) != 0) kept_entities.insert(r.src);
    }
  }
  ReportGraph out;
  for (const auto& e : graph.entities) {
    if (kept_entities.count(e.id) != 0) out.entities.push_back(e);
  }
  for (const auto& r : graph.relations) {
    const bool touches_seed = transitive
                                  ? (kept_entities.count(r.src) != 0 &&
                                     kept_entities.count(r.dst) != 0)
                                  : (keep.count(r.src) != 0 || keep.count(r.dst) != 0);
    if (touches_seed) out.relations.push_back(r);
  }
  return out;
}

inline double laterality_f1(const ReportGraph& pred, const ReportGraph& truth,
                            const std::vector<std::string>& seeds = default_laterality_seeds(),
                            bool transitive = false) {
  return graph_f1(laterality_subgraph(pred, seeds, transitive),
                  laterality_subgraph(truth, seeds, transitive));
}

// ---------------------------------------------------------------------------
// Combined reward

struct RewardBreakdown {
  double rouge_l = 0.0;
  double label_acc = 0.0;
  double graph_f1 = 0.0;
  double total = 0.0;
};

// Unweighted sum of the three components; ROUGE-L runs over the concatenated
// findings + impression token stream.
inline RewardBreakdown combined_reward(const Report& final_report, const Report& truth_report,
                                       const LabelVector& truth_labels,
                                       const ReportGraph& truth_graph, const Vocab& vocab,
                                       const RuleSet& rs, double rouge_beta = 1.0) {
  RewardBreakdown rb;
  const auto cand = report_content_ids(final_report, vocab);
  const auto ref = report_content_ids(truth_report, vocab);
  rb.rouge_l = rouge_l(std::span<const int>(cand), std::span<const int>(ref), rouge_beta);
  rb.label_acc = label_accuracy(toy_labeler(final_report, vocab, rs), truth_labels);
  rb.graph_f1 = graph_f1(toy_graph_extract(final_report, vocab, rs), truth_graph);
  rb.total = rb.rouge_l + rb.label_acc + rb.graph_f1;
  return rb;
}

// ---------------------------------------------------------------------------
// Graph serialization

inline nlohmann::json graph_to_json(const ReportGraph& g) {
  nlohmann::json entities = nlohmann::json::array();
  for (const auto& e : g.entities) {
    entities.push_back({{"id", e.id}, {"text", e.text}, {"category", to_string(e.category)}});
  }
  nlohmann::json relations = nlohmann::json::array();
  for (const auto& r : g.relations) {
    relations.push_back({{"src", r.src}, {"dst", r.dst}, {"label", to_string(r.label)}});
  }
  return {{"entities", entities}, {"relations", relations}};
}

inline ReportGraph graph_from_json(const nlohmann::json& j) {
  ReportGraph g;
  for (const auto& e : j.at("entities")) {
    Entity entity;
    entity.id = e.at("id").get<int>();
    entity.text = e.at("text").get<std::string>();
    const auto cat = e.at("category").get<std::string>();
    if (cat == "Anatomy") {
      entity.category = EntityCategory::Anatomy;
    } else if (cat == "Observation") {
      entity.category = EntityCategory::Observation;
    } else {
      throw std::runtime_error("unknown entity category: " + cat);
    }
    g.entities.push_back(std::move(entity));
  }
  for (const auto& r : j.at("relations")) {
    Relation rel;
    rel.src = r.at("src").get<int>();
    rel.dst = r.at("dst").get<int>();
    const auto label = r.at("label").get<std::string>();
    if (label == "located_at") {
      rel.label = RelationLabel::LocatedAt;
    } else if (label == "modify") {
      rel.label = RelationLabel::Modify;
    } else if (label == "suggestive_of") {
      rel.label = RelationLabel::SuggestiveOf;
    } else {
      throw std::runtime_error("unknown relation label: " + label);
    }
    g.relations.push_back(rel);
  }
  g.validate();
  return g;
}

}  // namespace magspo
