#pragma once

// Word-level tokenization over a closed vocabulary and the two-section
// (Findings / Impression) report representation used throughout.

#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace magspo {

inline constexpr char kEosToken[] = "<eos>";
inline constexpr char kFindingsHeader[] = "### Findings";
inline constexpr char kImpressionHeader[] = "### Impression";

class Vocab {
 public:
  Vocab(std::vector<std::string> tokens, int eos_id, int max_len)
      : tokens_(std::move(tokens)), eos_id_(eos_id), max_len_(max_len) {
    if (tokens_.empty()) throw std::invalid_argument("vocab: empty token list");
    if (eos_id_ < 0 || eos_id_ >= static_cast<int>(tokens_.size()))
      throw std::invalid_argument("vocab: eos_id out of range");
    if (max_len_ < 1) throw std::invalid_argument("vocab: max_len must be >= 1");
    for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
      const auto& t = tokens_[i];
      if (t.empty()) throw std::invalid_argument("vocab: empty token string");
      if (!index_.emplace(t, i).second)
        throw std::invalid_argument("vocab: duplicate token '" + t + "'");
    }
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int eos_id() const { return eos_id_; }
  int max_len() const { return max_len_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool contains(const std::string& word) const { return index_.count(word) != 0; }

  int id_of(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end())
      throw std::runtime_error("unknown word '" + word + "' not in vocabulary");
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  int eos_id_;
  int max_len_;
  std::unordered_map<std::string, int> index_;
};

// One token per line, line number = token index; first line is "<eos>".
inline void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open vocab file for writing: " + path);
  for (const auto& t : vocab.tokens()) out << t << "\n";
}

inline Vocab load_vocab(const std::string& path, int max_len) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocab file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    tokens.push_back(line);
  }
  if (tokens.empty() || tokens.front() != kEosToken)
    throw std::runtime_error("vocab file must reserve the first line for " +
                             std::string(kEosToken) + ": " + path);
  return Vocab(std::move(tokens), 0, max_len);
}

struct TokenSequence {
  std::vector<int> ids;
  bool terminated = false;

  int length() const { return static_cast<int>(ids.size()); }

  // Content excludes the trailing eos, if present.
  std::span<const int> content(const Vocab& vocab) const {
    if (!ids.empty() && ids.back() == vocab.eos_id())
      return std::span<const int>(ids.data(), ids.size() - 1);
    return std::span<const int>(ids.data(), ids.size());
  }

  bool operator==(const TokenSequence&) const = default;
};

struct Report {
  TokenSequence findings;
  TokenSequence impression;
  bool malformed = false;

  bool operator==(const Report&) const = default;
};

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream iss(text);
  std::string w;
  while (iss >> w) words.push_back(w);
  return words;
}

inline TokenSequence tokenize(const std::string& text, const Vocab& vocab) {
  TokenSequence seq;
  for (const auto& w : split_words(text)) seq.ids.push_back(vocab.id_of(w));
  seq.ids.push_back(vocab.eos_id());
  if (seq.length() > vocab.max_len()) {
    seq.ids.resize(static_cast<std::size_t>(vocab.max_len()));
  }
  seq.terminated = true;
  return seq;
}

inline std::string detokenize(const TokenSequence& seq, const Vocab& vocab) {
  std::string out;
  for (int id : seq.ids) {
    if (id == vocab.eos_id()) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

namespace detail {

// Index of the header word pair ("###", name) in the word stream, or npos.
inline std::size_t find_header(const std::vector<std::string>& words, const std::string& name,
                               std::size_t from) {
  for (std::size_t i = from; i + 1 < words.size(); ++i) {
    if (words[i] == "###" && words[i + 1] == name) return i;
  }
  return static_cast<std::size_t>(-1);
}

inline TokenSequence tokenize_words(const std::vector<std::string>& words, std::size_t begin,
                                    std::size_t end, const Vocab& vocab) {
  std::string joined;
  for (std::size_t i = begin; i < end; ++i) {
    if (!joined.empty()) joined += ' ';
    joined += words[i];
  }
  return tokenize(joined, vocab);
}

}  // namespace detail

// Splits a report around the "### Findings" / "### Impression" headers.
// Headers are matched on the word stream, so both multi-line renderings and
// single-line agent emissions parse identically.
inline Report split_report(const std::string& text, const Vocab& vocab) {
  const auto words = split_words(text);
  constexpr auto npos = static_cast<std::size_t>(-1);
  const std::size_t f = detail::find_header(words, "Findings", 0);
  if (f == npos)
    throw std::runtime_error(std::string("missing report header: ") + kFindingsHeader);
  const std::size_t imp = detail::find_header(words, "Impression", f + 2);
  if (imp == npos)
    throw std::runtime_error(std::string("missing report header: ") + kImpressionHeader);
  Report report;
  report.findings = detail::tokenize_words(words, f + 2, imp, vocab);
  report.impression = detail::tokenize_words(words, imp + 2, words.size(), vocab);
  return report;
}

// Content ids of findings followed by impression; the stream rewards and
// rule extractors operate on.
inline std::vector<int> report_content_ids(const Report& report, const Vocab& vocab) {
  std::vector<int> ids;
  auto f = report.findings.content(vocab);
  auto i = report.impression.content(vocab);
  ids.insert(ids.end(), f.begin(), f.end());
  ids.insert(ids.end(), i.begin(), i.end());
  return ids;
}

inline std::vector<std::string> report_content_words(const Report& report, const Vocab& vocab) {
  std::vector<std::string> words;
  for (int id : report_content_ids(report, vocab)) words.push_back(vocab.token(id));
  return words;
}

}  // namespace magspo
