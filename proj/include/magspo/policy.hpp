#pragma once

// Log-linear autoregressive token policy. Logits are a sparse feature vector
// (token window, position bucket, query features and their crosses) dotted
// with a dense weight matrix, divided by temperature and soft-maxed. The
// family is small enough that sequence log-likelihoods and their gradients
// are exact, which is what makes the surrogate-objective math testable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "magspo/rng.hpp"
#include "magspo/textcore.hpp"

namespace magspo {

struct FeatureMapConfig {
  int vocab_size = 0;
  int window = 4;          // tokens of context visible per step
  int pos_buckets = 8;     // one-hot position buckets, 0 disables
  int pos_stride = 8;      // generated positions per bucket
  int query_dim = 0;       // raw query features, 0 disables
  bool query_pos_crosses = true;
};

// Deterministic sparse feature extractor. Feature layout, in order:
//   [window one-hots: window*V] [position one-hot: pos_buckets] [bias: 1]
//   [query raw: query_dim] [query x position bucket: pos_buckets*query_dim]
// All feature values lie in [-1, 1].
class FeatureMap {
 public:
  explicit FeatureMap(const FeatureMapConfig& cfg) : cfg_(cfg) {
    if (cfg.vocab_size < 1) throw std::invalid_argument("feature map: vocab_size must be >= 1");
    if (cfg.window < 0 || cfg.pos_buckets < 0 || cfg.query_dim < 0)
      throw std::invalid_argument("feature map: negative dimension");
    if (cfg.pos_buckets > 0 && cfg.pos_stride < 1)
      throw std::invalid_argument("feature map: pos_stride must be >= 1");
  }

  const FeatureMapConfig& config() const { return cfg_; }
  int vocab_size() const { return cfg_.vocab_size; }

  int feature_dim() const {
    int f = cfg_.window * cfg_.vocab_size + cfg_.pos_buckets + 1 + cfg_.query_dim;
    if (cfg_.query_pos_crosses && cfg_.pos_buckets > 0) f += cfg_.pos_buckets * cfg_.query_dim;
    return f;
  }

  // Active (feature index, value) pairs for generating the token at
  // `position` given the stream prompt ++ generated.
  void active_features(std::span<const int> prompt, std::span<const int> generated,
                       std::span<const double> query, int position,
                       std::vector<std::pair<int, double>>& out) const {
    out.clear();
    const int V = cfg_.vocab_size;
    const int g = static_cast<int>(generated.size());
    const int p = static_cast<int>(prompt.size());
    for (int j = 1; j <= cfg_.window; ++j) {
      int token;
      if (j <= g) {
        token = generated[static_cast<std::size_t>(g - j)];
      } else if (j - g <= p) {
        token = prompt[static_cast<std::size_t>(p - (j - g))];
      } else {
        continue;  // stream shorter than the window
      }
      out.emplace_back((j - 1) * V + token, 1.0);
    }
    int base = cfg_.window * V;
    int bucket = 0;
    if (cfg_.pos_buckets > 0) {
      bucket = std::min(position / cfg_.pos_stride, cfg_.pos_buckets - 1);
      out.emplace_back(base + bucket, 1.0);
    }
    base += cfg_.pos_buckets;
    out.emplace_back(base, 1.0);  // bias
    base += 1;
    const int D = std::min<int>(cfg_.query_dim, static_cast<int>(query.size()));
    for (int d = 0; d < D; ++d) {
      out.emplace_back(base + d, std::clamp(query[static_cast<std::size_t>(d)], -1.0, 1.0));
    }
    base += cfg_.query_dim;
    if (cfg_.query_pos_crosses && cfg_.pos_buckets > 0) {
      for (int d = 0; d < D; ++d) {
        out.emplace_back(base + bucket * cfg_.query_dim + d,
                         std::clamp(query[static_cast<std::size_t>(d)], -1.0, 1.0));
      }
    }
  }

 private:
  FeatureMapConfig cfg_;
};

// What the policy sees when generating one agent slot's output.
struct AgentContext {
  std::vector<int> prompt_ids;
  std::vector<double> query_features;
  int eos_id = 0;
  int max_len = 1;

  bool operator==(const AgentContext&) const = default;
};

// Dense weight matrix, row-major by feature: weights[f * V + v].
struct PolicyParameters {
  FeatureMap feature_map;
  std::vector<double> weights;

  explicit PolicyParameters(const FeatureMap& fmap)
      : feature_map(fmap),
        weights(static_cast<std::size_t>(fmap.feature_dim()) *
                    static_cast<std::size_t>(fmap.vocab_size()),
                0.0) {}

  std::size_t dim() const { return weights.size(); }
};

// Frozen copy of the parameters taken before a round of rollouts.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const PolicyParameters& source) : params_(source) {}
  const PolicyParameters& params() const { return params_; }

 private:
  PolicyParameters params_;
};

namespace detail {

inline void compute_logits(const PolicyParameters& params, const AgentContext& ctx,
                           std::span<const int> generated, double temperature,
                           std::vector<std::pair<int, double>>& feat_buf,
                           std::span<double> logits) {
  const int V = params.feature_map.vocab_size();
  params.feature_map.active_features(ctx.prompt_ids, generated, ctx.query_features,
                                     static_cast<int>(generated.size()), feat_buf);
  std::fill(logits.begin(), logits.end(), 0.0);
  const double* w = params.weights.data();
  for (const auto& [f, val] : feat_buf) {
    const double* row = w + static_cast<std::size_t>(f) * static_cast<std::size_t>(V);
    for (int v = 0; v < V; ++v) logits[static_cast<std::size_t>(v)] += val * row[v];
  }
  const double inv_t = 1.0 / temperature;
  for (int v = 0; v < V; ++v) {
    logits[static_cast<std::size_t>(v)] *= inv_t;
    if (!std::isfinite(logits[static_cast<std::size_t>(v)]))
      throw std::runtime_error("non-finite logit: policy diverged");
  }
}

// In place logits -> probabilities; returns log of the normalizer offset so
// that log prob of token v is logits_in[v]/... callers use the returned pair.
inline double softmax_in_place(std::span<double> z) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : z) m = std::max(m, v);
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return m + std::log(sum);  // log-sum-exp, for log-prob computation
}

}  // namespace detail

inline std::vector<double> token_distribution(const PolicyParameters& params,
                                              const AgentContext& ctx,
                                              const TokenSequence& prefix, double temperature) {
  const int V = params.feature_map.vocab_size();
  std::vector<double> probs(static_cast<std::size_t>(V));
  std::vector<std::pair<int, double>> feats;
  detail::compute_logits(params, ctx, prefix.ids, temperature, feats, probs);
  detail::softmax_in_place(probs);
  return probs;
}

struct SampleResult {
  TokenSequence seq;
  std::vector<double> token_logprobs;
  double logprob_sum = 0.0;
};

namespace detail {

template <typename PickToken>
SampleResult generate_sequence(const PolicyParameters& params, const AgentContext& ctx,
                               double temperature, PickToken pick) {
  const int V = params.feature_map.vocab_size();
  SampleResult result;
  std::vector<double> z(static_cast<std::size_t>(V));
  std::vector<std::pair<int, double>> feats;
  while (static_cast<int>(result.seq.ids.size()) < ctx.max_len) {
    compute_logits(params, ctx, result.seq.ids, temperature, feats, z);
    const double lse = softmax_in_place(z);
    (void)lse;
    const int tok = pick(std::span<const double>(z));
    const double lp = std::log(z[static_cast<std::size_t>(tok)]);
    result.seq.ids.push_back(tok);
    result.token_logprobs.push_back(lp);
    result.logprob_sum += lp;
    if (tok == ctx.eos_id) break;
  }
  result.seq.terminated = true;
  return result;
}

}  // namespace detail

// Ancestral sampling, deterministic given the seed (inverse-CDF walk on an
// explicit uniform; no implementation-defined std distributions).
inline SampleResult sample_sequence(const PolicySnapshot& snapshot, const AgentContext& ctx,
                                    double temperature, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return detail::generate_sequence(snapshot.params(), ctx, temperature,
                                   [&rng](std::span<const double> probs) {
                                     const double u = rng.next_unit();
                                     double acc = 0.0;
                                     int last = static_cast<int>(probs.size()) - 1;
                                     for (int v = 0; v < last; ++v) {
                                       acc += probs[static_cast<std::size_t>(v)];
                                       if (u < acc) return v;
                                     }
                                     return last;
                                   });
}

// Greedy argmax decoding; ties resolve to the lowest token index.
inline SampleResult greedy_sequence(const PolicyParameters& params, const AgentContext& ctx,
                                    double temperature) {
  return detail::generate_sequence(params, ctx, temperature,
                                   [](std::span<const double> probs) {
                                     int best = 0;
                                     for (int v = 1; v < static_cast<int>(probs.size()); ++v) {
                                       if (probs[static_cast<std::size_t>(v)] >
                                           probs[static_cast<std::size_t>(best)])
                                         best = v;
                                     }
                                     return best;
                                   });
}

inline double sequence_logprob(const PolicyParameters& params, const AgentContext& ctx,
                               const TokenSequence& seq, double temperature) {
  const int V = params.feature_map.vocab_size();
  std::vector<double> z(static_cast<std::size_t>(V));
  std::vector<std::pair<int, double>> feats;
  double total = 0.0;
  for (std::size_t t = 0; t < seq.ids.size(); ++t) {
    detail::compute_logits(params, ctx, std::span<const int>(seq.ids.data(), t), temperature,
                           feats, z);
    const double lse = detail::softmax_in_place(z);
    (void)lse;
    total += std::log(z[static_cast<std::size_t>(seq.ids[t])]);
  }
  return total;
}

// acc += scale * d(log pi(seq | ctx))/d(weights). The score of the log-linear
// family: sum_t phi(c, t) (1[v = x_t] - pi_t(v)) / temperature.
inline void add_scaled_grad_sequence_logprob(const PolicyParameters& params,
                                             const AgentContext& ctx, const TokenSequence& seq,
                                             double temperature, double scale,
                                             std::span<double> acc) {
  const int V = params.feature_map.vocab_size();
  if (acc.size() != params.dim())
    throw std::invalid_argument("gradient accumulator has wrong dimension");
  std::vector<double> pi(static_cast<std::size_t>(V));
  std::vector<std::pair<int, double>> feats;
  const double inv_t = 1.0 / temperature;
  for (std::size_t t = 0; t < seq.ids.size(); ++t) {
    detail::compute_logits(params, ctx, std::span<const int>(seq.ids.data(), t), temperature,
                           feats, pi);
    detail::softmax_in_place(pi);
    const int realized = seq.ids[t];
    for (const auto& [f, val] : feats) {
      double* row = acc.data() + static_cast<std::size_t>(f) * static_cast<std::size_t>(V);
      const double c = scale * val * inv_t;
      for (int v = 0; v < V; ++v) row[v] -= c * pi[static_cast<std::size_t>(v)];
      row[realized] += c;
    }
  }
}

inline std::vector<double> grad_sequence_logprob(const PolicyParameters& params,
                                                 const AgentContext& ctx,
                                                 const TokenSequence& seq, double temperature) {
  std::vector<double> grad(params.dim(), 0.0);
  add_scaled_grad_sequence_logprob(params, ctx, seq, temperature, 1.0, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Checkpoint format: header "magspo-policy v1 F=<F> V=<V>\n" followed by the
// weights as little-endian 64-bit floats. Round-trips bit-exactly.

inline void save_policy(const PolicyParameters& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  const int F = params.feature_map.feature_dim();
  const int V = params.feature_map.vocab_size();
  out << "magspo-policy v1 F=" << F << " V=" << V << "\n";
  for (double w : params.weights) {
    std::uint64_t bits;
    std::memcpy(&bits, &w, sizeof bits);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline PolicyParameters load_policy(const std::string& path, const FeatureMap& fmap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string header;
  std::getline(in, header);
  int F = -1, V = -1;
  {
    std::istringstream hs(header);
    std::string magic, version, ftok, vtok;
    hs >> magic >> version >> ftok >> vtok;
    if (magic != "magspo-policy" || version != "v1" || ftok.rfind("F=", 0) != 0 ||
        vtok.rfind("V=", 0) != 0)
      throw std::runtime_error("bad checkpoint header: " + path);
    F = std::stoi(ftok.substr(2));
    V = std::stoi(vtok.substr(2));
  }
  if (F != fmap.feature_dim() || V != fmap.vocab_size())
    throw std::runtime_error("checkpoint shape F=" + std::to_string(F) + " V=" +
                             std::to_string(V) + " does not match the feature map: " + path);
  PolicyParameters params(fmap);
  for (double& w : params.weights) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    std::memcpy(&w, &bits, sizeof w);
  }
  return params;
}

}  // namespace magspo
