// Perturbation kernels T(.|X) on token sequences.
//
// Every kernel is written once against a `Chooser` (anything that can make
// uniform, Bernoulli and weighted choices). RandomSource is the sampling
// chooser; theory.hpp supplies an enumerating chooser that walks the full
// decision tree to recover the exact output law of the same code.
#pragma once

#include "perturblm/core.hpp"

#include <algorithm>
#include <concepts>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace perturblm {

/// Per-token synonym sets S_i, with i never a member of S_i.
class SynonymTable {
 public:
  SynonymTable() = default;
  explicit SynonymTable(int vocab_size) : entries_(static_cast<std::size_t>(vocab_size)) {}
  explicit SynonymTable(std::vector<std::vector<TokenId>> entries);

  int vocab_size() const { return static_cast<int>(entries_.size()); }
  /// Empty for ids beyond the table.
  std::span<const TokenId> of(TokenId id) const;
  void set(TokenId id, std::vector<TokenId> synonyms);

  const std::vector<std::vector<TokenId>>& entries() const { return entries_; }

 private:
  std::vector<std::vector<TokenId>> entries_;
};

enum class PerturbKind { Identity, Insertion, Replacement, Deletion, BigramSynonym };

std::string to_string(PerturbKind kind);
PerturbKind perturb_kind_from_string(const std::string& name);

struct PerturbSpec {
  PerturbKind kind = PerturbKind::Identity;
  /// alpha for Insertion/Deletion/BigramSynonym, beta for Replacement.
  double intensity = 0.0;
  SynonymTable synonyms;
  /// Reference probabilities for BigramSynonym candidate sets.
  std::shared_ptr<const TransitionMatrix> ref_matrix;
  /// Insertions never land after this token.
  std::optional<TokenId> eos_id;

  static PerturbSpec identity() { return {}; }
  static PerturbSpec insertion(double alpha, SynonymTable syn, std::optional<TokenId> eos = std::nullopt);
  static PerturbSpec replacement(double beta, SynonymTable syn);
  static PerturbSpec deletion(double alpha);
  static PerturbSpec bigram(double alpha, std::shared_ptr<const TransitionMatrix> ref);

  /// Throws std::invalid_argument if the intensity or required fields are bad.
  void validate() const;
};

/// Counters accumulated while perturbing.
struct PerturbStats {
  long perturbed_positions = 0;
  long empty_candidate_skips = 0;
  long positions_seen = 0;

  PerturbStats& operator+=(const PerturbStats& o) {
    perturbed_positions += o.perturbed_positions;
    empty_candidate_skips += o.empty_candidate_skips;
    positions_seen += o.positions_seen;
    return *this;
  }
};

template <typename C>
concept Chooser = requires(C& c, std::size_t n, double p, std::span<const double> w) {
  { c.uniform_index(n) } -> std::convertible_to<std::size_t>;
  { c.bernoulli(p) } -> std::convertible_to<bool>;
  { c.categorical(w) } -> std::convertible_to<std::size_t>;
};

/// Candidate replacements for interior position `t` (0-based) under the
/// bigram rule: tokens v with M(x[t-1], v) > 2/|V| and M(v, x[t+1]) > 2/|V|,
/// weighted proportionally to M(x[t-1], v).
struct WeightedCandidates {
  std::vector<TokenId> tokens;
  std::vector<double> weights;
  bool empty() const { return tokens.empty(); }
};

WeightedCandidates bigram_synonym_sets(const TransitionMatrix& m, const TokenSeq& x, std::size_t t);

/// round(fraction * n), clamped to [0, n].
inline std::size_t selection_count(double fraction, std::size_t n) {
  const auto k = static_cast<long>(std::lround(fraction * static_cast<double>(n)));
  return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(n)));
}

namespace detail {

/// k distinct indices from [0, n), uniformly, returned in ascending order.
template <Chooser C>
std::vector<std::size_t> choose_without_replacement(std::size_t n, std::size_t k, C& chooser) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + chooser.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

template <Chooser C>
TokenSeq perturb_insert(const TokenSeq& x, const PerturbSpec& spec, C& chooser, PerturbStats* stats = nullptr) {
  const auto selected = detail::choose_without_replacement(x.size(), selection_count(spec.intensity, x.size()), chooser);
  std::vector<TokenId> drawn;
  for (std::size_t pos : selected) {
    const auto syn = spec.synonyms.of(x[pos]);
    if (syn.empty()) continue;
    drawn.push_back(syn[chooser.uniform_index(syn.size())]);
  }
  TokenSeq out = x;
  for (TokenId s : drawn) {
    std::size_t limit = out.size();
    if (spec.eos_id) {
      const auto it = std::find(out.begin(), out.end(), *spec.eos_id);
      limit = static_cast<std::size_t>(it - out.begin());
    }
    const std::size_t at = chooser.uniform_index(limit + 1);
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), s);
  }
  if (stats) {
    stats->positions_seen += static_cast<long>(x.size());
    stats->perturbed_positions += static_cast<long>(drawn.size());
  }
  return out;
}

template <Chooser C>
TokenSeq perturb_replace(const TokenSeq& x, const PerturbSpec& spec, C& chooser, PerturbStats* stats = nullptr) {
  TokenSeq out;
  out.reserve(x.size());
  long changed = 0;
  for (TokenId tok : x) {
    if (!chooser.bernoulli(spec.intensity)) {
      out.push_back(tok);
      continue;
    }
    ++changed;
    const auto syn = spec.synonyms.of(tok);
    // An empty synonym set draws the null token, i.e. deletes.
    if (!syn.empty()) out.push_back(syn[chooser.uniform_index(syn.size())]);
  }
  if (stats) {
    stats->positions_seen += static_cast<long>(x.size());
    stats->perturbed_positions += changed;
  }
  return out;
}

template <Chooser C>
TokenSeq perturb_delete(const TokenSeq& x, const PerturbSpec& spec, C& chooser, PerturbStats* stats = nullptr) {
  const auto removed = detail::choose_without_replacement(x.size(), selection_count(spec.intensity, x.size()), chooser);
  TokenSeq out;
  out.reserve(x.size() - removed.size());
  std::size_t r = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (r < removed.size() && removed[r] == i) {
      ++r;
      continue;
    }
    out.push_back(x[i]);
  }
  if (stats) {
    stats->positions_seen += static_cast<long>(x.size());
    stats->perturbed_positions += static_cast<long>(removed.size());
  }
  return out;
}

/// Interior positions only; boundary tokens are never touched and an empty
/// candidate set keeps the original token.
template <Chooser C>
TokenSeq perturb_bigram(const TokenSeq& x, const PerturbSpec& spec, C& chooser, PerturbStats* stats = nullptr) {
  TokenSeq out = x;
  if (x.size() < 3) return out;
  for (std::size_t t = 1; t + 1 < x.size(); ++t) {
    if (stats) ++stats->positions_seen;
    if (!chooser.bernoulli(spec.intensity)) continue;
    const auto cand = bigram_synonym_sets(*spec.ref_matrix, x, t);
    if (cand.empty()) {
      if (stats) ++stats->empty_candidate_skips;
      continue;
    }
    out[t] = cand.tokens[chooser.categorical(cand.weights)];
    if (stats) ++stats->perturbed_positions;
  }
  return out;
}

template <Chooser C>
TokenSeq perturb(const TokenSeq& x, const PerturbSpec& spec, C& chooser, PerturbStats* stats = nullptr) {
  switch (spec.kind) {
    case PerturbKind::Identity:
      if (stats) stats->positions_seen += static_cast<long>(x.size());
      return x;
    case PerturbKind::Insertion:
      return perturb_insert(x, spec, chooser, stats);
    case PerturbKind::Replacement:
      return perturb_replace(x, spec, chooser, stats);
    case PerturbKind::Deletion:
      return perturb_delete(x, spec, chooser, stats);
    case PerturbKind::BigramSynonym:
      return perturb_bigram(x, spec, chooser, stats);
  }
  throw std::logic_error("perturb: unknown kind");
}

}  // namespace perturblm
