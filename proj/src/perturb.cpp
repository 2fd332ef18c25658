#include "perturblm/perturb.hpp"

#include <stdexcept>

namespace perturblm {

SynonymTable::SynonymTable(std::vector<std::vector<TokenId>> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) set(static_cast<TokenId>(i), std::move(entries_[i]));
}

std::span<const TokenId> SynonymTable::of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) return {};
  return entries_[static_cast<std::size_t>(id)];
}

void SynonymTable::set(TokenId id, std::vector<TokenId> synonyms) {
  if (id < 0) throw std::invalid_argument("SynonymTable: negative token id");
  std::sort(synonyms.begin(), synonyms.end());
  synonyms.erase(std::unique(synonyms.begin(), synonyms.end()), synonyms.end());
  for (TokenId s : synonyms) {
    if (s < 0) throw std::invalid_argument("SynonymTable: negative synonym id");
    if (s == id) {
      throw std::invalid_argument("SynonymTable: token " + std::to_string(id) + " listed as its own synonym");
    }
  }
  if (static_cast<std::size_t>(id) >= entries_.size()) entries_.resize(static_cast<std::size_t>(id) + 1);
  entries_[static_cast<std::size_t>(id)] = std::move(synonyms);
}

std::string to_string(PerturbKind kind) {
  switch (kind) {
    case PerturbKind::Identity: return "identity";
    case PerturbKind::Insertion: return "insertion";
    case PerturbKind::Replacement: return "replacement";
    case PerturbKind::Deletion: return "deletion";
    case PerturbKind::BigramSynonym: return "bigram";
  }
  return "unknown";
}

PerturbKind perturb_kind_from_string(const std::string& name) {
  if (name == "identity") return PerturbKind::Identity;
  if (name == "insertion" || name == "insert") return PerturbKind::Insertion;
  if (name == "replacement" || name == "replace") return PerturbKind::Replacement;
  if (name == "deletion" || name == "delete") return PerturbKind::Deletion;
  if (name == "bigram" || name == "bigram_synonym") return PerturbKind::BigramSynonym;
  throw std::invalid_argument("unknown perturbation kind '" + name + "'");
}

PerturbSpec PerturbSpec::insertion(double alpha, SynonymTable syn, std::optional<TokenId> eos) {
  PerturbSpec s;
  s.kind = PerturbKind::Insertion;
  s.intensity = alpha;
  s.synonyms = std::move(syn);
  s.eos_id = eos;
  return s;
}

PerturbSpec PerturbSpec::replacement(double beta, SynonymTable syn) {
  PerturbSpec s;
  s.kind = PerturbKind::Replacement;
  s.intensity = beta;
  s.synonyms = std::move(syn);
  return s;
}

PerturbSpec PerturbSpec::deletion(double alpha) {
  PerturbSpec s;
  s.kind = PerturbKind::Deletion;
  s.intensity = alpha;
  return s;
}

PerturbSpec PerturbSpec::bigram(double alpha, std::shared_ptr<const TransitionMatrix> ref) {
  PerturbSpec s;
  s.kind = PerturbKind::BigramSynonym;
  s.intensity = alpha;
  s.ref_matrix = std::move(ref);
  return s;
}

void PerturbSpec::validate() const {
  if (!(intensity >= 0.0 && intensity <= 1.0))
    throw std::invalid_argument("PerturbSpec: intensity must lie in [0, 1]");
  if (kind == PerturbKind::BigramSynonym && !ref_matrix)
    throw std::invalid_argument("PerturbSpec: bigram perturbation requires a reference matrix");
}

WeightedCandidates bigram_synonym_sets(const TransitionMatrix& m, const TokenSeq& x, std::size_t t) {
  if (t == 0 || t + 1 >= x.size())
    throw std::invalid_argument("bigram_synonym_sets: position needs both neighbours");
  const int v = m.size();
  const double threshold = 2.0 / v;
  const TokenId prev = x[t - 1];
  const TokenId next = x[t + 1];
  const auto& mat = m.matrix();
  WeightedCandidates out;
  double total = 0.0;
  for (TokenId c = 0; c < v; ++c) {
    const double w = mat(prev, c);
    if (w > threshold && mat(c, next) > threshold) {
      out.tokens.push_back(c);
      out.weights.push_back(w);
      total += w;
    }
  }
  for (double& w : out.weights) w /= total;
  return out;
}

}  // namespace perturblm
