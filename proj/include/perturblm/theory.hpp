// Brute-force checks of the extrapolation theory on small, fully enumerable
// sequence spaces: exact perturbation laws, the robustness constants eta_T and
// rho_T, the synonym-replacement bound, and the partition mechanism that
// makes perturbed models agree off the training support.
#pragma once

#include "perturblm/core.hpp"
#include "perturblm/model.hpp"
#include "perturblm/perturb.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace perturblm {

/// Exact finite law over output sequences.
using ExactPerturbDist = std::map<TokenSeq, double>;
/// X -> T(.|X).
using PerturbKernel = std::function<ExactPerturbDist(const TokenSeq&)>;
/// A base model: prefix -> next-token distribution.
using ConditionalModel = std::function<CategoricalDist(const TokenSeq&)>;

inline constexpr long kEnumerationCap = 1'000'000;

/// All length-L sequences over a vocabulary, plus a training support inside it.
class SequenceSpace {
 public:
  SequenceSpace(int vocab_size, int length, std::vector<TokenSeq> support, long cap = kEnumerationCap);

  int vocab_size() const { return vocab_size_; }
  int length() const { return length_; }
  long cardinality() const { return cardinality_; }
  long cap() const { return cap_; }
  const std::vector<TokenSeq>& support() const { return support_; }

  TokenSeq at(long index) const;
  long index_of(const TokenSeq& seq) const;
  bool contains(const TokenSeq& seq) const;
  bool in_support(const TokenSeq& seq) const;
  /// Hamming distance to the nearest support member.
  int distance_to_support(const TokenSeq& seq) const;
  /// Every X' in the space with distance_to_support(X') <= delta.
  std::vector<TokenSeq> within(int delta) const;

 private:
  int vocab_size_;
  int length_;
  long cap_;
  long cardinality_;
  std::vector<TokenSeq> support_;
};

/// Decision-tree chooser: replays a fixed prefix of choices and opens new
/// branches at the first choice beyond it, tracking the path probability.
class EnumeratingChooser {
 public:
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p);
  std::size_t categorical(std::span<const double> weights);

  double path_probability() const { return prob_; }
  /// Rewinds for the next leaf; false once the tree is exhausted.
  bool advance();

 private:
  struct Decision {
    std::size_t choice;
    std::size_t arity;
  };
  std::size_t next_choice(std::size_t arity);

  std::vector<Decision> path_;
  std::size_t depth_ = 0;
  double prob_ = 1.0;
};

/// Exact output law of `run`, a function of an EnumeratingChooser, found by
/// visiting every leaf of its decision tree. Throws past `cap` leaves.
template <typename Fn>
ExactPerturbDist enumerate_outcomes(Fn&& run, long cap = kEnumerationCap) {
  ExactPerturbDist out;
  EnumeratingChooser chooser;
  long leaves = 0;
  do {
    TokenSeq seq = run(chooser);
    if (chooser.path_probability() > 0.0) out[std::move(seq)] += chooser.path_probability();
    if (++leaves > cap)
      throw std::length_error("enumerate_outcomes: decision tree exceeds the enumeration cap of " +
                              std::to_string(cap) + " leaves");
  } while (chooser.advance());
  return out;
}

/// Closed-form law of synonym replacement: an independent product over
/// positions (keep w.p. 1 - beta, else a uniform synonym or deletion).
ExactPerturbDist replacement_product_law(double beta, const SynonymTable& synonyms, const TokenSeq& x);

/// Exact law of any perturber on `x`: the product law for Replacement,
/// decision-tree expansion otherwise. Requires x to lie in `space`.
ExactPerturbDist exact_perturb_dist(const PerturbSpec& spec, const TokenSeq& x, const SequenceSpace& space);

PerturbKernel make_kernel(const PerturbSpec& spec, const SequenceSpace& space);

double total_mass(const ExactPerturbDist& dist);
double tv_distance(const ExactPerturbDist& p, const ExactPerturbDist& q);

/// Conditions on the last token; throws on an empty sequence.
ConditionalModel bigram_conditional(const NeuralBigramModel& model);

/// Mixture sum_{X~} T(X~|x) P(.|X~).
CategoricalDist perturbed_model_dist(const ConditionalModel& model, const ExactPerturbDist& law);

struct MixtureEstimate {
  CategoricalDist dist;
  Eigen::VectorXd stderr;  // per-entry standard error
  long samples;
};

/// Monte Carlo version of perturbed_model_dist with n perturbation draws.
MixtureEstimate perturbed_model_dist_mc(const ConditionalModel& model, const PerturbSpec& spec, const TokenSeq& x,
                                        long n, RandomSource& rng);

struct EtaResult {
  double value = 0.0;
  std::optional<TokenSeq> worst;  // the maximizing X'
};

/// eta_T(delta) = max over X' within delta of the support of
///                min over X in the support of TV(T(.|X), T(.|X')).
EtaResult eta_T(const PerturbKernel& kernel, const SequenceSpace& space, int delta);
EtaResult eta_T(const PerturbSpec& spec, const SequenceSpace& space, int delta);

/// rho_T(delta) = max over X' within delta, and over outcomes X~ with positive
/// T(X~|X') mass, of d(X~, support). Throws if an outcome leaves the
/// fixed-length space (Hamming distance is undefined there).
int rho_T(const PerturbKernel& kernel, const SequenceSpace& space, int delta);
int rho_T(const PerturbSpec& spec, const SequenceSpace& space, int delta);

struct Prop1Report {
  double exact_tv;
  double bound;  // (1 - beta) * hamming(x, y)
  bool holds;    // exact_tv <= bound + 1e-12
  /// S_{x_l} == S_{y_l} wherever x_l != y_l, the regime the bound is proved for.
  bool shared_synonyms;
};

Prop1Report verify_prop1(double beta, const SynonymTable& synonyms, const TokenSeq& x, const TokenSeq& y);

/// A perturber that maps every sequence of domain D_i to the same law.
struct PartitionPerturber {
  std::vector<int> domain_of;               // indexed by SequenceSpace::index_of
  std::vector<ExactPerturbDist> outputs;    // one law per domain

  int domain_count() const { return static_cast<int>(outputs.size()); }
  void validate(const SequenceSpace& space) const;
  PerturbKernel kernel(const SequenceSpace& space) const;
};

/// Domains keyed by the first token; domain i maps to the uniform law over the
/// support members that start with i. Throws if some first token has none.
PartitionPerturber first_token_partition(const SequenceSpace& space);

struct Assumption2Report {
  double max_tv = 0.0;
  bool holds = true;  // max_tv < 1e-12
  long checked = 0;   // (model, X') evaluations
  std::optional<TokenSeq> counterexample;
};

/// For random bigram models and every X' outside the support, compares the
/// perturbed prediction at X' with that at a support member X0 of the same
/// domain. Throws if some domain has no support member.
Assumption2Report verify_assumption2(const PartitionPerturber& perturber, const SequenceSpace& space, int n_models,
                                     RandomSource& rng, int model_dim = 4);
/// Same check for an arbitrary kernel and domain map, e.g. the identity
/// perturber, which breaks the assumption.
Assumption2Report verify_assumption2(const PerturbKernel& kernel, const std::vector<int>& domain_of,
                                     const SequenceSpace& space, int n_models, RandomSource& rng, int model_dim = 4);

struct RobustnessReport {
  double max_tv = 0.0;             // worst out-of-support TV over all pairs
  double eta = 0.0;                // eta_T(delta)
  bool holds = true;               // max_tv <= eta + 1e-9
  double max_support_tv = 0.0;     // agreement check on the support, should be 0
  int pairs = 0;
  long checked = 0;
  std::optional<TokenSeq> counterexample;
  std::string note;                // set when no pair could be built
};

/// Builds pairs of base models that agree on every outcome reachable from the
/// support (so their perturbed versions agree on the support) and differ
/// arbitrarily elsewhere, then checks TV at each X' within delta against eta_T.
RobustnessReport verify_robustness_bound(const PerturbKernel& kernel, const SequenceSpace& space, int delta,
                                         int n_pairs, RandomSource& rng);
RobustnessReport verify_robustness_bound(const PerturbSpec& spec, const SequenceSpace& space, int delta, int n_pairs,
                                         RandomSource& rng);

}  // namespace perturblm
