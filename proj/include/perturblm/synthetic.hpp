// Synthetic extrapolation experiment: a Dirichlet bigram ground truth, a
// sampled training corpus, perturbed training of the neural bigram model and
// the mean absolute error of the recovered transition matrix on token pairs
// the corpus never shows.
#pragma once

#include "perturblm/io.hpp"
#include "perturblm/model.hpp"
#include "perturblm/train.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace perturblm {

struct SyntheticSpec {
  int vocab_size = 50;
  double dirichlet_concentration = 0.5;
  int n_sequences = 500;
  int seq_length = 10;
  /// Per-step stopping probability after the first two tokens; 0 keeps every
  /// sequence at seq_length.
  double stop_probability = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  CategoricalDist initial;
  TransitionMatrix transition;
};

/// Uniform initial distribution; each row of the transition matrix an
/// independent symmetric Dirichlet draw (normalized Gamma variates).
GroundTruth gen_ground_truth(const SyntheticSpec& spec, RandomSource& rng);

Corpus sample_corpus(const GroundTruth& truth, const SyntheticSpec& spec, RandomSource& rng);

/// Dense |V| x |V| indicator of consecutive pairs present in a corpus.
class ObservedPairs {
 public:
  explicit ObservedPairs(int vocab_size);

  void add(TokenId from, TokenId to);
  bool contains(TokenId from, TokenId to) const { return seen_[index(from, to)] != 0; }
  int vocab_size() const { return size_; }
  long observed_count() const { return count_; }
  long unseen_count() const { return static_cast<long>(size_) * size_ - count_; }

 private:
  std::size_t index(TokenId from, TokenId to) const {
    return static_cast<std::size_t>(from) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(to);
  }
  int size_;
  long count_ = 0;
  std::vector<std::uint8_t> seen_;
};

ObservedPairs observed_pairs(const Corpus& corpus, int vocab_size);

/// Mean of |estimate_ij - truth_ij| over pairs not in `observed`. Throws if
/// every pair was observed.
double mae_unseen(const TransitionMatrix& estimate, const TransitionMatrix& truth, const ObservedPairs& observed);

/// Row-normalized bigram counts; rows with no counts are uniform.
TransitionMatrix empirical_transition_matrix(const Corpus& corpus, int vocab_size);

enum class ReferenceMatrix { True, Empirical };

struct ExperimentSpec {
  std::vector<int> vocab_sizes{50, 100, 200, 400, 800};
  std::vector<double> intensities{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  int replications = 20;
  SyntheticSpec synthetic;
  TrainConfig train;
  int model_dim = 50;
  double dropout_rate = 0.1;
  bool train_embeddings = false;
  ReferenceMatrix reference = ReferenceMatrix::True;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExperimentRecord {
  int vocab_size;
  double intensity;
  int replication;
  double mae;
  std::uint64_t seed;
};

struct SummaryRow {
  int vocab_size;
  double intensity;
  double mean_mae;
  double stderr_mae;
  int n;
};

struct PairedDifference {
  double mean;    // mean of (mae at b) - (mae at a)
  double stderr;  // standard error of that mean
  int n;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  std::vector<SummaryRow> summary;

  const SummaryRow& summary_for(int vocab_size, double intensity) const;
  /// Replication-paired difference mae(b) - mae(a) at one vocabulary size.
  PairedDifference paired(int vocab_size, double intensity_a, double intensity_b) const;
};

/// Runs every (vocab size, intensity, replication) cell. Within a replication
/// the ground truth, corpus and initial model are shared by all intensities;
/// perturbation, shuffling and dropout come from a per-cell stream. Output
/// order is fixed regardless of `threads`.
ExperimentResult run_experiment(const ExperimentSpec& spec, int threads = 1);

std::vector<SummaryRow> summarize(const std::vector<ExperimentRecord>& records);

std::string results_csv(const ExperimentResult& result);
std::string summary_csv(const ExperimentResult& result);
/// MAE against intensity with a +/- 2 standard error band.
std::string summary_svg(const ExperimentResult& result, int vocab_size);

}  // namespace perturblm
