// Perturbed autoregressive training: assemble m (possibly perturbed) copies
// of the corpus into (prev, target) pairs, then fit the bigram network with
// Adam on the mean negative score.
#pragma once

#include "perturblm/io.hpp"
#include "perturblm/model.hpp"
#include "perturblm/perturb.hpp"
#include "perturblm/scoring.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace perturblm {

struct TrainConfig {
  ScoringRule rule;
  int m = 2;
  bool include_identity_copy = true;
  PerturbSpec perturb;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int epochs = 25;
  int batch_size = 500;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  /// Draw fresh perturbed copies every epoch instead of once up front.
  bool resample_each_epoch = false;

  void validate() const;
};

struct AdamState {
  GradientSet m;
  GradientSet v;
  long step = 0;

  static AdamState for_model(const NeuralBigramModel& model);
};

struct TrainDiagnostics {
  PerturbStats perturb;
  long log_floor_events = 0;
  /// Pairs skipped because the perturbed prefix came out empty.
  long empty_prefix_pairs = 0;
  long pairs_per_epoch = 0;
};

/// Unrolls every copy of the corpus into consecutive (prev, target) pairs,
/// copy-major. The bigram perturber rewrites whole sequences (its candidate
/// rule looks at both neighbours); other kinds perturb each prefix X_<t and
/// condition on the last surviving token.
std::vector<TrainPair> assemble_training_set(const Corpus& corpus, const TrainConfig& cfg, RandomSource& rng,
                                             TrainDiagnostics* diag = nullptr);

/// One coupled-L2 Adam update with bias correction.
void adam_step(NeuralBigramModel& model, const GradientSet& grads, AdamState& state, const TrainConfig& cfg);

struct TrainResult {
  NeuralBigramModel model;
  /// Mean training loss per epoch, index = epoch (0-based).
  std::vector<double> loss_trace;
  TrainDiagnostics diagnostics;
};

/// Runs `cfg.epochs` epochs of shuffled mini-batches. Assembly, shuffling and
/// dropout draw from separate child streams of `rng`.
TrainResult train(const Corpus& corpus, NeuralBigramModel model, const TrainConfig& cfg, RandomSource& rng);

/// Mean negative score over `pairs` with dropout off.
double evaluate_loss(const NeuralBigramModel& model, std::span<const TrainPair> pairs, const ScoringRule& rule);

/// Diagnostics of a finished run.
inline const TrainDiagnostics& perturbation_event_counter(const TrainResult& run) { return run.diagnostics; }

std::string loss_trace_csv(std::span<const double> trace);

}  // namespace perturblm
