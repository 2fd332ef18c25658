#pragma once

#include "perturblm/model.hpp"
#include "perturblm/perturb.hpp"

#include <cstdint>

namespace perturblm {

struct GenerateConfig {
  PerturbSpec perturb;
  /// Cap on the total output length, prompt included.
  int max_length = 64;
  std::uint64_t seed = 0;
};

/// Perturbed autoregressive sampling. Each step perturbs the running sequence
/// once, conditions the model on the perturbed sequence's last token, samples
/// the next token and appends it to the *unperturbed* sequence. Stops after
/// emitting EOS or on reaching max_length.
///
/// If a perturbation empties the sequence, the step conditions on the last
/// unperturbed token instead.
TokenSeq generate(const NeuralBigramModel& model, const TokenSeq& prompt, const GenerateConfig& cfg, RandomSource& rng);

}  // namespace perturblm
