#include "perturblm/generate.hpp"

#include <stdexcept>

namespace perturblm {

TokenSeq generate(const NeuralBigramModel& model, const TokenSeq& prompt, const GenerateConfig& cfg, RandomSource& rng) {
  if (cfg.max_length < 1) throw std::invalid_argument("generate: max_length must be >= 1");
  if (prompt.empty()) throw std::invalid_argument("generate: the bigram model needs a non-empty prompt");
  model.vocab.check(prompt);
  cfg.perturb.validate();

  TokenSeq seq = prompt;
  while (static_cast<int>(seq.size()) < cfg.max_length) {
    if (model.vocab.is_eos(seq.back())) break;
    const TokenSeq conditioned = perturb(seq, cfg.perturb, rng);
    const TokenId prev = conditioned.empty() ? seq.back() : conditioned.back();
    if (!model.vocab.contains(prev)) throw std::out_of_range("generate: perturber produced an invalid token");
    seq.push_back(sample_categorical(forward(model, prev), rng));
  }
  return seq;
}

}  // namespace perturblm
