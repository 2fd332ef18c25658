#include "perturblm/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace perturblm {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (m < 1) throw std::invalid_argument("TrainConfig: m must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  perturb.validate();
}

AdamState AdamState::for_model(const NeuralBigramModel& model) {
  AdamState s;
  s.m = GradientSet::zeros_like(model);
  s.v = GradientSet::zeros_like(model);
  return s;
}

namespace {

void append_pairs(const TokenSeq& x, const PerturbSpec& spec, bool identity, RandomSource& rng,
                  std::vector<TrainPair>& out, TrainDiagnostics* diag) {
  if (x.size() < 2) return;
  PerturbStats stats;
  if (identity || spec.kind == PerturbKind::Identity) {
    for (std::size_t t = 1; t < x.size(); ++t) out.push_back({x[t - 1], x[t]});
  } else if (spec.kind == PerturbKind::BigramSynonym) {
    const TokenSeq xt = perturb_bigram(x, spec, rng, &stats);
    for (std::size_t t = 1; t < x.size(); ++t) out.push_back({xt[t - 1], x[t]});
  } else {
    for (std::size_t t = 1; t < x.size(); ++t) {
      const TokenSeq prefix(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(t));
      const TokenSeq pt = perturb(prefix, spec, rng, &stats);
      if (pt.empty()) {
        if (diag) ++diag->empty_prefix_pairs;
        continue;
      }
      out.push_back({pt.back(), x[t]});
    }
  }
  if (diag) diag->perturb += stats;
}

template <typename Op>
void for_each_param(NeuralBigramModel& model, const GradientSet& g, AdamState& s, Op op) {
  op(model.W1, g.dW1, s.m.dW1, s.v.dW1);
  op(model.b1, g.db1, s.m.db1, s.v.db1);
  op(model.W2, g.dW2, s.m.dW2, s.v.dW2);
  op(model.b2, g.db2, s.m.db2, s.v.db2);
  if (model.train_embeddings) op(model.E, g.dE, s.m.dE, s.v.dE);
}

}  // namespace

std::vector<TrainPair> assemble_training_set(const Corpus& corpus, const TrainConfig& cfg, RandomSource& rng,
                                             TrainDiagnostics* diag) {
  if (corpus.empty()) throw std::invalid_argument("assemble_training_set: empty corpus");
  cfg.perturb.validate();
  std::vector<TrainPair> pairs;
  std::size_t per_copy = 0;
  for (const auto& x : corpus) per_copy += x.empty() ? 0 : x.size() - 1;
  pairs.reserve(per_copy * static_cast<std::size_t>(cfg.m));
  for (int j = 0; j < cfg.m; ++j) {
    const bool identity = j == 0 && cfg.include_identity_copy;
    for (const auto& x : corpus) append_pairs(x, cfg.perturb, identity, rng, pairs, diag);
  }
  return pairs;
}

void adam_step(NeuralBigramModel& model, const GradientSet& grads, AdamState& state, const TrainConfig& cfg) {
  if (grads.dW1.rows() != model.W1.rows() || grads.dW1.cols() != model.W1.cols() || grads.db1.size() != model.b1.size() ||
      grads.dW2.rows() != model.W2.rows() || grads.dW2.cols() != model.W2.cols() || grads.db2.size() != model.b2.size() ||
      (model.train_embeddings && (grads.dE.rows() != model.E.rows() || grads.dE.cols() != model.E.cols())))
    throw std::invalid_argument("adam_step: gradient shapes do not match the model");
  if (state.m.dW1.size() != model.W1.size()) state = AdamState::for_model(model);

  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = cfg.lr;
  const double eps = cfg.adam_eps;
  const double wd = cfg.weight_decay;
  for_each_param(model, grads, state, [&](auto& param, const auto& grad, auto& m1, auto& m2) {
    const auto g = (grad.array() + wd * param.array()).eval();
    m1.array() = b1 * m1.array() + (1.0 - b1) * g;
    m2.array() = b2 * m2.array() + (1.0 - b2) * g.square();
    param.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
  });
}

TrainResult train(const Corpus& corpus, NeuralBigramModel model, const TrainConfig& cfg, RandomSource& rng) {
  cfg.validate();
  model.check_shapes();
  RandomSource assembly_rng = rng.split(1);
  RandomSource shuffle_rng = rng.split(2);
  RandomSource dropout_rng = rng.split(3);

  TrainResult result;
  std::vector<TrainPair> pairs = assemble_training_set(corpus, cfg, assembly_rng, &result.diagnostics);
  if (pairs.empty()) throw std::invalid_argument("train: corpus yields no training pairs");

  AdamState state = AdamState::for_model(model);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0 && cfg.resample_each_epoch) pairs = assemble_training_set(corpus, cfg, assembly_rng, &result.diagnostics);
    std::shuffle(pairs.begin(), pairs.end(), shuffle_rng.engine());
    double weighted = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += batch) {
      const std::size_t len = std::min(batch, pairs.size() - start);
      const std::span<const TrainPair> mb(pairs.data() + start, len);
      auto lg = loss_and_grad(model, mb, cfg.rule, true, &dropout_rng);
      result.diagnostics.log_floor_events += lg.floored;
      weighted += lg.loss * static_cast<double>(len);
      adam_step(model, lg.grads, state, cfg);
    }
    const double mean = weighted / static_cast<double>(pairs.size());
    if (!std::isfinite(mean) || !model.all_finite())
      throw std::runtime_error("train: non-finite loss or parameters at epoch " + std::to_string(epoch));
    result.loss_trace.push_back(mean);
  }
  result.diagnostics.pairs_per_epoch = static_cast<long>(pairs.size());
  result.model = std::move(model);
  return result;
}

double evaluate_loss(const NeuralBigramModel& model, std::span<const TrainPair> pairs, const ScoringRule& rule) {
  return loss_and_grad(model, pairs, rule, false, nullptr).loss;
}

std::string loss_trace_csv(std::span<const double> trace) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) os << i << ',' << trace[i] << '\n';
  return os.str();
}

}  // namespace perturblm
