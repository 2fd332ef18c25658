#pragma once

#include "perturblm/core.hpp"
#include "perturblm/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

namespace testing_util {

using namespace perturblm;

inline Eigen::VectorXd random_simplex(int n, RandomSource& rng) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = rng.gamma(1.0);
  return w / w.sum();
}

inline NeuralBigramModel random_model(int v, int d, RandomSource& rng, double bias_scale = 0.5) {
  NeuralBigramModel m = init_model(Vocabulary(v), d, rng, 0.0);
  for (int i = 0; i < d; ++i) m.b1(i) = rng.normal(0.0, bias_scale);
  for (int i = 0; i < v; ++i) m.b2(i) = rng.normal(0.0, bias_scale);
  return m;
}

// TV as the largest event-probability gap, max_A |P(A) - Q(A)|, over every
// subset A of the joint support. Independent of the half-L1 formula.
template <typename Key>
double tv_by_events(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  std::vector<Key> keys;
  for (const auto& [k, v] : p) keys.push_back(k);
  for (const auto& [k, v] : q)
    if (!p.count(k)) keys.push_back(k);
  const std::size_t n = keys.size();
  double best = 0.0;
  for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
    double gap = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1ul << i)) {
        auto a = p.find(keys[i]);
        auto b = q.find(keys[i]);
        gap += (a == p.end() ? 0.0 : a->second) - (b == q.end() ? 0.0 : b->second);
      }
    best = std::max(best, std::abs(gap));
  }
  return best;
}

}  // namespace testing_util

namespace testing_util {

template <typename To, typename From>
BigramNet<To> cast_net(const BigramNet<From>& m) {
  BigramNet<To> out;
  out.vocab = m.vocab;
  out.dim = m.dim;
  out.dropout_rate = m.dropout_rate;
  out.train_embeddings = m.train_embeddings;
  out.E = m.E.template cast<To>();
  out.W1 = m.W1.template cast<To>();
  out.b1 = m.b1.template cast<To>();
  out.W2 = m.W2.template cast<To>();
  out.b2 = m.b2.template cast<To>();
  return out;
}

// Largest per-entry error of the analytic gradient against central finite
// differences taken in long double. An entry passes when its absolute error
// is under `abs_floor` or its relative error is under the returned bound.
struct GradCheck {
  double max_rel = 0.0;
  double max_abs = 0.0;
  long entries = 0;
};

inline GradCheck gradient_check(const NeuralBigramModel& model, std::span<const TrainPair> batch,
                                const ScoringRule& rule, double h = 1e-5, double abs_floor = 1e-8) {
  using LD = long double;
  const GradientSet g = loss_and_grad(model, batch, rule, false, nullptr).grads;
  BigramNet<LD> wide = cast_net<LD>(model);
  GradCheck out;
  auto probe = [&](auto& param, const auto& grad) {
    for (Eigen::Index i = 0; i < param.size(); ++i) {
      const LD keep = param.data()[i];
      param.data()[i] = keep + LD(h);
      const LD up = loss_and_grad(wide, batch, rule, false, nullptr).loss;
      param.data()[i] = keep - LD(h);
      const LD dn = loss_and_grad(wide, batch, rule, false, nullptr).loss;
      param.data()[i] = keep;
      const double fd = static_cast<double>((up - dn) / (2 * LD(h)));
      const double an = grad.data()[i];
      const double err = std::abs(fd - an);
      ++out.entries;
      out.max_abs = std::max(out.max_abs, err);
      if (err < abs_floor) continue;
      out.max_rel = std::max(out.max_rel, err / std::max(std::abs(fd), std::abs(an)));
    }
  };
  probe(wide.W1, g.dW1);
  probe(wide.b1, g.db1);
  probe(wide.W2, g.dW2);
  probe(wide.b2, g.db2);
  if (model.train_embeddings) probe(wide.E, g.dE);
  return out;
}

}  // namespace testing_util
