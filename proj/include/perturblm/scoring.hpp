// Proper scoring rules S(P, v): logarithmic, Brier and alpha-power.
// Scores are rewards (higher is better); training minimizes their negation.
#pragma once

#include "perturblm/core.hpp"

#include <cmath>
#include <span>
#include <string>

namespace perturblm {

enum class ScoreKind { Log, Brier, AlphaPower };

struct ScoringRule {
  ScoreKind kind = ScoreKind::Log;
  double alpha = 2.0;
  /// Log score for a zero-probability outcome.
  double log_floor = std::log(1e-12);

  static ScoringRule log() { return {}; }
  static ScoringRule brier() { return {ScoreKind::Brier}; }
  static ScoringRule alpha_power(double alpha);

  /// "log" | "brier" | "alpha:<value>"
  static ScoringRule parse(const std::string& text);
  std::string to_string() const;
};

/// Score of outcome `v` under probability vector `p`. Sets `*floored` when
/// the log score hit its floor.
template <typename Derived>
typename Derived::Scalar score(const ScoringRule& rule, const Eigen::MatrixBase<Derived>& p, TokenId v,
                               bool* floored = nullptr) {
  using S = typename Derived::Scalar;
  using std::exp;
  using std::log;
  using std::pow;
  switch (rule.kind) {
    case ScoreKind::Log: {
      const S pv = p(v);
      if (pv <= exp(S(rule.log_floor))) {
        if (floored) *floored = true;
        return S(rule.log_floor);
      }
      return log(pv);
    }
    case ScoreKind::Brier:
      return S(2) * p(v) - p.squaredNorm();
    case ScoreKind::AlphaPower: {
      const S a(rule.alpha);
      return a * pow(p(v), a - S(1)) - (a - S(1)) * p.derived().array().pow(a).sum();
    }
  }
  return S(0);
}

/// dS/dp_k for every k, with `p` treated as unconstrained coordinates.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> score_gradient(const ScoringRule& rule,
                                                                         const Eigen::MatrixBase<Derived>& p,
                                                                         TokenId v) {
  using S = typename Derived::Scalar;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using std::exp;
  using std::pow;
  Vec g;
  switch (rule.kind) {
    case ScoreKind::Log:
      g = Vec::Zero(p.size());
      if (p(v) > exp(S(rule.log_floor))) g(v) = S(1) / p(v);
      break;
    case ScoreKind::Brier:
      g = S(-2) * p;
      g(v) += S(2);
      break;
    case ScoreKind::AlphaPower: {
      const S a(rule.alpha);
      g = (-(a - S(1)) * a * p.derived().array().pow(a - S(1))).matrix();
      g(v) += a * (a - S(1)) * pow(p(v), a - S(2));
      break;
    }
  }
  return g;
}

double score(const ScoringRule& rule, const CategoricalDist& p, TokenId v, bool* floored = nullptr);

/// E_{v ~ pstar}[S(p, v)].
double expected_score(const ScoringRule& rule, const CategoricalDist& p, const CategoricalDist& pstar);

/// (1/m) * sum over copies i and positions t of S(dists[i*T + t], targets[t]),
/// where T = targets.size() and dists is laid out copy-major.
double sequence_objective(const ScoringRule& rule, std::span<const CategoricalDist> dists,
                          std::span<const TokenId> targets, int m);

}  // namespace perturblm
