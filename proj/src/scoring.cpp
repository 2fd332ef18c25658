#include "perturblm/scoring.hpp"

#include <sstream>
#include <stdexcept>

namespace perturblm {

ScoringRule ScoringRule::alpha_power(double alpha) {
  if (!(alpha > 1.0)) throw std::invalid_argument("alpha-power score requires alpha > 1");
  ScoringRule r;
  r.kind = ScoreKind::AlphaPower;
  r.alpha = alpha;
  return r;
}

ScoringRule ScoringRule::parse(const std::string& text) {
  if (text == "log") return log();
  if (text == "brier") return brier();
  if (text.rfind("alpha:", 0) == 0) {
    const std::string value = text.substr(6);
    std::size_t used = 0;
    double a = 0.0;
    try {
      a = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw std::invalid_argument("bad alpha value in rule '" + text + "'");
    return alpha_power(a);
  }
  throw std::invalid_argument("unknown scoring rule '" + text + "' (expected log, brier or alpha:<value>)");
}

std::string ScoringRule::to_string() const {
  switch (kind) {
    case ScoreKind::Log: return "log";
    case ScoreKind::Brier: return "brier";
    case ScoreKind::AlphaPower: {
      std::ostringstream os;
      os.precision(17);
      os << "alpha:" << alpha;
      return os.str();
    }
  }
  return "log";
}

double score(const ScoringRule& rule, const CategoricalDist& p, TokenId v, bool* floored) {
  if (v < 0 || v >= p.size()) throw std::out_of_range("score: token outside vocabulary");
  return score(rule, p.probs(), v, floored);
}

double expected_score(const ScoringRule& rule, const CategoricalDist& p, const CategoricalDist& pstar) {
  if (p.size() != pstar.size()) throw std::invalid_argument("expected_score: dimension mismatch");
  double total = 0.0;
  for (TokenId v = 0; v < pstar.size(); ++v) {
    if (pstar[v] > 0.0) total += pstar[v] * score(rule, p.probs(), v);
  }
  return total;
}

double sequence_objective(const ScoringRule& rule, std::span<const CategoricalDist> dists,
                          std::span<const TokenId> targets, int m) {
  if (m < 1) throw std::invalid_argument("sequence_objective: m must be positive");
  if (dists.size() != targets.size() * static_cast<std::size_t>(m))
    throw std::invalid_argument("sequence_objective: dists and targets are misaligned");
  double total = 0.0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
    for (std::size_t t = 0; t < targets.size(); ++t) total += score(rule, dists[i * targets.size() + t], targets[t]);
  }
  return total / m;
}

}  // namespace perturblm
