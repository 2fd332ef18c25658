#include "helpers.hpp"
#include "perturblm/scoring.hpp"

#include <doctest.h>

using namespace perturblm;
using testing_util::random_simplex;

TEST_CASE("score examples") {
  const CategoricalDist point(Eigen::Vector2d(1, 0));
  CHECK(score(ScoringRule::brier(), point, 0) == 1.0);
  const auto u4 = CategoricalDist::uniform(4);
  for (TokenId v = 0; v < 4; ++v) CHECK(score(ScoringRule::log(), u4, v) == std::log(0.25));
  CHECK_THROWS(score(ScoringRule::log(), u4, 4));
}

TEST_CASE("log score floors zero probabilities and flags them") {
  const CategoricalDist point(Eigen::Vector2d(1, 0));
  bool floored = false;
  CHECK(score(ScoringRule::log(), point, 1, &floored) == std::log(1e-12));
  CHECK(floored);
  floored = false;
  CHECK(score(ScoringRule::log(), point, 0, &floored) == 0.0);
  CHECK_FALSE(floored);
}

TEST_CASE("alpha power with alpha = 2 is the Brier score") {
  RandomSource rng(21);
  const auto a2 = ScoringRule::alpha_power(2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(9));
    const CategoricalDist p(random_simplex(n, rng));
    const auto v = static_cast<TokenId>(rng.uniform_index(static_cast<std::size_t>(n)));
    CHECK(std::abs(score(a2, p, v) - score(ScoringRule::brier(), p, v)) <= 1e-12);
  }
}

TEST_CASE("alpha power is continuous in alpha near 2") {
  RandomSource rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(9));
    const CategoricalDist p(random_simplex(n, rng));
    const auto v = static_cast<TokenId>(rng.uniform_index(static_cast<std::size_t>(n)));
    const double brier = score(ScoringRule::brier(), p, v);
    CHECK(std::abs(score(ScoringRule::alpha_power(2.0 + 1e-6), p, v) - brier) < 1e-5);
    CHECK(std::abs(score(ScoringRule::alpha_power(2.0 - 1e-6), p, v) - brier) < 1e-5);
  }
}

TEST_CASE("rule parsing") {
  CHECK(ScoringRule::parse("log").kind == ScoreKind::Log);
  CHECK(ScoringRule::parse("brier").kind == ScoreKind::Brier);
  const auto a = ScoringRule::parse("alpha:1.5");
  CHECK(a.kind == ScoreKind::AlphaPower);
  CHECK(a.alpha == 1.5);
  CHECK(ScoringRule::parse(a.to_string()).alpha == 1.5);
  CHECK_THROWS(ScoringRule::parse("alpha:1"));
  CHECK_THROWS(ScoringRule::parse("alpha:x"));
  CHECK_THROWS(ScoringRule::parse("crps"));
  CHECK_THROWS(ScoringRule::alpha_power(0.5));
}

TEST_CASE("expected score examples") {
  const CategoricalDist point(Eigen::Vector2d(1, 0)), half(Eigen::Vector2d(0.5, 0.5));
  CHECK(expected_score(ScoringRule::brier(), point, point) == 1.0);
  CHECK(expected_score(ScoringRule::brier(), half, half) == 0.5);
  CHECK_THROWS(expected_score(ScoringRule::brier(), half, CategoricalDist::uniform(3)));
}

TEST_CASE("strict propriety on random pairs") {
  RandomSource rng(23);
  const std::vector<ScoringRule> rules{ScoringRule::log(), ScoringRule::brier(), ScoringRule::alpha_power(1.5),
                                       ScoringRule::alpha_power(3.0)};
  for (const auto& rule : rules) {
    int trials = 0;
    while (trials < 1000) {
      const int n = 2 + static_cast<int>(rng.uniform_index(9));
      const CategoricalDist p(random_simplex(n, rng)), q(random_simplex(n, rng));
      if (tv_distance(p, q) <= 1e-3) continue;
      ++trials;
      CHECK(expected_score(rule, p, q) < expected_score(rule, q, q));
    }
  }
}

TEST_CASE("score gradient matches finite differences") {
  RandomSource rng(24);
  const std::vector<ScoringRule> rules{ScoringRule::log(), ScoringRule::brier(), ScoringRule::alpha_power(2.5)};
  for (const auto& rule : rules)
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_index(6));
      Eigen::VectorXd p = random_simplex(n, rng).array() + 0.05;
      const auto v = static_cast<TokenId>(rng.uniform_index(static_cast<std::size_t>(n)));
      const Eigen::VectorXd g = score_gradient(rule, p, v);
      for (int k = 0; k < n; ++k) {
        const double h = 1e-6;
        Eigen::VectorXd up = p, dn = p;
        up(k) += h;
        dn(k) -= h;
        const double fd = (score(rule, up, v) - score(rule, dn, v)) / (2 * h);
        CHECK(std::abs(fd - g(k)) <= 1e-6 * std::max(1.0, std::abs(g(k))));
      }
    }
}

TEST_CASE("sequence objective") {
  const auto rule = ScoringRule::log();
  const CategoricalDist d(Eigen::Vector3d(0.2, 0.5, 0.3));
  const std::vector<CategoricalDist> one{d};
  const std::vector<TokenId> target{1};
  CHECK(sequence_objective(rule, one, target, 1) == std::log(0.5));
  const std::vector<CategoricalDist> two{d, d};
  CHECK(sequence_objective(rule, two, target, 2) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK_THROWS(sequence_objective(rule, two, target, 1));
  CHECK_THROWS(sequence_objective(rule, one, target, 0));

  // m = 2, Brier, 2 positions; copy-major layout [c0t0, c0t1, c1t0, c1t1].
  // Brier(p, v) = 2 p_v - |p|^2:
  //   a = (.6,.4), v=0: 1.2 - .52 = .68      b = (.1,.9), v=1: 1.8 - .82 = .98
  //   c = (.5,.5), v=0: 1.0 - .50 = .50      e = (.3,.7), v=1: 1.4 - .58 = .82
  // (1/2)(.68 + .98 + .50 + .82) = 1.49
  const std::vector<CategoricalDist> dists{CategoricalDist(Eigen::Vector2d(0.6, 0.4)),
                                           CategoricalDist(Eigen::Vector2d(0.1, 0.9)),
                                           CategoricalDist(Eigen::Vector2d(0.5, 0.5)),
                                           CategoricalDist(Eigen::Vector2d(0.3, 0.7))};
  const std::vector<TokenId> targets{0, 1};
  CHECK(sequence_objective(ScoringRule::brier(), dists, targets, 2) == doctest::Approx(1.49).epsilon(1e-14));
}
