#include "helpers.hpp"
#include "perturblm/model.hpp"

#include <doctest.h>

#include <filesystem>

using namespace perturblm;
using testing_util::gradient_check;
using testing_util::random_model;

namespace {

std::vector<TrainPair> random_batch(int v, std::size_t n, RandomSource& rng) {
  std::vector<TrainPair> b(n);
  for (auto& p : b) {
    p.prev = static_cast<TokenId>(rng.uniform_index(static_cast<std::size_t>(v)));
    p.target = static_cast<TokenId>(rng.uniform_index(static_cast<std::size_t>(v)));
  }
  return b;
}

}  // namespace

TEST_CASE("init_model shapes and determinism") {
  RandomSource a(1), b(1);
  const auto m = init_model(Vocabulary(50), 50, a);
  CHECK(m.E.rows() == 50);
  CHECK(m.E.cols() == 50);
  CHECK(m.W1.rows() == 50);
  CHECK(m.W1.cols() == 50);
  CHECK(m.b1.size() == 50);
  CHECK(m.W2.rows() == 50);
  CHECK(m.W2.cols() == 50);
  CHECK(m.b2.size() == 50);
  CHECK(m.b1.isZero(0.0));
  CHECK(m.b2.isZero(0.0));
  const auto m2 = init_model(Vocabulary(50), 50, b);
  CHECK(m.E == m2.E);
  CHECK(m.W1 == m2.W1);
  CHECK(m.W2 == m2.W2);

  // W1 entries ~ N(0, 2/50); the mean of 2500 of them has sd 0.2/50
  const double se = std::sqrt(2.0 / 50) / std::sqrt(2500.0);
  CHECK(std::abs(m.W1.mean()) < 3 * se);
  CHECK(std::abs(m.E.mean()) < 3 * (1.0 / 50));
}

TEST_CASE("forward examples") {
  RandomSource rng(2);
  auto m = init_model(Vocabulary(7), 5, rng);
  m.W2.setZero();
  m.b2.setZero();
  for (TokenId t = 0; t < 7; ++t)
    for (TokenId k = 0; k < 7; ++k) CHECK(forward(m, t)[k] == doctest::Approx(1.0 / 7).epsilon(1e-15));

  const auto r = random_model(9, 6, rng);
  for (TokenId t = 0; t < 9; ++t) {
    const auto p = forward(r, t);
    CHECK(p.probs() == forward(r, t).probs());
    CHECK(std::abs(p.probs().sum() - 1.0) < 1e-9);
  }
}

TEST_CASE("dropout only acts in training mode") {
  RandomSource rng(3);
  auto m = random_model(6, 8, rng);
  m.dropout_rate = 0.5;
  RandomSource d1(4), d2(4);
  const auto a = forward(m, 2, true, &d1);
  const auto b = forward(m, 2, true, &d2);
  CHECK(a.probs() == b.probs());
  CHECK(std::abs(a.probs().sum() - 1.0) < 1e-9);
  CHECK(forward(m, 2).probs() == forward(m, 2, false, &d1).probs());
  CHECK_THROWS(forward(m, 2, true, nullptr));
}

TEST_CASE("inverted dropout preserves the hidden mean") {
  RandomSource rng(5);
  const double rate = 0.3;
  const Eigen::Index rows = 400, cols = 50;
  const auto mask = detail::dropout_mask<double>(rows, cols, rate, true, &rng);
  CHECK(mask.mean() == doctest::Approx(1.0).epsilon(0.02));
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    const double x = mask.data()[i];
    CHECK((x == 0.0 || x == doctest::Approx(1.0 / (1.0 - rate))));
  }
}

TEST_CASE("loss examples") {
  RandomSource rng(6);
  auto m = init_model(Vocabulary(5), 4, rng, 0.0);
  m.W2.setZero();
  m.b2.setZero();
  const auto batch = random_batch(5, 20, rng);
  CHECK(loss_and_grad(m, std::span<const TrainPair>(batch), ScoringRule::log(), false, nullptr).loss ==
        doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK_THROWS(loss_and_grad(m, std::span<const TrainPair>(), ScoringRule::log(), false, nullptr));
}

TEST_CASE("duplicated batch entries equal weighted deduplicated batch") {
  RandomSource rng(7);
  const auto m = random_model(5, 4, rng);
  const std::vector<TrainPair> dup{{0, 1}, {0, 1}, {0, 1}, {2, 3}, {4, 0}, {4, 0}};
  const std::vector<TrainPair> dedup{{0, 1}, {2, 3}, {4, 0}};
  const std::vector<double> w{3, 1, 2};
  for (const auto& rule : {ScoringRule::log(), ScoringRule::brier()}) {
    const auto a = loss_and_grad(m, std::span<const TrainPair>(dup), rule, false, nullptr);
    const auto b = loss_and_grad(m, std::span<const TrainPair>(dedup), rule, false, nullptr, w);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
    CHECK((a.grads.dW1 - b.grads.dW1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((a.grads.dW2 - b.grads.dW2).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("gradients match central finite differences") {
  RandomSource rng(8);
  const std::vector<ScoringRule> rules{ScoringRule::log(), ScoringRule::brier(), ScoringRule::alpha_power(1.5),
                                       ScoringRule::alpha_power(3.0)};
  for (int trial = 0; trial < 12; ++trial) {
    auto m = random_model(5, 4, rng);
    m.train_embeddings = trial % 3 == 0;
    const auto batch = random_batch(5, 8, rng);
    const auto& rule = rules[static_cast<std::size_t>(trial) % rules.size()];
    const auto r = gradient_check(m, batch, rule);
    CHECK(r.max_rel < 1e-4);
    CHECK(r.entries > 0);
  }
}

TEST_CASE("gradient of a floored log score is zero") {
  RandomSource rng(9);
  auto m = random_model(3, 2, rng);
  m.b2 << 0.0, 200.0, -200.0;  // p(2) underflows below 1e-12
  const std::vector<TrainPair> batch{{0, 2}};
  const auto r = loss_and_grad(m, std::span<const TrainPair>(batch), ScoringRule::log(), false, nullptr);
  CHECK(r.floored == 1);
  CHECK(r.loss == doctest::Approx(-std::log(1e-12)));
  CHECK(r.grads.db2.isZero(0.0));
}

TEST_CASE("frozen embeddings carry no gradient") {
  RandomSource rng(10);
  const auto m = random_model(4, 3, rng);
  const auto batch = random_batch(4, 5, rng);
  CHECK(loss_and_grad(m, std::span<const TrainPair>(batch), ScoringRule::log(), false, nullptr).grads.dE.size() == 0);
}

TEST_CASE("extract_transition_matrix") {
  RandomSource rng(11);
  const auto m = random_model(8, 5, rng);
  const auto t = extract_transition_matrix(m);
  for (TokenId i = 0; i < 8; ++i) {
    CHECK(std::abs(t.matrix().row(i).sum() - 1.0) < 1e-9);
    const auto f = forward(m, i);
    for (TokenId k = 0; k < 8; ++k) CHECK(t(i, k) == f[k]);
  }
  auto z = m;
  z.W2.setZero();
  z.b2.setZero();
  CHECK((extract_transition_matrix(z).matrix().array() == 1.0 / 8).all());

  RandomSource r2(12);
  const auto fresh = init_model(Vocabulary(30), 10, r2);
  CHECK_NOTHROW(extract_transition_matrix(fresh));
}

TEST_CASE("checkpoint round trip is bit exact") {
  RandomSource rng(13);
  auto m = random_model(6, 4, rng);
  m.vocab = Vocabulary(6, 5);
  m.dropout_rate = 0.1;
  const auto back = model_from_json(checkpoint_json(m));
  CHECK(back.E == m.E);
  CHECK(back.W1 == m.W1);
  CHECK(back.b1 == m.b1);
  CHECK(back.W2 == m.W2);
  CHECK(back.b2 == m.b2);
  CHECK(back.vocab == m.vocab);
  CHECK(back.dropout_rate == m.dropout_rate);

  const auto path = std::filesystem::temp_directory_path() / "perturblm_ckpt_test.json";
  save_checkpoint(m, path);
  CHECK(load_checkpoint(path).W2 == m.W2);
  std::filesystem::remove(path);

  CHECK_THROWS(model_from_json("{\"vocab_size\": 3}"));
  CHECK_THROWS(model_from_json("not json"));
}
