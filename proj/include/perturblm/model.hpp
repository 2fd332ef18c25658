// Neural bigram language model:
//
//   P(x_i | x_{i-1}) = softmax(W2 * dropout(relu(W1 * e_{i-1} + b1)) + b2)
//
// with e_{i-1} the row of the embedding matrix E for the previous token.
// The hidden width equals the embedding width d. Gradients are derived by
// hand; E is frozen unless `train_embeddings` is set.
#pragma once

#include "perturblm/core.hpp"
#include "perturblm/scoring.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>

namespace perturblm {

struct TrainPair {
  TokenId prev;
  TokenId target;
  bool operator==(const TrainPair&) const = default;
};

template <typename Scalar>
struct BigramNet {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vocabulary vocab;
  int dim = 50;
  double dropout_rate = 0.1;
  bool train_embeddings = false;

  Matrix E;   // |V| x d
  Matrix W1;  // d x d
  Vector b1;  // d
  Matrix W2;  // |V| x d
  Vector b2;  // |V|

  int vocab_size() const { return vocab.size; }

  void check_shapes() const {
    const int v = vocab.size;
    if (dim < 1 || E.rows() != v || E.cols() != dim || W1.rows() != dim || W1.cols() != dim || b1.size() != dim ||
        W2.rows() != v || W2.cols() != dim || b2.size() != v)
      throw std::invalid_argument("BigramNet: inconsistent parameter shapes");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw std::invalid_argument("BigramNet: dropout_rate must lie in [0, 1)");
  }

  bool all_finite() const {
    return E.allFinite() && W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
  }
};

template <typename Scalar>
struct BigramGradients {
  using Matrix = typename BigramNet<Scalar>::Matrix;
  using Vector = typename BigramNet<Scalar>::Vector;

  Matrix dW1;
  Vector db1;
  Matrix dW2;
  Vector db2;
  /// Empty when embeddings are frozen.
  Matrix dE;

  static BigramGradients zeros_like(const BigramNet<Scalar>& m) {
    BigramGradients g;
    g.dW1 = Matrix::Zero(m.W1.rows(), m.W1.cols());
    g.db1 = Vector::Zero(m.b1.size());
    g.dW2 = Matrix::Zero(m.W2.rows(), m.W2.cols());
    g.db2 = Vector::Zero(m.b2.size());
    if (m.train_embeddings) g.dE = Matrix::Zero(m.E.rows(), m.E.cols());
    return g;
  }
};

using NeuralBigramModel = BigramNet<double>;
using GradientSet = BigramGradients<double>;

namespace detail {

template <typename Derived>
void softmax_rows_inplace(Eigen::MatrixBase<Derived>& z) {
  using std::exp;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    const auto mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
  }
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dropout_mask(Eigen::Index rows, Eigen::Index cols,
                                                                   double rate, bool training, RandomSource* rng) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (!training || rate == 0.0) return Matrix::Ones(rows, cols);
  if (!rng) throw std::invalid_argument("dropout in training mode needs a random source");
  const double keep = 1.0 - rate;
  const Scalar scale = Scalar(1.0 / keep);
  Matrix mask(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = rng->bernoulli(keep) ? scale : Scalar(0);
  return mask;
}

}  // namespace detail

/// Next-token probabilities after `prev_token`. Dropout (inverted) is only
/// active with `training` set, in which case `rng` must be non-null.
template <typename Scalar>
typename BigramNet<Scalar>::Vector forward_probs(const BigramNet<Scalar>& model, TokenId prev_token, bool training,
                                                 RandomSource* rng) {
  using Vector = typename BigramNet<Scalar>::Vector;
  if (!model.vocab.contains(prev_token)) throw std::out_of_range("forward: token outside vocabulary");
  Vector hidden = (model.W1 * model.E.row(prev_token).transpose() + model.b1).cwiseMax(Scalar(0));
  if (training) hidden = hidden.cwiseProduct(detail::dropout_mask<Scalar>(hidden.size(), 1, model.dropout_rate, true, rng));
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> logits = (model.W2 * hidden + model.b2).transpose();
  detail::softmax_rows_inplace(logits);
  return logits.transpose();
}

CategoricalDist forward(const NeuralBigramModel& model, TokenId prev_token, bool training = false,
                        RandomSource* rng = nullptr);

template <typename Scalar>
struct LossAndGrad {
  Scalar loss{};
  BigramGradients<Scalar> grads;
  long floored = 0;
};

/// Weighted mean negative score over `batch` and its exact gradient under the
/// dropout mask drawn in this call. `weights`, if given, aligns with `batch`.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const BigramNet<Scalar>& model, std::span<const TrainPair> batch,
                                  const ScoringRule& rule, bool training, RandomSource* rng,
                                  std::span<const double> weights = {}) {
  using Matrix = typename BigramNet<Scalar>::Matrix;
  using Vector = typename BigramNet<Scalar>::Vector;
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  if (!weights.empty() && weights.size() != batch.size())
    throw std::invalid_argument("loss_and_grad: weights and batch are misaligned");

  const auto n = static_cast<Eigen::Index>(batch.size());
  const int d = model.dim;
  const int v = model.vocab_size();

  Vector w = Vector::Ones(n);
  if (!weights.empty())
    for (Eigen::Index i = 0; i < n; ++i) w(i) = Scalar(weights[static_cast<std::size_t>(i)]);
  const Scalar wsum = w.sum();
  if (!(wsum > Scalar(0))) throw std::invalid_argument("loss_and_grad: weights sum to zero");

  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = batch[static_cast<std::size_t>(i)];
    if (!model.vocab.contains(p.prev) || !model.vocab.contains(p.target))
      throw std::out_of_range("loss_and_grad: token outside vocabulary");
    x.row(i) = model.E.row(p.prev);
  }

  Matrix z1 = (x * model.W1.transpose()).rowwise() + model.b1.transpose();
  const Matrix mask = detail::dropout_mask<Scalar>(n, d, model.dropout_rate, training, rng);
  Matrix hd = z1.cwiseMax(Scalar(0)).cwiseProduct(mask);
  Matrix probs = (hd * model.W2.transpose()).rowwise() + model.b2.transpose();
  detail::softmax_rows_inplace(probs);

  LossAndGrad<Scalar> out;
  out.grads = BigramGradients<Scalar>::zeros_like(model);
  Matrix dz2(n, v);
  Scalar total{0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const TokenId y = batch[static_cast<std::size_t>(i)].target;
    bool floored = false;
    total += w(i) * score(rule, probs.row(i).transpose(), y, &floored);
    out.floored += floored;
    const Scalar coef = w(i) / wsum;
    if (rule.kind == ScoreKind::Log) {
      dz2.row(i) = coef * probs.row(i);
      if (!floored) dz2(i, y) -= coef;
      else dz2.row(i).setZero();
    } else {
      // dLoss/dp = -coef * dS/dp, pulled back through the softmax Jacobian.
      const Vector p = probs.row(i).transpose();
      const Vector dp = -coef * score_gradient(rule, p, y);
      dz2.row(i) = (p.array() * (dp.array() - p.dot(dp))).matrix().transpose();
    }
  }
  out.loss = -total / wsum;

  out.grads.dW2.noalias() = dz2.transpose() * hd;
  out.grads.db2 = dz2.colwise().sum().transpose();
  Matrix dz1 = (dz2 * model.W2).cwiseProduct(mask);
  dz1 = dz1.cwiseProduct((z1.array() > Scalar(0)).template cast<Scalar>().matrix());
  out.grads.dW1.noalias() = dz1.transpose() * x;
  out.grads.db1 = dz1.colwise().sum().transpose();
  if (model.train_embeddings) {
    const Matrix dx = dz1 * model.W1;
    for (Eigen::Index i = 0; i < n; ++i) out.grads.dE.row(batch[static_cast<std::size_t>(i)].prev) += dx.row(i);
  }
  return out;
}

/// Row i is forward(model, i, training = false).
TransitionMatrix extract_transition_matrix(const NeuralBigramModel& model);

/// E ~ N(0, 1); W1, W2 ~ N(0, 2 / d); biases zero.
NeuralBigramModel init_model(const Vocabulary& vocab, int dim, RandomSource& rng, double dropout_rate = 0.1);

/// JSON checkpoint {vocab_size, d, dropout_rate, E, W1, b1, W2, b2, ...}
/// with row-major nested arrays; doubles round-trip exactly.
std::string checkpoint_json(const NeuralBigramModel& model);
NeuralBigramModel model_from_json(const std::string& text);
void save_checkpoint(const NeuralBigramModel& model, const std::filesystem::path& path);
NeuralBigramModel load_checkpoint(const std::filesystem::path& path);

extern template struct BigramNet<double>;

}  // namespace perturblm
