// Core value types: vocabulary, token sequences, categorical distributions,
// row-stochastic transition matrices and the seeded random source.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace perturblm {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Absolute tolerance for "sums to one".
inline constexpr double kProbTolerance = 1e-9;

struct Vocabulary {
  int size = 2;
  std::optional<TokenId> eos_id;
  std::optional<TokenId> pad_id;

  Vocabulary() = default;
  explicit Vocabulary(int size, std::optional<TokenId> eos = std::nullopt,
                      std::optional<TokenId> pad = std::nullopt);

  bool contains(TokenId id) const { return id >= 0 && id < size; }
  bool is_eos(TokenId id) const { return eos_id && *eos_id == id; }
  /// Throws std::out_of_range if any id falls outside [0, size).
  void check(const TokenSeq& seq) const;

  bool operator==(const Vocabulary&) const = default;
};

/// Probability vector over a vocabulary. Validated on construction and
/// immutable afterwards.
class CategoricalDist {
 public:
  /// Takes probabilities as given; throws if they are negative or do not
  /// sum to one within kProbTolerance.
  explicit CategoricalDist(Eigen::VectorXd probs);

  /// Normalizes nonnegative weights with positive total mass.
  static CategoricalDist from_weights(const Eigen::Ref<const Eigen::VectorXd>& weights);
  static CategoricalDist uniform(int size);
  static CategoricalDist point_mass(int size, TokenId at);

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](TokenId i) const { return probs_[i]; }
  const Eigen::VectorXd& probs() const { return probs_; }

 private:
  Eigen::VectorXd probs_;
};

/// Row-stochastic |V| x |V| matrix; entry (i, j) = P(next = j | current = i).
class TransitionMatrix {
 public:
  explicit TransitionMatrix(Eigen::MatrixXd rows);

  int size() const { return static_cast<int>(m_.rows()); }
  double operator()(TokenId from, TokenId to) const { return m_(from, to); }
  CategoricalDist row(TokenId from) const { return CategoricalDist(m_.row(from).transpose()); }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

/// Seeded, splittable random stream. Identical (seed, stream) pairs produce
/// identical draw sequences; `split` derives an independent child stream.
/// Single-owner: never share one instance across threads.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Child stream keyed by `tag`; does not advance this stream.
  RandomSource split(std::uint64_t tag) const;

  double uniform01();
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p);
  /// Index drawn proportionally to nonnegative `weights`.
  std::size_t categorical(std::span<const double> weights);
  double normal(double mean = 0.0, double stddev = 1.0);
  double gamma(double shape);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to derive stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Total variation distance, (1/2) * sum |p_i - q_i|.
template <typename DerivedP, typename DerivedQ>
double tv_distance(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: dimension mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

inline double tv_distance(const CategoricalDist& p, const CategoricalDist& q) {
  return tv_distance(p.probs(), q.probs());
}

/// Number of positions at which two equal-length sequences differ.
int hamming(const TokenSeq& x, const TokenSeq& y);

/// Minimum Hamming distance from `x` to a member of `support`.
int dist_to_support(const TokenSeq& x, std::span<const TokenSeq> support);

TokenId sample_categorical(const CategoricalDist& p, RandomSource& rng);

}  // namespace perturblm
