#include "perturblm/core.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace perturblm {

Vocabulary::Vocabulary(int size, std::optional<TokenId> eos, std::optional<TokenId> pad)
    : size(size), eos_id(eos), pad_id(pad) {
  if (size < 2) throw std::invalid_argument("Vocabulary: size must be >= 2");
  if (eos && !contains(*eos)) throw std::invalid_argument("Vocabulary: eos_id out of range");
  if (pad && !contains(*pad)) throw std::invalid_argument("Vocabulary: pad_id out of range");
  if (eos && pad && *eos == *pad) throw std::invalid_argument("Vocabulary: eos_id == pad_id");
}

void Vocabulary::check(const TokenSeq& seq) const {
  for (TokenId t : seq) {
    if (!contains(t)) {
      throw std::out_of_range("token id " + std::to_string(t) + " outside vocabulary of size " +
                              std::to_string(size));
    }
  }
}

namespace {

void validate_probs(const Eigen::VectorXd& p, const char* what) {
  if (p.size() == 0) throw std::invalid_argument(std::string(what) + ": empty distribution");
  if (!p.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
  if ((p.array() < 0.0).any()) throw std::invalid_argument(std::string(what) + ": negative entry");
  if (std::abs(p.sum() - 1.0) > kProbTolerance)
    throw std::invalid_argument(std::string(what) + ": entries do not sum to 1");
}

}  // namespace

CategoricalDist::CategoricalDist(Eigen::VectorXd probs) : probs_(std::move(probs)) {
  validate_probs(probs_, "CategoricalDist");
}

CategoricalDist CategoricalDist::from_weights(const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (weights.size() == 0 || !weights.allFinite() || (weights.array() < 0.0).any())
    throw std::invalid_argument("CategoricalDist::from_weights: invalid weights");
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("CategoricalDist::from_weights: zero mass");
  return CategoricalDist(weights / total);
}

CategoricalDist CategoricalDist::uniform(int size) {
  return CategoricalDist(Eigen::VectorXd::Constant(size, 1.0 / size));
}

CategoricalDist CategoricalDist::point_mass(int size, TokenId at) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(size);
  p[at] = 1.0;
  return CategoricalDist(std::move(p));
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd rows) : m_(std::move(rows)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1)
    throw std::invalid_argument("TransitionMatrix: must be square and nonempty");
  for (Eigen::Index i = 0; i < m_.rows(); ++i) validate_probs(m_.row(i).transpose(), "TransitionMatrix row");
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(stream ^ 0x5851f42d4c957f2dULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

RandomSource RandomSource::split(std::uint64_t tag) const {
  return RandomSource(seed_, mix64(stream_ ^ mix64(tag + 0x632be59bd9b4e019ULL)));
}

double RandomSource::uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

std::size_t RandomSource::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

bool RandomSource::bernoulli(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return uniform01() < p;
}

std::size_t RandomSource::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("categorical: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("categorical: zero total weight");
  const double u = uniform01() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  // u landed in the rounding gap at the top end.
  return last_positive;
}

double RandomSource::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

double RandomSource::gamma(double shape) {
  return std::gamma_distribution<double>(shape, 1.0)(engine_);
}

int hamming(const TokenSeq& x, const TokenSeq& y) {
  if (x.size() != y.size()) throw std::invalid_argument("hamming: sequences differ in length");
  int d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d += x[i] != y[i];
  return d;
}

int dist_to_support(const TokenSeq& x, std::span<const TokenSeq> support) {
  if (support.empty()) throw std::invalid_argument("dist_to_support: empty support");
  int best = std::numeric_limits<int>::max();
  for (const auto& s : support) best = std::min(best, hamming(x, s));
  return best;
}

TokenId sample_categorical(const CategoricalDist& p, RandomSource& rng) {
  const auto& v = p.probs();
  return static_cast<TokenId>(rng.categorical(std::span<const double>(v.data(), v.size())));
}

}  // namespace perturblm
