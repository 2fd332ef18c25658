#include "perturblm/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace perturblm {

SequenceSpace::SequenceSpace(int vocab_size, int length, std::vector<TokenSeq> support, long cap)
    : vocab_size_(vocab_size), length_(length), cap_(cap), cardinality_(1), support_(std::move(support)) {
  if (vocab_size < 2) throw std::invalid_argument("SequenceSpace: vocab_size must be >= 2");
  if (length < 1) throw std::invalid_argument("SequenceSpace: length must be >= 1");
  for (int i = 0; i < length; ++i) {
    if (cardinality_ > cap_ / vocab_size)
      throw std::length_error("SequenceSpace: |V|^L exceeds the enumeration cap of " + std::to_string(cap_));
    cardinality_ *= vocab_size;
  }
  if (support_.empty()) throw std::invalid_argument("SequenceSpace: support must be nonempty");
  for (const auto& s : support_)
    if (!contains(s)) throw std::invalid_argument("SequenceSpace: support member outside the space");
  std::sort(support_.begin(), support_.end());
  support_.erase(std::unique(support_.begin(), support_.end()), support_.end());
}

TokenSeq SequenceSpace::at(long index) const {
  if (index < 0 || index >= cardinality_) throw std::out_of_range("SequenceSpace::at");
  TokenSeq seq(static_cast<std::size_t>(length_));
  for (int i = length_ - 1; i >= 0; --i) {
    seq[static_cast<std::size_t>(i)] = static_cast<TokenId>(index % vocab_size_);
    index /= vocab_size_;
  }
  return seq;
}

long SequenceSpace::index_of(const TokenSeq& seq) const {
  if (!contains(seq)) throw std::out_of_range("SequenceSpace::index_of: sequence outside the space");
  long index = 0;
  for (TokenId t : seq) index = index * vocab_size_ + t;
  return index;
}

bool SequenceSpace::contains(const TokenSeq& seq) const {
  if (static_cast<int>(seq.size()) != length_) return false;
  return std::all_of(seq.begin(), seq.end(), [&](TokenId t) { return t >= 0 && t < vocab_size_; });
}

bool SequenceSpace::in_support(const TokenSeq& seq) const {
  return std::binary_search(support_.begin(), support_.end(), seq);
}

int SequenceSpace::distance_to_support(const TokenSeq& seq) const { return dist_to_support(seq, support_); }

std::vector<TokenSeq> SequenceSpace::within(int delta) const {
  std::vector<TokenSeq> out;
  for (long i = 0; i < cardinality_; ++i) {
    TokenSeq s = at(i);
    if (distance_to_support(s) <= delta) out.push_back(std::move(s));
  }
  return out;
}

std::size_t EnumeratingChooser::next_choice(std::size_t arity) {
  if (depth_ < path_.size()) {
    if (path_[depth_].arity != arity) throw std::logic_error("EnumeratingChooser: non-deterministic replay");
    return path_[depth_++].choice;
  }
  path_.push_back({0, arity});
  ++depth_;
  return 0;
}

std::size_t EnumeratingChooser::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  if (n == 1) return 0;
  prob_ /= static_cast<double>(n);
  return next_choice(n);
}

bool EnumeratingChooser::bernoulli(double p) {
  // Mirrors RandomSource: degenerate probabilities make no draw.
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  const bool hit = next_choice(2) == 0;
  prob_ *= hit ? p : 1.0 - p;
  return hit;
}

std::size_t EnumeratingChooser::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical: zero total weight");
  const std::size_t c = next_choice(weights.size());
  prob_ *= weights[c] / total;
  return c;
}

bool EnumeratingChooser::advance() {
  while (!path_.empty() && path_.back().choice + 1 >= path_.back().arity) path_.pop_back();
  if (path_.empty()) return false;
  ++path_.back().choice;
  depth_ = 0;
  prob_ = 1.0;
  return true;
}

ExactPerturbDist replacement_product_law(double beta, const SynonymTable& synonyms, const TokenSeq& x) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("replacement_product_law: beta must lie in [0, 1]");
  ExactPerturbDist law{{TokenSeq{}, 1.0}};
  for (TokenId tok : x) {
    const auto syn = synonyms.of(tok);
    ExactPerturbDist next;
    for (const auto& [prefix, p] : law) {
      if (beta < 1.0) {
        TokenSeq kept = prefix;
        kept.push_back(tok);
        next[std::move(kept)] += p * (1.0 - beta);
      }
      if (beta > 0.0) {
        if (syn.empty()) {
          next[prefix] += p * beta;
        } else {
          const double each = p * beta / static_cast<double>(syn.size());
          for (TokenId s : syn) {
            TokenSeq replaced = prefix;
            replaced.push_back(s);
            next[std::move(replaced)] += each;
          }
        }
      }
    }
    law = std::move(next);
  }
  return law;
}

ExactPerturbDist exact_perturb_dist(const PerturbSpec& spec, const TokenSeq& x, const SequenceSpace& space) {
  spec.validate();
  if (!space.contains(x)) throw std::out_of_range("exact_perturb_dist: input sequence outside the space");
  if (spec.kind == PerturbKind::Replacement) return replacement_product_law(spec.intensity, spec.synonyms, x);
  return enumerate_outcomes([&](EnumeratingChooser& c) { return perturb(x, spec, c); }, space.cap());
}

PerturbKernel make_kernel(const PerturbSpec& spec, const SequenceSpace& space) {
  return [spec, space](const TokenSeq& x) { return exact_perturb_dist(spec, x, space); };
}

double total_mass(const ExactPerturbDist& dist) {
  double m = 0.0;
  for (const auto& [seq, p] : dist) m += p;
  return m;
}

double tv_distance(const ExactPerturbDist& p, const ExactPerturbDist& q) {
  double acc = 0.0;
  auto ip = p.begin();
  auto iq = q.begin();
  while (ip != p.end() || iq != q.end()) {
    if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
      acc += std::abs(ip->second);
      ++ip;
    } else if (ip == p.end() || iq->first < ip->first) {
      acc += std::abs(iq->second);
      ++iq;
    } else {
      acc += std::abs(ip->second - iq->second);
      ++ip;
      ++iq;
    }
  }
  return 0.5 * acc;
}

ConditionalModel bigram_conditional(const NeuralBigramModel& model) {
  return [model](const TokenSeq& prefix) {
    if (prefix.empty()) throw std::invalid_argument("bigram model needs a non-empty prefix");
    return forward(model, prefix.back());
  };
}

CategoricalDist perturbed_model_dist(const ConditionalModel& model, const ExactPerturbDist& law) {
  Eigen::VectorXd mix;
  for (const auto& [seq, p] : law) {
    if (p == 0.0) continue;
    const CategoricalDist d = model(seq);
    if (mix.size() == 0) mix = Eigen::VectorXd::Zero(d.size());
    mix += p * d.probs();
  }
  if (mix.size() == 0) throw std::invalid_argument("perturbed_model_dist: empty perturbation law");
  return CategoricalDist(std::move(mix));
}

MixtureEstimate perturbed_model_dist_mc(const ConditionalModel& model, const PerturbSpec& spec, const TokenSeq& x,
                                        long n, RandomSource& rng) {
  if (n < 2) throw std::invalid_argument("perturbed_model_dist_mc: need at least two draws");
  spec.validate();
  Eigen::VectorXd mean, m2;
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd p = model(perturb(x, spec, rng)).probs();
    if (i == 0) {
      mean = Eigen::VectorXd::Zero(p.size());
      m2 = Eigen::VectorXd::Zero(p.size());
    }
    const Eigen::VectorXd delta = p - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta.cwiseProduct(p - mean);
  }
  const double nn = static_cast<double>(n);
  Eigen::VectorXd se = (m2 / (nn - 1.0) / nn).cwiseSqrt();
  return {CategoricalDist(std::move(mean)), std::move(se), n};
}

namespace {

class LawCache {
 public:
  explicit LawCache(const PerturbKernel& kernel) : kernel_(kernel) {}
  const ExactPerturbDist& operator()(const TokenSeq& x) {
    auto it = cache_.find(x);
    if (it == cache_.end()) it = cache_.emplace(x, kernel_(x)).first;
    return it->second;
  }

 private:
  const PerturbKernel& kernel_;
  std::map<TokenSeq, ExactPerturbDist> cache_;
};

int check_delta(int delta) {
  if (delta < 0) throw std::invalid_argument("delta must be nonnegative");
  return delta;
}

CategoricalDist random_dirichlet_row(int size, RandomSource& rng) {
  Eigen::VectorXd w(size);
  for (int i = 0; i < size; ++i) w(i) = rng.gamma(1.0);
  if (!(w.sum() > 0.0)) return CategoricalDist::uniform(size);
  return CategoricalDist::from_weights(w);
}

NeuralBigramModel random_bigram_model(int vocab_size, int dim, RandomSource& rng) {
  NeuralBigramModel m = init_model(Vocabulary(vocab_size), dim, rng, 0.0);
  for (Eigen::Index i = 0; i < m.b1.size(); ++i) m.b1(i) = rng.normal(0.0, 0.5);
  for (Eigen::Index i = 0; i < m.b2.size(); ++i) m.b2(i) = rng.normal(0.0, 1.0);
  return m;
}

}  // namespace

EtaResult eta_T(const PerturbKernel& kernel, const SequenceSpace& space, int delta) {
  check_delta(delta);
  LawCache law(kernel);
  EtaResult result;
  for (const auto& xp : space.within(delta)) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x : space.support()) {
      best = std::min(best, tv_distance(law(x), law(xp)));
      if (best == 0.0) break;
    }
    if (!result.worst || best > result.value) {
      result.value = best;
      result.worst = xp;
    }
  }
  return result;
}

EtaResult eta_T(const PerturbSpec& spec, const SequenceSpace& space, int delta) {
  return eta_T(make_kernel(spec, space), space, delta);
}

int rho_T(const PerturbKernel& kernel, const SequenceSpace& space, int delta) {
  check_delta(delta);
  int worst = 0;
  for (const auto& xp : space.within(delta)) {
    for (const auto& [outcome, p] : kernel(xp)) {
      if (!(p > 0.0)) continue;
      if (static_cast<int>(outcome.size()) != space.length())
        throw std::domain_error("rho_T: a perturbation outcome leaves the fixed-length space");
      worst = std::max(worst, space.distance_to_support(outcome));
    }
  }
  return worst;
}

int rho_T(const PerturbSpec& spec, const SequenceSpace& space, int delta) {
  return rho_T(make_kernel(spec, space), space, delta);
}

Prop1Report verify_prop1(double beta, const SynonymTable& synonyms, const TokenSeq& x, const TokenSeq& y) {
  const int h = hamming(x, y);
  Prop1Report r{};
  r.exact_tv = tv_distance(replacement_product_law(beta, synonyms, x), replacement_product_law(beta, synonyms, y));
  r.bound = (1.0 - beta) * h;
  r.holds = r.exact_tv <= r.bound + 1e-12;
  r.shared_synonyms = true;
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (x[l] == y[l]) continue;
    const auto sx = synonyms.of(x[l]);
    const auto sy = synonyms.of(y[l]);
    if (!std::equal(sx.begin(), sx.end(), sy.begin(), sy.end())) r.shared_synonyms = false;
  }
  return r;
}

void PartitionPerturber::validate(const SequenceSpace& space) const {
  if (static_cast<long>(domain_of.size()) != space.cardinality())
    throw std::invalid_argument("PartitionPerturber: domain map must cover the whole space");
  for (int d : domain_of)
    if (d < 0 || d >= domain_count()) throw std::invalid_argument("PartitionPerturber: domain id out of range");
  for (const auto& law : outputs) {
    if (std::abs(total_mass(law) - 1.0) > 1e-12)
      throw std::invalid_argument("PartitionPerturber: domain law does not sum to 1");
    for (const auto& [seq, p] : law) {
      if (p < 0.0) throw std::invalid_argument("PartitionPerturber: negative probability");
      for (TokenId t : seq)
        if (t < 0 || t >= space.vocab_size()) throw std::invalid_argument("PartitionPerturber: invalid output token");
    }
  }
}

PerturbKernel PartitionPerturber::kernel(const SequenceSpace& space) const {
  validate(space);
  return [outputs = outputs, domain_of = domain_of, space](const TokenSeq& x) -> ExactPerturbDist {
    return outputs[static_cast<std::size_t>(domain_of[static_cast<std::size_t>(space.index_of(x))])];
  };
}

PartitionPerturber first_token_partition(const SequenceSpace& space) {
  if (space.length() < 1) throw std::invalid_argument("first_token_partition: sequences must be nonempty");
  PartitionPerturber p;
  p.domain_of.resize(static_cast<std::size_t>(space.cardinality()));
  for (long i = 0; i < space.cardinality(); ++i) p.domain_of[static_cast<std::size_t>(i)] = space.at(i).front();
  p.outputs.resize(static_cast<std::size_t>(space.vocab_size()));
  std::vector<int> members(static_cast<std::size_t>(space.vocab_size()), 0);
  for (const auto& x : space.support()) ++members[static_cast<std::size_t>(x.front())];
  for (const auto& x : space.support()) {
    const auto d = static_cast<std::size_t>(x.front());
    p.outputs[d][x] += 1.0 / members[d];
  }
  for (int d = 0; d < space.vocab_size(); ++d)
    if (members[static_cast<std::size_t>(d)] == 0)
      throw std::invalid_argument("first_token_partition: no support member starts with token " + std::to_string(d));
  return p;
}

Assumption2Report verify_assumption2(const PerturbKernel& kernel, const std::vector<int>& domain_of,
                                     const SequenceSpace& space, int n_models, RandomSource& rng, int model_dim) {
  if (static_cast<long>(domain_of.size()) != space.cardinality())
    throw std::invalid_argument("verify_assumption2: domain map must cover the whole space");
  if (n_models < 1) throw std::invalid_argument("verify_assumption2: n_models must be >= 1");

  // First support member of every domain.
  std::map<int, TokenSeq> anchor;
  for (const auto& x : space.support()) anchor.try_emplace(domain_of[static_cast<std::size_t>(space.index_of(x))], x);
  std::set<int> domains(domain_of.begin(), domain_of.end());
  for (int d : domains)
    if (!anchor.count(d))
      throw std::invalid_argument("verify_assumption2: domain " + std::to_string(d) +
                                  " has no support member; the assumption cannot hold");

  LawCache law(kernel);
  Assumption2Report report;
  for (int k = 0; k < n_models; ++k) {
    const ConditionalModel model = bigram_conditional(random_bigram_model(space.vocab_size(), model_dim, rng));
    std::map<int, CategoricalDist> anchor_mix;
    for (const auto& [d, x0] : anchor) anchor_mix.emplace(d, perturbed_model_dist(model, law(x0)));
    for (long i = 0; i < space.cardinality(); ++i) {
      const TokenSeq xp = space.at(i);
      if (space.in_support(xp)) continue;
      const double tv = tv_distance(perturbed_model_dist(model, law(xp)), anchor_mix.at(domain_of[static_cast<std::size_t>(i)]));
      ++report.checked;
      if (tv > report.max_tv) {
        report.max_tv = tv;
        report.counterexample = xp;
      }
    }
  }
  report.holds = report.max_tv < 1e-12;
  if (report.holds) report.counterexample.reset();
  return report;
}

Assumption2Report verify_assumption2(const PartitionPerturber& perturber, const SequenceSpace& space, int n_models,
                                     RandomSource& rng, int model_dim) {
  return verify_assumption2(perturber.kernel(space), perturber.domain_of, space, n_models, rng, model_dim);
}

RobustnessReport verify_robustness_bound(const PerturbKernel& kernel, const SequenceSpace& space, int delta,
                                         int n_pairs, RandomSource& rng) {
  check_delta(delta);
  if (n_pairs < 1) throw std::invalid_argument("verify_robustness_bound: n_pairs must be >= 1");
  LawCache law(kernel);
  const auto candidates = space.within(delta);

  std::set<TokenSeq> reachable;
  for (const auto& x : space.support())
    for (const auto& [seq, p] : law(x))
      if (p > 0.0) reachable.insert(seq);
  std::set<TokenSeq> outcomes;
  for (const auto& xp : candidates)
    for (const auto& [seq, p] : law(xp))
      if (p > 0.0) outcomes.insert(seq);

  RobustnessReport report;
  report.eta = eta_T(kernel, space, delta).value;
  report.pairs = n_pairs;
  if (std::includes(reachable.begin(), reachable.end(), outcomes.begin(), outcomes.end()))
    report.note = "every outcome is reachable from the support; constructed pairs coincide";

  const int v = space.vocab_size();
  for (int k = 0; k < n_pairs; ++k) {
    std::map<TokenSeq, CategoricalDist> table_a, table_b;
    for (const auto& u : outcomes) {
      CategoricalDist a = random_dirichlet_row(v, rng);
      if (reachable.count(u)) {
        table_b.emplace(u, a);
      } else if (k % 2 == 0) {
        table_b.emplace(u, random_dirichlet_row(v, rng));
      } else {
        // Adversarial: all mass where A puts the least.
        Eigen::Index lo = 0;
        a.probs().minCoeff(&lo);
        table_b.emplace(u, CategoricalDist::point_mass(v, static_cast<TokenId>(lo)));
      }
      table_a.emplace(u, std::move(a));
    }
    const ConditionalModel model_a = [&table_a](const TokenSeq& s) { return table_a.at(s); };
    const ConditionalModel model_b = [&table_b](const TokenSeq& s) { return table_b.at(s); };
    for (const auto& xp : candidates) {
      const double tv = tv_distance(perturbed_model_dist(model_a, law(xp)), perturbed_model_dist(model_b, law(xp)));
      ++report.checked;
      if (space.in_support(xp)) {
        report.max_support_tv = std::max(report.max_support_tv, tv);
      } else if (tv > report.max_tv) {
        report.max_tv = tv;
        if (tv > report.eta + 1e-9) report.counterexample = xp;
      }
    }
  }
  report.holds = report.max_tv <= report.eta + 1e-9 && report.max_support_tv <= 1e-12;
  return report;
}

RobustnessReport verify_robustness_bound(const PerturbSpec& spec, const SequenceSpace& space, int delta, int n_pairs,
                                         RandomSource& rng) {
  return verify_robustness_bound(make_kernel(spec, space), space, delta, n_pairs, rng);
}

}  // namespace perturblm
